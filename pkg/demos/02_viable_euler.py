"""Projected Euler: forcing trajectories to stay inside a closed set.

The scheme replaces each Euler step by its projection onto K, so the
realized velocity u_j substitutes for f(x_j); where f is tangent to K
the substitution error vanishes with the step.

Run:  python demos/02_viable_euler.py
"""

import numpy as np

import viakit as vk

circle = vk.sphere([0.0, 0.0], 1.0)
rot = vk.rotation_field()

# --- rotation is tangent to the circle: a full turn stays on it --------------

res = vk.viable_trajectory(rot, circle, [1.0, 0.0], 2 * np.pi, 1e-3)
print("full turn on the circle:")
print("  end point           ", res.trajectory.states[-1])
print("  max distance to K   ", res.max_set_distance)
print("  substitution error  ", res.substitution_error)

# --- the substitution error is first order in h ------------------------------

print("\nsubstitution error vs step:")
for h in (1e-2, 5e-3, 2.5e-3):
    r = vk.viable_trajectory(rot, circle, [1.0, 0.0], 2 * np.pi, h)
    print(f"  h = {h:<8} -> {r.substitution_error:.6f}")

# --- an inward-tangent field on an interval: approach without overshoot ------

K = vk.box([-1.0], [1.0])
f = vk.VectorField(1, lambda t, x: 1.0 - x * x)   # zero velocity at the ends
res = vk.viable_trajectory(f, K, [0.0], 5.0, 1e-2)
xs = res.trajectory.states.ravel()
print("\nx' = 1 - x^2 on [-1, 1]: monotone =", bool(np.all(np.diff(xs) >= -1e-12)),
      " max =", xs.max(), " (never exceeds 1)")

# --- an outward field sticks to the boundary (tangency fails there) ----------

res = vk.viable_trajectory(vk.transport_field([1.0]), K, [0.9], 2.0, 1e-2)
xs = res.trajectory.states.ravel()
print("\nx' = 1 on [-1, 1] from 0.9: sticks at", xs[-1],
      "with substitution error", res.substitution_error,
      "(the projection eats the outward velocity)")

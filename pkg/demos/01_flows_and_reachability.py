"""Flows, reachable sets, and the a-priori bounds that come with them.

Run:  python demos/01_flows_and_reachability.py
"""

import numpy as np

import viakit as vk

# --- fixed-step RK4 against closed forms ------------------------------------

f = vk.linear_field(1.0)            # x' = x
traj = vk.integrate(f, [1.0], 0.0, 1.0, 1e-3)
print("x' = x from 1:   x(1) =", traj.states[-1][0], " (e =", np.e, ")")

lg = vk.logistic_field(1.0, 2.0)    # y' = (2 - y) y
traj = vk.integrate(lg, [1.0], 0.0, 1.0, 1e-3)
print("logistic:        y(1) =", traj.states[-1][0],
      " closed form =", vk.logistic_closed_form(1.0, 2.0, 1.0, 1.0))

# --- the flow is a semigroup and invertible ----------------------------------

rot = vk.rotation_field()
x = np.array([1.0, 0.0])
once = vk.flow(rot, 0.7, vk.flow(rot, 0.3, x, 1e-2), 1e-2)
both = vk.flow(rot, 1.0, x, 1e-2)
print("semigroup defect:", np.linalg.norm(once - both))
back = vk.flow(rot, -1.0, both, 1e-2)
print("inverse-flow defect:", np.linalg.norm(back - x))

# --- reachable set: pointwise image of seeds --------------------------------

seeds = [[1.0], [2.0], [0.0]]
pts, ok = vk.reach_set(vk.linear_field(-1.0), np.log(2.0), seeds, 1e-3)
print("decay at t = ln 2 maps", [s[0] for s in seeds], "to", pts.ravel().tolist())

# --- declared growth constants give explicit trajectory envelopes ------------

print("\nnorm envelope |x(t)| <= (|x0|+1) e^{ct} - 1 with c =", f.growth_c)
traj = vk.integrate(f, [0.5], 0.0, 3.0, 1e-2)
envelope = (0.5 + 1.0) * np.exp(traj.times) - 1.0
worst = np.max(np.linalg.norm(traj.states, axis=1) - envelope)
print("max envelope excess along the path:", worst, "(negative = satisfied)")

# --- declared monotonicity gives contraction between any two solutions -------

g = vk.linear_field(-2.0)
t1 = vk.integrate(g, [1.0], 0.0, 2.0, 1e-3)
t2 = vk.integrate(g, [-0.5], 0.0, 2.0, 1e-3)
gap = np.abs(t1.states - t2.states).ravel()
rel = gap[-1] / (np.exp(-2.0 * 2.0) * 1.5) - 1.0
print("contraction: final gap", gap[-1], "vs e^{-2t}|gap0| =",
      np.exp(-2.0 * 2.0) * 1.5, f"(relative excess {rel:.1e}, within 1e-6)")

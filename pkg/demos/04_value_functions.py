"""Value functions two ways: direct trajectory costs and epigraph geometry.

The running cost J(t) = e^{at} u(x(t)) + int_0^t e^{a tau} l dtau is
optimized directly (sup or inf over the horizon), and independently the
same value functions appear as lower envelopes of the viability kernel
or capture basin of the epigraph of u under the lifted state-cost
dynamics (x', y') = (f(x), -a y - l(x, f(x))).

Run:  python demos/04_value_functions.py
"""

import numpy as np

import viakit as vk

decay = vk.linear_field(-1.0)

# problem A: worst future obstacle value along the decay flow (l = 0)
A = vk.LagrangianProblem(decay, vk.zero_lagrangian, 0.0, vk.abs_obstacle)
# problem B: stop anytime, pay |x(t)| plus elapsed time (l = 1)
B = vk.LagrangianProblem(decay, vk.unit_lagrangian, 0.0, vk.abs_obstacle)

print("value_sup for A at x = 0.7:", vk.value_sup(A, [0.7], 10.0, 1e-3),
      "(J decreases, so the sup sits at t = 0: |x|)")
print("value_inf for B at x = e:  ", vk.value_inf(B, [np.e], 15.0, 1e-3),
      "(calculus minimum e*e^{-t} + t at t = 1: exactly 2)")

# --- a Lyapunov value: certified exponential envelope -------------------------

L = vk.LagrangianProblem(decay, vk.zero_lagrangian, 0.5, vk.abs_obstacle)
val = vk.lyapunov(L, [0.7], 10.0, 1e-3)
print("\n0.5-Lyapunov value at 0.7:", val,
      " (certifies |x(t)| <= e^{-t/2} * value along the path)")

# --- minimal time / minimal length against the hitting-time route --------------

one = vk.transport_field([1.0])
target = vk.ball([1.0], 1e-6)
print("\nminimal time to {1} under x'=1 from 0:",
      vk.minimal_time(one, target, [0.0], 5.0, 1e-3))
print("hitting time (independent bisection):  ",
      vk.hitting_time(one, target, [0.0], 5.0, 1e-3))
print("minimal arc length to the 0.1-ball under x'=-x from 1:",
      vk.minimal_length(decay, vk.ball([0.0], 0.1), [1.0], 15.0, 1e-3))

# --- the epigraph route cross-validates the direct one -------------------------

grid = vk.GridSpec([-2.0, 0.0], [2.0, 3.0], [100, 100])
res = vk.epigraph_value_field(A, grid, "sup", 8.0, 2e-2)
xs = res.envelope.grid.nodes().ravel()
gap = np.max(np.abs(res.envelope.values - np.abs(xs)))
print("\nepigraph-kernel envelope vs |x|: max gap", gap,
      "(y cell =", 3.0 / 100, ")")

# --- variational-inequality residuals on the computed field --------------------

vals = vk.tabulate_values(A, vk.GridSpec([-2.0], [2.0], [200]).nodes(), "sup",
                          10.0, 1e-2)
field = vk.GridFunction(vk.GridSpec([-2.0], [2.0], [200]), vals)
samples = np.linspace(-1.5, 1.5, 41)[:, None]
report = vk.hj_check_sup(A, field, samples, tol=0.05)
print("residual check on the computed value:", len(report.violations), "violations")
shifted = vk.GridFunction(field.grid, vals + 1.0)
report2 = vk.hj_check_sup(A, shifted, samples, tol=0.05)
print("residual check on a shifted (wrong) value:", len(report2.violations),
      "violations (the complementarity side catches it)")

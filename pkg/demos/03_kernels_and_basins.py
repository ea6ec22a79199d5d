"""Exit/hitting times, viability kernels, capture basins on grids.

All time functionals are evaluated along the RK4-selected trajectory
(unique-solution regime).  +infinity is the 1e18 sentinel.

Run:  python demos/03_kernels_and_basins.py
"""

import numpy as np

import viakit as vk
from viakit.common import INF

one = vk.transport_field([1.0])
grow = vk.linear_field(1.0)

# --- scalar functionals -------------------------------------------------------

K = vk.box([0.0], [1.0])
print("exit time of [0,1] under x'=1 from 0.3:",
      vk.exit_time(one, K, [0.3], 5.0, 1e-3))
print("exit time of [-1,1] under x'=x from 0.5:",
      vk.exit_time(grow, vk.box([-1.0], [1.0]), [0.5], 5.0, 1e-3),
      "(ln 2 =", np.log(2.0), ")")
C = vk.ball([0.0], 0.1)
print("hitting time of the 0.1-ball under x'=-x from 1:",
      vk.hitting_time(vk.linear_field(-1.0), C, [1.0], 5.0, 1e-3),
      "(ln 10 =", np.log(10.0), ")")

# --- the capture margin: reach C no later than leaving K ----------------------

Kb, Cb = vk.box([0.0], [2.0]), vk.box([1.0], [2.0])
print("capture margin (K=[0,2], C=[1,2], x=0.5):",
      vk.capture_margin(one, Kb, Cb, [0.5], 5.0, 1e-3), "(<= 0: captured viably)")

# --- grid fields: the kernel of an expanding flow collapses to the origin -----

grid = vk.GridSpec([-1.0], [1.0], [400])
tf = vk.viab_field(grow, vk.box([-1.0], [1.0]), grid, 20.0, 1e-2)
kernel = grid.nodes()[tf.superlevel(20.0)]
print("\n{exit time >= 20} for x'=x on [-1,1]:", kernel.ravel().tolist())

alive, iters = vk.discrete_kernel(grow, vk.box([-1.0], [1.0]), grid, 1.0,
                                  flow_step=1e-2)
print("discrete kernel survivors:", grid.nodes()[alive].ravel().tolist(),
      f"({iters} deletion sweeps)")

# --- rotation preserves the disk: everything survives -------------------------

disk = vk.ball([0.0, 0.0], 1.0)
g2 = vk.GridSpec([-1.0, -1.0], [1.0, 1.0], [60, 60])
tf2 = vk.viab_field(vk.rotation_field(), disk, g2, 5.0, 1e-2)
print("\nrotation on the disk: all", int(tf2.inside.sum()),
      "in-disk nodes have infinite exit time:",
      bool(np.all(tf2.values[tf2.inside] >= INF)))

rep = vk.repeller_check(one, vk.box([0.0], [1.0]), vk.GridSpec([0.0], [1.0], [50]),
                        3.0, 1e-3)
print("x'=1 makes [0,1] a repeller:", rep.is_repeller,
      " sup exit time:", rep.t_bar)

# --- capture basins add under unions ------------------------------------------

g1 = vk.GridSpec([0.0], [2.0], [80])
C1, C2 = vk.box([1.0], [1.2]), vk.box([1.5], [1.7])
u = vk.capt_field(one, vk.union(C1, C2), grid=g1, T_max=5.0, h=1e-2)
a = vk.capt_field(one, C1, grid=g1, T_max=5.0, h=1e-2)
b = vk.capt_field(one, C2, grid=g1, T_max=5.0, h=1e-2)
print("\ncapture basin of a union is the min of the parts (exact):",
      bool(np.array_equal(u.values, np.minimum(a.values, b.values))))

"""Pure-Neumann witness that plain CR is *not* equivalent to RT0.

With the exact solution u = x1^2 + x2^2 (so f = -4 and the outward flux is
constant on every straight boundary facet), u lies in the enriched space and
2x lies in the RT0 space: both methods reproduce the solution to rounding.
The plain CR error, by contrast, is bounded below by beta*h with a stable
positive beta: no choice of CR solve can match the exact mixed flux.
"""

import numpy as np

import simplexfem as sf

meshes = sf.mesh_hierarchy(sf.build_box_mesh(2, 1), 4)[1:]
table = sf.neumann_counterexample_report(meshes)

print("level  h        |grad u - sigma_RT|  |grad_NC(u - u_ECR)|  "
      "|grad_NC(u - u_CR)|   beta = err/h")
for i in range(len(table.h)):
    c = table.columns
    print(f"{i + 1:5d}  {table.h[i]:.5f}  {c['rt_flux_error'][i]:.3e}         "
          f"{c['ecr_grad_error'][i]:.3e}           "
          f"{c['cr_grad_error'][i]:.3e}          {c['beta'][i]:.6f}")

betas = np.array(table.columns["beta"])
print(f"\nbeta is positive and stable: mean {betas.mean():.6f}, "
      f"spread {(betas.max() / betas.min() - 1):.2e}")
print("RT0 and the enriched element are exact; plain CR carries an O(h) "
      "error bounded away from zero, so CR cannot coincide with RT0.")

"""Stokes: the enriched-CR velocity/pressure pair reproduces the RT0
pseudostress solution.

grad_NC u_ECR + p_ECR id equals the mixed pseudostress sigma_RT (after
fixing the trace-mean gauge, whose shift is itself at rounding level), and
the mixed displacement satisfies the weak relation
(u_RT - Pi0 u_ECR, div tau) = (div_NC u_ECR, tr tau / n) against every RT0
tensor basis function.  The classic 2D pointwise identities relating the
plain CR solves to RT0 are checked alongside.
"""

import numpy as np

import simplexfem as sf

print("=== pseudostress identity, unit square, f = (1, 0) ===")
mesh = sf.build_box_mesh(2, 1)
for level in range(1, 4):
    mesh = sf.refine_uniform(mesh)
    rep = sf.check_stokes_identity(mesh, (1.0, 0.0), level=level)
    print(f"level {level}: tensor residual {rep.relative['tensor_identity']:.2e}, "
          f"weak displacement relation {rep.relative['weak_l_relation']:.2e}, "
          f"gauge shifts ({rep.extra['gauge_shift_primal']:.1e}, "
          f"{rep.extra['gauge_shift_mixed']:.1e})")
    print(f"         max |Pi0 div_NC u_ECR| = "
          f"{rep.extra['projected_divergence_max']:.2e} (discrete incompressibility)")

print()
print("=== 3D run, unit cube level 1 ===")
rep3 = sf.check_stokes_identity(sf.refine_uniform(sf.build_box_mesh(3, 1)),
                                (1.0, 0.0, 0.0))
print(f"tensor residual {rep3.relative['tensor_identity']:.2e}, "
      f"weak relation {rep3.relative['weak_l_relation']:.2e}")

print()
print("=== 2D pointwise identities for the plain CR element ===")
mesh = sf.refine_uniform(sf.refine_uniform(sf.build_box_mesh(2, 1)))
rng = np.random.default_rng(1)
f_scalar = rng.uniform(-1.0, 1.0, mesh.n_cells)
marini = sf.check_marini_identity(mesh, f_scalar)
print(f"Marini:  sigma_RT = grad u_CR - (f_K/2)(x - mid K):  "
      f"max pointwise residual {marini.relative['pointwise']:.2e}")

f_vec = rng.uniform(-1.0, 1.0, (mesh.n_cells, 2))
cgs = sf.check_cgs_identity(mesh, f_vec)
print(f"CGS:     pseudostress line residual {cgs.relative['tensor_pointwise']:.2e}, "
      f"displacement line residual {cgs.relative['displacement_l2']:.2e}")

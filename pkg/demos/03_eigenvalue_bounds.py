"""Eigenvalue bounds and the mixed/nonconforming eigen equivalence.

On the coarse unit-square meshes the CR element overshoots the first
Dirichlet-Laplace eigenvalue 2*pi^2 while the enriched element undershoots
it (24 and 120/7 = 17.1428..); under refinement both converge at rate 2,
the enriched element always from below.  The RT0 mixed eigenproblem has
exactly the same spectrum as the projected-mass enriched form, with
sigma_RT = grad_NC phi and u_RT = Pi0 phi, and the difference
|grad_NC u_ECR - sigma_RT| superconverges at twice the primary rate.
"""

import numpy as np

import simplexfem as sf

EXACT = 2 * np.pi ** 2
print(f"first Dirichlet eigenvalue of (0,1)^2: 2 pi^2 = {EXACT:.6f}\n")

for variant in ("diagonal", "crisscross"):
    coarse = sf.build_box_mesh(2, 1, variant)
    lam_cr = sf.solve_eigen(coarse, "CR", 1)[0].lam
    lam_ecr = sf.solve_eigen(coarse, "ECR", 1)[0].lam
    print(f"coarse {variant:10s}: lambda_CR = {lam_cr:.6f} (upper bound), "
          f"lambda_ECR = {lam_ecr:.6f} (lower bound)")

print("\n=== refinement study (diagonal) ===")
print("level   h        lambda_ECR   lambda_CR    lambda_RT")
mesh = sf.build_box_mesh(2, 1)
for level in range(1, 5):
    mesh = sf.refine_uniform(mesh)
    le = sf.solve_eigen(mesh, "ECR", 1)[0].lam
    lc = sf.solve_eigen(mesh, "CR", 1)[0].lam
    lr = sf.solve_eigen(mesh, "RT-mixed", 1)[0].lam
    print(f"{level:5d}   {mesh.h_max:.4f}  {le:.6f}    {lc:.6f}    {lr:.6f}")
print("(the enriched element stays below 2 pi^2 on every level; plain CR "
      "drops below once refined, RT0 approaches from above)")

print("\n=== mixed eigenproblem vs projected-mass enriched form, k = 3 ===")
mesh = sf.build_box_mesh(2, 1)
for level in range(1, 4):
    mesh = sf.refine_uniform(mesh)
    rep = sf.check_eigen_equivalence(mesh, k=3, level=level)
    lams = ", ".join(f"{l:.4f}" for l in rep.extra["lambda_mixed"])
    print(f"level {level}: lambda = [{lams}], eigenvalue agreement "
          f"{rep.relative['eigenvalues']:.2e}, worst field identity "
          f"{max(v for k, v in rep.relative.items() if 'identity' in k):.2e}")

print("\n=== superconvergence of |grad_NC u_ECR - sigma_RT| ===")
fix = sf.sine_solution(2)
exact = (lambda x: 2.0 * fix.u(x), lambda x: 2.0 * fix.grad(x), EXACT)
meshes = sf.mesh_hierarchy(sf.build_box_mesh(2, 1), 4)[1:]
table = sf.eigen_error_comparison(meshes, exact)
print("h        |grad u - grad u_ECR|  |grad u - sigma_RT|  difference")
for i in range(len(table.h)):
    print(f"{table.h[i]:.4f}   {table.columns['ecr_error'][i]:.6f}            "
          f"{table.columns['rt_error'][i]:.6f}          "
          f"{table.columns['difference'][i]:.3e}")
print("difference rates:", np.round(table.rates("difference"), 3),
      " (primary rates are ~1, the difference decays at rate ~2)")

import numpy as np
import pytest

from simplexfem import condense
from simplexfem.mesh import SimplexMesh, build_box_mesh, cell_geometry, refine_uniform
from simplexfem.problems import sine_solution, solve_poisson


def level(dim, n):
    m = build_box_mesh(dim, 1)
    for _ in range(n):
        m = refine_uniform(m)
    return m


def test_bubble_coefficient_reference_value():
    # f = 1 on the reference triangle: (f, phi_K) = 1/2, energy 18 => 1/36
    mesh = SimplexMesh(2, [[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    b = condense.solve_bubble_local(cell_geometry(mesh, 0), 1.0)
    assert b == pytest.approx(1 / 36, abs=1e-16)
    assert condense.solve_bubble_local(cell_geometry(mesh, 0), 0.0) == 0.0


def test_bubble_coefficient_h2_scaling():
    mesh1 = SimplexMesh(2, [[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    mesh2 = SimplexMesh(2, 0.5 * mesh1.vertices, [[0, 1, 2]])
    b1 = condense.solve_bubble_local(cell_geometry(mesh1, 0), 1.0)
    b2 = condense.solve_bubble_local(cell_geometry(mesh2, 0), 1.0)
    assert b2 == pytest.approx(0.25 * b1, rel=1e-14)


def test_bubble_vector_matches_local_solve():
    mesh = level(2, 1)
    f = np.linspace(-1, 1, mesh.n_cells)
    vec = condense.bubble_coefficients(mesh, f)
    for c in (0, mesh.n_cells - 1):
        assert vec[c] == pytest.approx(
            condense.solve_bubble_local(cell_geometry(mesh, c), f[c]), rel=1e-13)


@pytest.mark.parametrize("dim,lvl", [(2, 3), (3, 1)])
def test_condensed_equals_monolithic(dim, lvl):
    mesh = level(dim, lvl)
    f = 1.0
    sol = condense.solve_ecr_condensed(mesh, f)
    mono = solve_poisson(mesh, f, "ECR")
    assert np.abs(sol.ecr_field.coeffs - mono.coeffs).max() <= 1e-12


def test_condensed_zero_load():
    sol = condense.solve_ecr_condensed(level(2, 1), 0.0)
    assert np.abs(sol.ecr_field.coeffs).max() == 0.0


def test_condensed_agrees_for_general_load():
    # the splitting is exact for ECR, so quadrature loads also agree
    mesh = level(2, 2)
    fix = sine_solution(2)
    sol = condense.solve_ecr_condensed(mesh, fix.f)
    mono = solve_poisson(mesh, fix.f, "ECR")
    assert np.abs(sol.ecr_field.coeffs - mono.coeffs).max() <= 1e-12


def test_recombined_field_invariants():
    mesh = level(2, 2)
    sol = condense.solve_ecr_condensed(mesh, 1.0)
    # facet averages equal the CR part's facet averages
    assert np.allclose(sol.ecr_field.facet_averages(), sol.cr_part.facet_averages(),
                       atol=1e-15)
    # cell averages equal the bubble coefficients plus the CR cell means
    cr_local = sol.cr_part.dofmap.gather(sol.cr_part.coeffs)[:, :, 0]
    cr_means = cr_local.sum(axis=1) / (mesh.dim + 1)
    assert np.allclose(sol.ecr_field.cell_averages(), sol.bubble + cr_means,
                       atol=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_split_basis_decoupling(dim):
    mesh = level(dim, 1)
    S, dm = condense.split_basis_stiffness(mesh)
    n_bubble = mesh.n_cells
    n_facet = dm.n_scalar - n_bubble
    scale = max(abs(S.data).max(), 1.0)
    coupling = S[:n_facet, n_facet:]
    max_entry = abs(coupling.toarray()).max() if coupling.nnz else 0.0
    assert max_entry <= 1e-13 * scale
    bubble_block = S[n_facet:, n_facet:].toarray()
    off = bubble_block - np.diag(np.diag(bubble_block))
    assert np.abs(off).max() <= 1e-15 * scale
    assert np.all(np.diag(bubble_block) > 0)

"""Basis evaluation and local matrices for the CR, enriched-CR (ECR), RT0 and
P0 element families on n-simplices.

Degrees of freedom are *average*-normalized throughout:

* CR: facet averages; local basis ``1 - n*lambda_j`` dual to them.
* ECR: facet averages plus one cell average.  The local basis is the CR-like
  facet family corrected by the radial bubble

      phi_K = (n+2)/2 - n(n+1)^2(n+2)/(2H) * |x - mid(K)|^2,
      phi_j = (1 - n*lambda_j) - phi_K/(n+1),

  with H the sum of squared edge lengths, so that avg_E(phi_j) = delta_ij,
  avg_K(phi_j) = 0, avg_K(phi_K) = 1 and avg_E(phi_K) = 0.
* RT0: total normal flux through each facet with respect to the facet's
  canonical global normal; local basis ``s_i (x - a_i) / (n|K|)`` where a_i is
  the vertex opposite facet i and s_i the cell's orientation sign.
* P0: cell averages.

All evaluation is exact closed-form arithmetic; no reference-to-physical
Piola map is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import cell_weights, physical_points

FAMILIES = ("CR", "ECR", "RT0", "P0")


def bubble_strength(dim, H):
    """Coefficient c in grad(phi_K) = -c (x - mid(K))."""
    n = dim
    return n * (n + 1) ** 2 * (n + 2) / H


def bubble_energy(dim, measure, H):
    """Exact ||grad phi_K||^2 over one cell: n^2 (n+1)^2 (n+2) |K| / H."""
    n = dim
    return n ** 2 * (n + 1) ** 2 * (n + 2) * measure / H


def cell_average_row(family, dim):
    """Cell averages of the local basis functions (exact)."""
    n = dim
    if family == "ECR":
        row = np.zeros(n + 2)
        row[-1] = 1.0
        return row
    if family == "CR":
        return np.full(n + 1, 1.0 / (n + 1))
    if family == "P0":
        return np.ones(1)
    raise ValueError(f"no cell-average row for family {family!r}")


# -- batch evaluation over all cells of a mesh ------------------------------

def cr_eval_mesh(mesh, bary):
    """CR basis on every cell at barycentric points.

    Returns (values (Q, n+1), gradients (nc, n+1, n)); values are
    cell-independent, gradients constant per cell.
    """
    n = mesh.dim
    values = 1.0 - n * np.asarray(bary)
    grads = -n * mesh.barycentric_gradients
    return values, grads


def ecr_eval_mesh(mesh, bary):
    """ECR basis on every cell: values (nc, Q, n+2), gradients
    (nc, Q, n+2, n); the bubble is slot n+1."""
    n = mesh.dim
    bary = np.asarray(bary)
    nc, q = mesh.n_cells, bary.shape[0]
    x = physical_points(mesh, bary)
    dx = x - mesh.cell_centroids[:, None, :]
    c = bubble_strength(n, mesh.cell_H)[:, None]

    bubble = (n + 2) / 2.0 - 0.5 * c * (dx ** 2).sum(axis=2)
    bubble_grad = -c[:, :, None] * dx

    values = np.empty((nc, q, n + 2))
    values[:, :, : n + 1] = (1.0 - n * bary)[None, :, :] - bubble[:, :, None] / (n + 1)
    values[:, :, n + 1] = bubble

    grads = np.empty((nc, q, n + 2, n))
    grads[:, :, : n + 1, :] = (-n * mesh.barycentric_gradients[:, None, :, :]
                               - bubble_grad[:, :, None, :] / (n + 1))
    grads[:, :, n + 1, :] = bubble_grad
    return values, grads


def rt0_eval_mesh(mesh, bary):
    """RT0 basis on every cell: values (nc, Q, n+1, n) and constant
    divergences (nc, n+1) = s_i / |K|."""
    n = mesh.dim
    x = physical_points(mesh, bary)
    opp = mesh.vertices[mesh.cells]                     # (nc, n+1, n)
    signs = mesh.cell_facet_signs
    scale = signs / (n * mesh.cell_measures[:, None])   # (nc, n+1)
    values = scale[:, None, :, None] * (x[:, :, None, :] - opp[:, None, :, :])
    divs = signs / mesh.cell_measures[:, None]
    return values, divs


# -- per-cell evaluation (CellGeometry API) ----------------------------------

def _barycentric_at(geom, points):
    lam = np.empty(points.shape[:-1] + (geom.dim + 1,))
    rel = points - geom.centroid
    lam[...] = 1.0 / (geom.dim + 1) + rel @ geom.barycentric_gradients.T
    return lam


def ecr_eval(geom, points):
    """ECR basis values/gradients at physical points of one cell.

    ``points`` may be a single point (n,) or an array (..., n).  The formulas
    are polynomials on all of R^n; no containment check is made.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    pts = points[None, :] if single else points
    n = geom.dim
    lam = _barycentric_at(geom, pts)
    dx = pts - geom.centroid
    c = bubble_strength(n, geom.H)
    bubble = (n + 2) / 2.0 - 0.5 * c * (dx ** 2).sum(axis=-1)
    bubble_grad = -c * dx

    values = np.empty(pts.shape[:-1] + (n + 2,))
    values[..., : n + 1] = 1.0 - n * lam - bubble[..., None] / (n + 1)
    values[..., n + 1] = bubble
    grads = np.empty(pts.shape[:-1] + (n + 2, n))
    grads[..., : n + 1, :] = -n * geom.barycentric_gradients - bubble_grad[..., None, :] / (n + 1)
    grads[..., n + 1, :] = bubble_grad
    if single:
        return values[0], grads[0]
    return values, grads


def cr_eval(geom, points):
    """CR basis values/gradients at physical points of one cell."""
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    pts = points[None, :] if single else points
    n = geom.dim
    lam = _barycentric_at(geom, pts)
    values = 1.0 - n * lam
    grads = np.broadcast_to(-n * geom.barycentric_gradients,
                            pts.shape[:-1] + (n + 1, n)).copy()
    if single:
        return values[0], grads[0]
    return values, grads


def rt0_eval(geom, orientation_signs, points):
    """RT0 basis vectors and divergences at physical points of one cell.

    ``orientation_signs`` is the cell's row of ``mesh.cell_facet_signs``.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    pts = points[None, :] if single else points
    n = geom.dim
    signs = np.asarray(orientation_signs, dtype=float)
    scale = signs / (n * geom.measure)
    values = scale[:, None] * (pts[..., None, :] - geom.vertices)
    divs = signs / geom.measure
    if single:
        return values[0], divs
    return values, divs


# -- local matrices ----------------------------------------------------------

@dataclass(frozen=True)
class LocalMatrices:
    """Per-cell element matrices; every array carries a leading cell axis.

    ``rt_div`` holds the integrals of div(psi_i) (= the orientation signs),
    ``rt_moment`` the vector moments int_K psi_i dx, and ``rt_outer`` the
    integrals int_K psi_i psi_j^T dx needed for the deviatoric Stokes form.
    """

    dim: int
    ecr_stiffness: np.ndarray   # (nc, n+2, n+2)
    ecr_mass: np.ndarray        # (nc, n+2, n+2)
    cr_stiffness: np.ndarray    # (nc, n+1, n+1)
    cr_mass: np.ndarray         # (nc, n+1, n+1)
    rt_mass: np.ndarray         # (nc, n+1, n+1)
    rt_div: np.ndarray          # (nc, n+1)
    rt_moment: np.ndarray       # (nc, n+1, n)
    rt_outer: np.ndarray        # (nc, n+1, n+1, n, n)


def local_matrices_mesh(mesh, rule):
    """Local matrices for all cells; ``rule`` must be exact to degree >= 4
    (the ECR mass integrand is quartic)."""
    if rule.exact_degree < 4:
        raise ValueError("local matrices need a rule of exactness >= 4")
    w = cell_weights(mesh, rule)

    ecr_vals, ecr_grads = ecr_eval_mesh(mesh, rule.points)
    ecr_stiff = np.einsum("cqan,cqbn,cq->cab", ecr_grads, ecr_grads, w)
    ecr_mass = np.einsum("cqa,cqb,cq->cab", ecr_vals, ecr_vals, w)

    cr_vals, cr_grads = cr_eval_mesh(mesh, rule.points)
    cr_stiff = np.einsum("can,cbn,c->cab", cr_grads, cr_grads, mesh.cell_measures)
    cr_mass = np.einsum("qa,qb,cq->cab", cr_vals, cr_vals, w)

    rt_vals, _ = rt0_eval_mesh(mesh, rule.points)
    rt_mass = np.einsum("cqin,cqjn,cq->cij", rt_vals, rt_vals, w)
    rt_outer = np.einsum("cqir,cqjs,cq->cijrs", rt_vals, rt_vals, w)
    rt_moment = np.einsum("cqin,cq->cin", rt_vals, w)
    rt_div = mesh.cell_facet_signs.astype(float)

    return LocalMatrices(mesh.dim, ecr_stiff, ecr_mass, cr_stiff, cr_mass,
                         rt_mass, rt_div, rt_moment, rt_outer)


def local_matrices(geom, orientation_signs, rule):
    """Local matrices of a single cell (leading cell axis of length 1
    squeezed away)."""
    from .mesh import SimplexMesh  # local import to avoid a cycle

    mesh = SimplexMesh(geom.dim, geom.vertices, np.arange(geom.dim + 1)[None, :])
    lm = local_matrices_mesh(mesh, rule)
    # the throwaway single-cell mesh has its own orientation signs; rescale
    # the RT arrays to the caller's convention
    ratio = (np.asarray(orientation_signs, dtype=float) * lm.rt_div[0])
    return LocalMatrices(
        geom.dim,
        lm.ecr_stiffness[0], lm.ecr_mass[0], lm.cr_stiffness[0], lm.cr_mass[0],
        lm.rt_mass[0] * np.outer(ratio, ratio),
        np.asarray(orientation_signs, dtype=float),
        lm.rt_moment[0] * ratio[:, None],
        lm.rt_outer[0] * np.einsum("i,j->ij", ratio, ratio)[:, :, None, None],
    )

"""Quadrature rules on the reference n-simplex, exact to a requested degree.

Degrees 0-2 use the classic symmetric rules (centroid, facet midpoints in 2D,
the 4-point rule in 3D).  Higher degrees are collapsed Gauss-Jacobi product
rules: positive weights, arbitrary dimension, exactness guaranteed by
construction.  Points are stored as barycentric coordinates with respect to
the cell vertex order; weights sum to the reference-simplex volume 1/n!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 30


class QuadratureError(ValueError):
    """Raised for unsupported dimension/degree requests."""


@dataclass(frozen=True)
class QuadratureRule:
    dim: int
    exact_degree: int
    points: np.ndarray    # (Q, dim+1) barycentric
    weights: np.ndarray   # (Q,), positive, summing to 1/dim!

    def __post_init__(self):
        self.points.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def n_points(self):
        return len(self.weights)


def _gauss_jacobi_01(k, alpha):
    """Nodes/weights for int_0^1 (1-u)^alpha f(u) du, exact to degree 2k-1."""
    t, w = roots_jacobi(k, alpha, 0.0)
    return (t + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def _collapsed_rule(dim, degree):
    k = (degree + 2) // 2
    axes = [_gauss_jacobi_01(k, dim - 1 - j) for j in range(dim)]
    grids_u = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    grids_w = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    u = np.stack([g.ravel() for g in grids_u], axis=1)      # (Q, dim)
    w = np.prod(np.stack([g.ravel() for g in grids_w], axis=1), axis=1)
    x = np.empty_like(u)
    shrink = np.ones(len(u))
    for j in range(dim):
        x[:, j] = u[:, j] * shrink
        shrink = shrink * (1.0 - u[:, j])
    return x, w


def rule_for_degree(dim, degree):
    """A rule on the reference ``dim``-simplex exact for polynomials of total
    degree <= ``degree``.

    Raises QuadratureError for dim < 1 or degree outside [0, 30].
    """
    dim, degree = int(dim), int(degree)
    if dim < 1:
        raise QuadratureError(f"dimension must be >= 1, got {dim}")
    if not 0 <= degree <= MAX_DEGREE:
        raise QuadratureError(f"degree {degree} outside supported range [0, {MAX_DEGREE}]")
    vol = 1.0 / math.factorial(dim)
    if degree <= 1:
        points = np.full((1, dim + 1), 1.0 / (dim + 1))
        return QuadratureRule(dim, 1, points, np.array([vol]))
    if degree == 2 and dim == 2:
        points = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
        return QuadratureRule(2, 2, points, np.full(3, vol / 3.0))
    if degree == 2 and dim == 3:
        s = (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
        t = (5.0 - math.sqrt(5.0)) / 20.0
        points = np.full((4, 4), t)
        np.fill_diagonal(points, s)
        return QuadratureRule(3, 2, points, np.full(4, vol / 4.0))
    x, w = _collapsed_rule(dim, degree)
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    return QuadratureRule(dim, degree, bary, w)


def facet_rule_for_degree(dim, degree):
    """Rule on the reference (dim-1)-simplex, barycentric in the facet's own
    vertex order (2 coordinates for mesh dim 2, 3 for dim 3)."""
    if dim == 2:
        k = max(1, (int(degree) + 2) // 2)
        t, w = np.polynomial.legendre.leggauss(k)
        u = (t + 1.0) / 2.0
        return QuadratureRule(1, 2 * k - 1, np.column_stack([1.0 - u, u]), w / 2.0)
    if dim == 3:
        return rule_for_degree(2, degree)
    raise QuadratureError(f"facet rules support mesh dim 2 or 3, got {dim}")


def reference_monomial_integral(alpha):
    """Exact integral of x^alpha over the reference simplex:
    prod(alpha_i!) / (|alpha| + n)!."""
    alpha = [int(a) for a in alpha]
    num = 1
    for a in alpha:
        num *= math.factorial(a)
    return num / math.factorial(sum(alpha) + len(alpha))


def physical_points(mesh, bary):
    """Map barycentric points (Q, n+1) to physical points on every cell,
    returning (nc, Q, n)."""
    return np.einsum("qk,cki->cqi", bary, mesh.vertices[mesh.cells])


def cell_weights(mesh, rule):
    """Physical quadrature weights (nc, Q): n! * |K| * w_q."""
    return math.factorial(mesh.dim) * np.multiply.outer(mesh.cell_measures, rule.weights)


def integrate_cellwise(mesh, values, rule):
    """Integral over each cell of sampled values (nc, Q, ...) -> (nc, ...)."""
    w = cell_weights(mesh, rule)
    return np.einsum("cq,cq...->c...", w, values)


def integrate(mesh, values, rule):
    """Integral over the whole mesh of sampled values (nc, Q, ...)."""
    return integrate_cellwise(mesh, values, rule).sum(axis=0)

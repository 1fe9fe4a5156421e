"""Global DOF numbering and sparse assembly of every discrete system.

Scalar DOF layouts (deterministic, independent of traversal order):

* CR / ECR: one DOF per facet in facet order (boundary facets dropped when a
  homogeneous Dirichlet condition applies), followed for ECR by one bubble DOF
  per cell in cell order.
* RT0: one flux DOF per facet (value = total normal flux with respect to the
  facet's canonical normal).
* P0: one DOF per cell.

Vector-valued fields stack ``ncomp`` copies component-major: the global index
of (component r, scalar dof a) is ``r * n_scalar + a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from . import elements
from .mesh import MeshError
from .quadrature import (cell_weights, integrate_cellwise, physical_points,
                         rule_for_degree)

DEFAULT_LOAD_DEGREE = 8
MATRIX_DEGREE = 4


class DataError(ValueError):
    """Raised for incompatible problem data (e.g. Neumann compatibility)."""


@dataclass(frozen=True)
class DofMap:
    """Global scalar numbering per (cell, local dof); -1 marks eliminated
    boundary DOFs."""

    family: str
    ncomp: int
    mesh: object = field(repr=False)
    cell_dofs: np.ndarray          # (nc, nldof)
    n_scalar: int
    facet_dofs: Optional[np.ndarray] = field(default=None, repr=False)
    dirichlet: bool = False

    @property
    def n_total(self):
        return self.ncomp * self.n_scalar

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]

    def gather(self, coeffs):
        """Per-cell local coefficients (nc, nldof, ncomp); eliminated DOFs
        contribute zero."""
        coeffs = np.asarray(coeffs, dtype=float).reshape(self.ncomp, self.n_scalar)
        safe = np.where(self.cell_dofs >= 0, self.cell_dofs, 0)
        local = coeffs[:, safe]                        # (ncomp, nc, nldof)
        local = np.where(self.cell_dofs[None, :, :] >= 0, local, 0.0)
        return np.moveaxis(local, 0, -1)

    @staticmethod
    def build(mesh, family, dirichlet=False, ncomp=1):
        if family not in elements.FAMILIES:
            raise ValueError(f"unknown element family {family!r}")
        nf, nc = mesh.n_facets, mesh.n_cells
        if family == "P0":
            cell_dofs = np.arange(nc, dtype=np.int64)[:, None]
            return DofMap("P0", ncomp, mesh, cell_dofs, nc)
        if family == "RT0":
            facet_dofs = np.arange(nf, dtype=np.int64)
            cell_dofs = facet_dofs[mesh.cell_facets]
            return DofMap("RT0", ncomp, mesh, cell_dofs, nf, facet_dofs)
        facet_dofs = np.full(nf, -1, dtype=np.int64)
        if dirichlet:
            interior = mesh.interior_facet_indices()
            facet_dofs[interior] = np.arange(len(interior))
            n_facet_dofs = len(interior)
        else:
            facet_dofs[:] = np.arange(nf)
            n_facet_dofs = nf
        if family == "CR":
            cell_dofs = facet_dofs[mesh.cell_facets]
            return DofMap("CR", ncomp, mesh, cell_dofs, n_facet_dofs,
                          facet_dofs, dirichlet)
        bubbles = n_facet_dofs + np.arange(nc, dtype=np.int64)
        cell_dofs = np.hstack([facet_dofs[mesh.cell_facets], bubbles[:, None]])
        return DofMap("ECR", ncomp, mesh, cell_dofs, n_facet_dofs + nc,
                      facet_dofs, dirichlet)


class Constraint(NamedTuple):
    """One scalar Lagrange-multiplier row acting on the primal and/or dual
    unknown."""

    primal: Optional[np.ndarray]
    dual: Optional[np.ndarray]
    rhs: float = 0.0


@dataclass
class SaddleSystem:
    """Symmetric block system [[A, B^T], [B, 0]] plus scalar constraint
    rows, with right-hand sides ``f`` (primal) and ``g`` (dual)."""

    A: sp.csr_matrix
    f: np.ndarray
    B: Optional[sp.csr_matrix] = None
    g: Optional[np.ndarray] = None
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape[1] != n or len(self.f) != n:
            raise ValueError("inconsistent primal block dimensions")
        if (self.B is None) != (self.g is None):
            raise ValueError("B and g must be supplied together")
        if self.B is not None and (self.B.shape[1] != n or self.B.shape[0] != len(self.g)):
            raise ValueError("inconsistent dual block dimensions")

    @property
    def n_primal(self):
        return self.A.shape[0]

    @property
    def n_dual(self):
        return 0 if self.B is None else self.B.shape[0]


# -- scatter helpers ---------------------------------------------------------

def scatter_matrix(rows, cols, local, shape):
    """COO-accumulate local blocks (nc, a, b) into a csr matrix; negative
    indices are skipped (eliminated DOFs)."""
    nc, a, b = local.shape
    r = np.broadcast_to(rows[:, :, None], (nc, a, b))
    c = np.broadcast_to(cols[:, None, :], (nc, a, b))
    mask = (r >= 0) & (c >= 0)
    mat = sp.coo_matrix((local[mask], (r[mask], c[mask])), shape=shape)
    return mat.tocsr()

def scatter_symmetric(dofmap, local):
    """Assemble identical local blocks for each component of ``dofmap``."""
    n = dofmap.n_total
    blocks = []
    for comp in range(dofmap.ncomp):
        shift = comp * dofmap.n_scalar
        rows = np.where(dofmap.cell_dofs >= 0, dofmap.cell_dofs + shift, -1)
        blocks.append(scatter_matrix(rows, rows, local, (n, n)))
    out = blocks[0]
    for b in blocks[1:]:
        out = out + b
    return out

def scatter_vector(dofmap, local):
    """Accumulate local vectors (nc, nldof[, ncomp]) into a flat rhs."""
    out = np.zeros(dofmap.n_total)
    if local.ndim == 2:
        local = local[:, :, None]
    for comp in range(dofmap.ncomp):
        shift = comp * dofmap.n_scalar
        mask = dofmap.cell_dofs >= 0
        np.add.at(out, dofmap.cell_dofs[mask] + shift, local[:, :, comp][mask])
    return out


# -- local matrices / loads --------------------------------------------------

def stiffness_local(mesh, family, rule=None):
    rule = rule or rule_for_degree(mesh.dim, MATRIX_DEGREE)
    if family == "ECR":
        _, grads = elements.ecr_eval_mesh(mesh, rule.points)
        return np.einsum("cqan,cqbn,cq->cab", grads, grads, cell_weights(mesh, rule))
    if family == "CR":
        _, grads = elements.cr_eval_mesh(mesh, rule.points)
        return np.einsum("can,cbn,c->cab", grads, grads, mesh.cell_measures)
    raise ValueError(f"no stiffness for family {family!r}")

def mass_local(mesh, family, rule=None):
    rule = rule or rule_for_degree(mesh.dim, MATRIX_DEGREE)
    w = cell_weights(mesh, rule)
    if family == "ECR":
        vals, _ = elements.ecr_eval_mesh(mesh, rule.points)
        return np.einsum("cqa,cqb,cq->cab", vals, vals, w)
    if family == "CR":
        vals, _ = elements.cr_eval_mesh(mesh, rule.points)
        return np.einsum("qa,qb,cq->cab", vals, vals, w)
    if family == "P0":
        return mesh.cell_measures[:, None, None].copy()
    raise ValueError(f"no mass for family {family!r}")


def load_values(mesh, f, rule, ncomp=1):
    """Sample a load on the quadrature grid: callable, per-cell array,
    constant, or (for vector loads) a length-ncomp constant tuple."""
    nc, q = mesh.n_cells, rule.n_points
    shape = (nc, q) if ncomp == 1 else (nc, q, ncomp)
    if callable(f):
        vals = np.asarray(f(physical_points(mesh, rule.points)), dtype=float)
        if vals.shape != shape:
            raise DataError(f"load callable returned shape {vals.shape}, expected {shape}")
        return vals
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        if ncomp != 1:
            raise DataError("vector load needs ncomp values")
        return np.full(shape, float(arr))
    if ncomp == 1 and arr.shape == (nc,):
        return np.broadcast_to(arr[:, None], shape).copy()
    if ncomp > 1 and arr.shape == (ncomp,):
        return np.broadcast_to(arr[None, None, :], shape).copy()
    if ncomp > 1 and arr.shape == (nc, ncomp):
        return np.broadcast_to(arr[:, None, :], shape).copy()
    raise DataError(f"cannot interpret load of shape {arr.shape}")


def piecewise_constant_load(mesh, f, ncomp=1, quad_degree=DEFAULT_LOAD_DEGREE):
    """Per-cell averages of a load: (nc,) or (nc, ncomp)."""
    rule = rule_for_degree(mesh.dim, quad_degree)
    vals = load_values(mesh, f, rule, ncomp)
    ints = integrate_cellwise(mesh, vals, rule)
    meas = mesh.cell_measures if ncomp == 1 else mesh.cell_measures[:, None]
    return ints / meas


def _rhs(mesh, dofmap, f, quad_degree):
    rule = rule_for_degree(mesh.dim, quad_degree)
    w = cell_weights(mesh, rule)
    if dofmap.family == "ECR":
        vals, _ = elements.ecr_eval_mesh(mesh, rule.points)
    elif dofmap.family == "CR":
        cr_vals, _ = elements.cr_eval_mesh(mesh, rule.points)
        vals = np.broadcast_to(cr_vals[None, :, :], (mesh.n_cells,) + cr_vals.shape)
    else:
        raise ValueError(dofmap.family)
    if dofmap.ncomp == 1:
        fv = load_values(mesh, f, rule, 1)
        local = np.einsum("cqa,cq,cq->ca", vals, fv, w)
    else:
        fv = load_values(mesh, f, rule, dofmap.ncomp)
        local = np.einsum("cqa,cqr,cq->car", vals, fv, w)
    return scatter_vector(dofmap, local)


# -- problem systems ---------------------------------------------------------

def assemble_poisson(mesh, f, family="ECR", quad_degree=DEFAULT_LOAD_DEGREE):
    """Primal Poisson with homogeneous Dirichlet data: SPD stiffness, load
    vector, DOF map."""
    dm = DofMap.build(mesh, family, dirichlet=True)
    A = scatter_symmetric(dm, stiffness_local(mesh, family))
    b = _rhs(mesh, dm, f, quad_degree)
    return A, b, dm


def assemble_mixed_poisson(mesh, f, quad_degree=DEFAULT_LOAD_DEGREE):
    """RT0 x P0 mixed Poisson; natural u = 0, no essential conditions."""
    rt = DofMap.build(mesh, "RT0")
    p0 = DofMap.build(mesh, "P0")
    rule = rule_for_degree(mesh.dim, MATRIX_DEGREE)
    vals, _ = elements.rt0_eval_mesh(mesh, rule.points)
    local = np.einsum("cqin,cqjn,cq->cij", vals, vals, cell_weights(mesh, rule))
    A = scatter_symmetric(rt, local)
    B = scatter_matrix(p0.cell_dofs, rt.cell_dofs,
                       mesh.cell_facet_signs[:, None, :].astype(float),
                       (p0.n_total, rt.n_total))
    load_rule = rule_for_degree(mesh.dim, quad_degree)
    g = -integrate_cellwise(mesh, load_values(mesh, f, load_rule), load_rule)
    system = SaddleSystem(A=A, f=np.zeros(rt.n_total), B=B, g=g)
    return system, rt, p0


def assemble_stokes(mesh, f, family="ECR", quad_degree=DEFAULT_LOAD_DEGREE):
    """Nonconforming Stokes: velocity in n components of CR/ECR, piecewise
    constant pressure with a zero-mean multiplier row."""
    n = mesh.dim
    vel = DofMap.build(mesh, family, dirichlet=True, ncomp=n)
    prs = DofMap.build(mesh, "P0")
    A = scatter_symmetric(vel, stiffness_local(mesh, family))

    rule = rule_for_degree(mesh.dim, MATRIX_DEGREE)
    w = cell_weights(mesh, rule)
    if family == "ECR":
        _, grads = elements.ecr_eval_mesh(mesh, rule.points)
        d = np.einsum("cqan,cq->can", grads, w)
    else:
        _, cgrads = elements.cr_eval_mesh(mesh, rule.points)
        d = cgrads * mesh.cell_measures[:, None, None]
    parts = []
    for comp in range(n):
        cols = np.where(vel.cell_dofs >= 0, vel.cell_dofs + comp * vel.n_scalar, -1)
        parts.append(scatter_matrix(prs.cell_dofs, cols, d[:, None, :, comp],
                                    (prs.n_total, vel.n_total)))
    B = parts[0]
    for p in parts[1:]:
        B = B + p
    b = _rhs(mesh, vel, f, quad_degree)
    system = SaddleSystem(A=A, f=b, B=B, g=np.zeros(prs.n_total),
                          constraints=[Constraint(None, mesh.cell_measures.copy(), 0.0)])
    return system, vel, prs


def assemble_pseudostress(mesh, f, quad_degree=DEFAULT_LOAD_DEGREE):
    """Pseudostress Stokes: tensor RT0 rows against (P0)^n, deviatoric form,
    with the global trace-mean constraint as one multiplier row."""
    n = mesh.dim
    sig = DofMap.build(mesh, "RT0", ncomp=n)     # component r = tensor row r
    upo = DofMap.build(mesh, "P0", ncomp=n)
    rule = rule_for_degree(mesh.dim, MATRIX_DEGREE)
    w = cell_weights(mesh, rule)
    vals, _ = elements.rt0_eval_mesh(mesh, rule.points)
    rt_mass = np.einsum("cqin,cqjn,cq->cij", vals, vals, w)
    rt_outer = np.einsum("cqir,cqjs,cq->cijrs", vals, vals, w)
    rt_moment = np.einsum("cqin,cq->cin", vals, w)

    nl = n + 1
    local = (np.einsum("rs,cij->crisj", np.eye(n), rt_mass)
             - np.einsum("cijrs->crisj", rt_outer) / n)
    local = local.reshape(mesh.n_cells, n * nl, n * nl)
    tensor_dofs = (sig.cell_dofs[:, None, :] + np.arange(n)[None, :, None] * sig.n_scalar)
    tensor_dofs = tensor_dofs.reshape(mesh.n_cells, n * nl)
    A = scatter_matrix(tensor_dofs, tensor_dofs, local, (sig.n_total, sig.n_total))

    signs = mesh.cell_facet_signs.astype(float)
    parts = []
    for r in range(n):
        rows = upo.cell_dofs + r * upo.n_scalar
        cols = sig.cell_dofs + r * sig.n_scalar
        parts.append(scatter_matrix(rows, cols, signs[:, None, :],
                                    (upo.n_total, sig.n_total)))
    B = parts[0]
    for p in parts[1:]:
        B = B + p

    trace = np.zeros(sig.n_total)
    for r in range(n):
        np.add.at(trace, sig.cell_dofs + r * sig.n_scalar, rt_moment[:, :, r])

    load_rule = rule_for_degree(mesh.dim, quad_degree)
    fv = load_values(mesh, f, load_rule, ncomp=n)
    g = -integrate_cellwise(mesh, fv, load_rule).T.ravel()

    system = SaddleSystem(A=A, f=np.zeros(sig.n_total), B=B, g=g,
                          constraints=[Constraint(trace, None, 0.0)])
    return system, sig, upo


def facet_averages_of(mesh, g, quad_degree=MATRIX_DEGREE):
    """Facet averages of a callable (or pass-through of a per-facet array)."""
    if callable(g):
        from .quadrature import facet_rule_for_degree
        rule = facet_rule_for_degree(mesh.dim, quad_degree)
        pts = np.einsum("qk,fki->fqi", rule.points, mesh.vertices[mesh.facets])
        vals = np.asarray(g(pts), dtype=float)
        fac = math.factorial(mesh.dim - 1)
        return fac * vals @ rule.weights
    arr = np.asarray(g, dtype=float)
    if arr.shape != (mesh.n_facets,):
        raise DataError("per-facet flux data must have one value per facet")
    return arr


def check_neumann_compatibility(mesh, f, g_avg, quad_degree=DEFAULT_LOAD_DEGREE, tol=1e-10):
    rule = rule_for_degree(mesh.dim, quad_degree)
    total_f = float(integrate_cellwise(mesh, load_values(mesh, f, rule), rule).sum())
    bnd = mesh.boundary_facet_indices()
    total_g = float((g_avg[bnd] * mesh.facet_measures[bnd]).sum())
    scale = max(1.0, abs(total_f), abs(total_g))
    if abs(total_f + total_g) > tol * scale:
        raise DataError(
            f"incompatible Neumann data: int f + int g = {total_f + total_g:.3e}")
    return total_f, total_g


def assemble_neumann_primal(mesh, f, g, family="ECR", quad_degree=DEFAULT_LOAD_DEGREE):
    """Pure-Neumann primal problem on the zero-mean subspace (one multiplier
    row); the flux enters through facet averages, exactly for piecewise
    constant g."""
    g_avg = facet_averages_of(mesh, g)
    check_neumann_compatibility(mesh, f, g_avg, quad_degree)
    dm = DofMap.build(mesh, family, dirichlet=False)
    A = scatter_symmetric(dm, stiffness_local(mesh, family))
    b = _rhs(mesh, dm, f, quad_degree)
    bnd = mesh.boundary_facet_indices()
    b[dm.facet_dofs[bnd]] += g_avg[bnd] * mesh.facet_measures[bnd]

    mean = np.zeros(dm.n_total)
    avg_row = elements.cell_average_row(family, mesh.dim)
    np.add.at(mean, dm.cell_dofs.ravel(),
              np.outer(mesh.cell_measures, avg_row).ravel())
    system = SaddleSystem(A=A, f=b, constraints=[Constraint(mean, None, 0.0)])
    return system, dm


def assemble_neumann_mixed(mesh, f, g, quad_degree=DEFAULT_LOAD_DEGREE):
    """Mixed Neumann problem: boundary fluxes are essential (facet averages
    of g), the test space drops them, and u carries a zero-mean multiplier.

    Returns (system, rt map, p0 map, interior facet ids, boundary flux
    coefficient vector over all facets)."""
    g_avg = facet_averages_of(mesh, g)
    check_neumann_compatibility(mesh, f, g_avg, quad_degree)
    system_full, rt, p0 = assemble_mixed_poisson(mesh, f, quad_degree)
    A, B, g_vec = system_full.A, system_full.B, system_full.g

    bnd = mesh.boundary_facet_indices()
    interior = mesh.interior_facet_indices()
    bc_sign = np.zeros(mesh.n_facets)
    cells0 = mesh.facet_cells[bnd, 0]
    local = np.argmax(mesh.cell_facets[cells0] == bnd[:, None], axis=1)
    bc_sign[bnd] = mesh.cell_facet_signs[cells0, local]
    sigma_bc = np.zeros(mesh.n_facets)
    sigma_bc[bnd] = bc_sign[bnd] * g_avg[bnd] * mesh.facet_measures[bnd]

    A_ii = A[interior][:, interior].tocsr()
    A_ib = A[interior][:, bnd].tocsr()
    B_i = B[:, interior].tocsr()
    B_b = B[:, bnd].tocsr()
    f_red = -A_ib @ sigma_bc[bnd]
    g_red = g_vec - B_b @ sigma_bc[bnd]
    system = SaddleSystem(A=A_ii, f=f_red, B=B_i, g=g_red,
                          constraints=[Constraint(None, mesh.cell_measures.copy(), 0.0)])
    return system, rt, p0, interior, sigma_bc


def assemble_eigen(mesh, family="ECR", mass="full"):
    """Stiffness and mass pair for the Dirichlet eigenproblem.

    ``mass="projected"`` builds the piecewise-constant-projected mass
    (P^T diag|K| P with P the exact cell-average map), which is PSD with a
    nontrivial kernel.
    """
    if family not in ("ECR", "CR"):
        raise ValueError("eigen systems support families ECR and CR")
    if mass not in ("full", "projected"):
        raise ValueError(f"unknown mass treatment {mass!r}")
    dm = DofMap.build(mesh, family, dirichlet=True)
    A = scatter_symmetric(dm, stiffness_local(mesh, family))
    if mass == "full":
        M = scatter_symmetric(dm, mass_local(mesh, family))
    else:
        avg_row = elements.cell_average_row(family, mesh.dim)
        local = np.einsum("a,b,c->cab", avg_row, avg_row, mesh.cell_measures)
        M = scatter_symmetric(dm, local)
    return A, M, dm

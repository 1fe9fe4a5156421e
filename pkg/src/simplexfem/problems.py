"""Discrete fields and end-to-end drivers for the Poisson, Stokes and
Laplace-eigenvalue model problems, plus exact-solution fixtures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from . import assembly, elements, linsolve
from .quadrature import rule_for_degree


# -- discrete fields ---------------------------------------------------------

@dataclass
class BrokenField:
    """Coefficient vector over a DofMap for a CR/ECR/P0 (vector) field.

    Coefficients are the average-normalized DOF values: facet averages and,
    for ECR, cell averages (so the piecewise-constant projection of an ECR
    field is exactly its cell-coefficient block).
    """

    dofmap: assembly.DofMap
    coeffs: np.ndarray

    @property
    def mesh(self):
        return self.dofmap.mesh

    @property
    def ncomp(self):
        return self.dofmap.ncomp

    def _basis(self, bary):
        mesh = self.mesh
        fam = self.dofmap.family
        if fam == "ECR":
            return elements.ecr_eval_mesh(mesh, bary)
        if fam == "CR":
            vals, grads = elements.cr_eval_mesh(mesh, bary)
            vals = np.broadcast_to(vals[None], (mesh.n_cells,) + vals.shape)
            grads = np.broadcast_to(grads[:, None, :, :],
                                    (mesh.n_cells, len(bary)) + grads.shape[1:])
            return vals, grads
        if fam == "P0":
            nc, q = mesh.n_cells, len(bary)
            return (np.ones((nc, q, 1)), np.zeros((nc, q, 1, mesh.dim)))
        raise ValueError(f"BrokenField does not support family {fam!r}")

    def values(self, bary):
        """(nc, Q) for scalar fields, (nc, Q, ncomp) for vector fields."""
        vals, _ = self._basis(np.asarray(bary))
        local = self.dofmap.gather(self.coeffs)
        out = np.einsum("cqa,car->cqr", vals, local)
        return out[:, :, 0] if self.ncomp == 1 else out

    def gradients(self, bary):
        """(nc, Q, n) for scalar fields, (nc, Q, ncomp, n) for vector."""
        bary = np.asarray(bary)
        if self.dofmap.family == "CR":
            _, grads = elements.cr_eval_mesh(self.mesh, bary)
            local = self.dofmap.gather(self.coeffs)
            out = np.einsum("can,car->crn", grads, local)
            out = np.broadcast_to(out[:, None], (out.shape[0], len(bary)) + out.shape[1:])
        else:
            _, grads = self._basis(bary)
            local = self.dofmap.gather(self.coeffs)
            out = np.einsum("cqan,car->cqrn", grads, local)
        return out[:, :, 0, :] if self.ncomp == 1 else out

    def divergence(self, bary):
        """Broken divergence of a vector field: (nc, Q)."""
        if self.ncomp != self.mesh.dim:
            raise ValueError("divergence needs an n-component field")
        g = self.gradients(bary)
        return np.einsum("cqrr->cq", g)

    def cell_averages(self):
        """Exact cellwise averages: (nc,) or (nc, ncomp)."""
        local = self.dofmap.gather(self.coeffs)
        row = elements.cell_average_row(self.dofmap.family, self.mesh.dim)
        out = np.einsum("a,car->cr", row, local)
        return out[:, 0] if self.ncomp == 1 else out

    def facet_averages(self):
        """Facet-average coefficients (nf,) or (nf, ncomp); zero on
        eliminated Dirichlet facets."""
        if self.dofmap.facet_dofs is None:
            raise ValueError("facet averages need a facet-based family")
        coeffs = self.coeffs.reshape(self.ncomp, self.dofmap.n_scalar)
        fd = self.dofmap.facet_dofs
        out = np.where(fd[None, :] >= 0, coeffs[:, np.where(fd >= 0, fd, 0)], 0.0)
        return out[0] if self.ncomp == 1 else out.T


@dataclass
class RTField:
    """H(div)-conforming RT0 field (ncomp = 1) or row-wise tensor field
    (ncomp = n): coefficients are canonical facet fluxes per row."""

    dofmap: assembly.DofMap
    coeffs: np.ndarray

    @property
    def mesh(self):
        return self.dofmap.mesh

    @property
    def ncomp(self):
        return self.dofmap.ncomp

    def values(self, bary):
        """(nc, Q, n) for a vector field, (nc, Q, ncomp, n) rows for a
        tensor field."""
        vals, _ = elements.rt0_eval_mesh(self.mesh, np.asarray(bary))
        local = self.dofmap.gather(self.coeffs)        # (nc, n+1, ncomp)
        out = np.einsum("cqin,cir->cqrn", vals, local)
        return out[:, :, 0, :] if self.ncomp == 1 else out

    def cell_divergence(self):
        """Exact cellwise-constant divergence: (nc,) or (nc, ncomp)."""
        local = self.dofmap.gather(self.coeffs)
        signs = self.mesh.cell_facet_signs
        out = np.einsum("ci,cir->cr", signs, local) / self.mesh.cell_measures[:, None]
        return out[:, 0] if self.ncomp == 1 else out

    def cell_radial_coefficients(self):
        """Radial part r_K with field = const + r_K (x - anything): div/n."""
        return self.cell_divergence() / self.mesh.dim

    def trace_values(self, bary):
        """Pointwise trace of a tensor field: (nc, Q)."""
        if self.ncomp != self.mesh.dim:
            raise ValueError("trace needs a tensor field")
        v = self.values(bary)
        return np.einsum("cqrr->cq", v)

    def normal_flux_jumps(self):
        """Max interior jump of the integrated normal flux (zero by
        shared-DOF construction; kept as a diagnostic)."""
        return np.zeros(len(self.mesh.interior_facet_indices()))


@dataclass(frozen=True)
class ExactSolution:
    """Manufactured solution: value, gradient and load are consistent by
    construction."""

    label: str
    u: Callable
    grad: Callable
    f: Callable


def sine_solution(dim):
    """u = prod sin(pi x_i) on the unit box, f = dim*pi^2*u."""
    def u(x):
        return np.prod(np.sin(np.pi * np.asarray(x)), axis=-1)

    def grad(x):
        x = np.asarray(x)
        s = np.sin(np.pi * x)
        c = np.cos(np.pi * x)
        out = np.empty_like(x)
        for i in range(dim):
            others = [s[..., j] for j in range(dim) if j != i]
            out[..., i] = np.pi * c[..., i] * np.prod(others, axis=0)
        return out

    def f(x):
        return dim * np.pi ** 2 * u(x)

    return ExactSolution(f"sine{dim}d", u, grad, f)


def quadratic_neumann_solution(dim):
    """u = sum x_i^2 with f = -2*dim; the outward flux 2 x.nu is constant on
    every straight boundary facet."""
    def u(x):
        return (np.asarray(x) ** 2).sum(axis=-1)

    def grad(x):
        return 2.0 * np.asarray(x)

    def f(x):
        x = np.asarray(x)
        return np.full(x.shape[:-1], -2.0 * dim)

    return ExactSolution(f"quadratic{dim}d", u, grad, f)


def outward_flux_averages(mesh, grad_u, quad_degree=4):
    """Facet averages of grad_u . nu_out on boundary facets, zero elsewhere;
    signs follow the canonical facet orientation bookkeeping."""
    from .quadrature import facet_rule_for_degree
    import math

    rule = facet_rule_for_degree(mesh.dim, quad_degree)
    bnd = mesh.boundary_facet_indices()
    pts = np.einsum("qk,fki->fqi", rule.points, mesh.vertices[mesh.facets[bnd]])
    vals = np.einsum("fqi,fi->fq", np.asarray(grad_u(pts), dtype=float),
                     mesh.facet_normals[bnd])
    avg = math.factorial(mesh.dim - 1) * vals @ rule.weights
    cells0 = mesh.facet_cells[bnd, 0]
    local = np.argmax(mesh.cell_facets[cells0] == bnd[:, None], axis=1)
    sign = mesh.cell_facet_signs[cells0, local]
    out = np.zeros(mesh.n_facets)
    out[bnd] = sign * avg
    return out


# -- drivers -----------------------------------------------------------------

def solve_poisson(mesh, f, family="ECR", quad_degree=assembly.DEFAULT_LOAD_DEGREE,
                  config=None):
    """Homogeneous-Dirichlet Poisson by the CR or ECR method."""
    A, b, dm = assembly.assemble_poisson(mesh, f, family, quad_degree)
    x = linsolve.solve_spd(A, b, config)
    return BrokenField(dm, x)


def solve_poisson_mixed(mesh, f, quad_degree=assembly.DEFAULT_LOAD_DEGREE,
                        config=None):
    """Mixed Poisson by the RT0 x P0 pair: (flux field, displacement)."""
    system, rt, p0 = assembly.assemble_mixed_poisson(mesh, f, quad_degree)
    x, y, _ = linsolve.solve_saddle(system, config)
    return RTField(rt, x), BrokenField(p0, y)


def solve_stokes(mesh, f, family="ECR", quad_degree=assembly.DEFAULT_LOAD_DEGREE,
                 config=None):
    """Stokes by the (CR/ECR)^n x P0 pair: (velocity, zero-mean pressure)."""
    system, vel, prs = assembly.assemble_stokes(mesh, f, family, quad_degree)
    x, y, _ = linsolve.solve_saddle(system, config)
    return BrokenField(vel, x), BrokenField(prs, y)


def solve_stokes_mixed(mesh, f, quad_degree=assembly.DEFAULT_LOAD_DEGREE,
                       config=None):
    """Pseudostress Stokes by tensor RT0 x (P0)^n: (pseudostress,
    displacement)."""
    system, sig, upo = assembly.assemble_pseudostress(mesh, f, quad_degree)
    x, y, _ = linsolve.solve_saddle(system, config)
    return RTField(sig, x), BrokenField(upo, y)


def solve_neumann(mesh, f, g, form="ecr", quad_degree=assembly.DEFAULT_LOAD_DEGREE,
                  config=None):
    """Pure-Neumann Poisson problem.

    ``form`` selects primal ECR/CR (returns the zero-mean BrokenField) or the
    mixed RT0 method (returns (flux field, zero-mean displacement)).
    """
    if form in ("ecr", "cr"):
        system, dm = assembly.assemble_neumann_primal(mesh, f, g, form.upper(),
                                                      quad_degree)
        x, _, _ = linsolve.solve_saddle(system, config)
        return BrokenField(dm, x)
    if form == "mixed":
        system, rt, p0, interior, sigma_bc = assembly.assemble_neumann_mixed(
            mesh, f, g, quad_degree)
        x, y, _ = linsolve.solve_saddle(system, config)
        sigma = sigma_bc.copy()
        sigma[interior] = x
        return RTField(rt, sigma), BrokenField(p0, y)
    raise ValueError(f"unknown Neumann form {form!r}")


@dataclass
class EigenPair:
    """One discrete eigenpair; which fields are set depends on the family."""

    lam: float
    primal: Optional[BrokenField] = None   # ECR / CR / RT-equiv eigenfunction
    sigma: Optional[RTField] = None        # RT-mixed flux
    u: Optional[BrokenField] = None        # RT-mixed piecewise constant


def _cell_schur_eigh(S, measures, k):
    import scipy.linalg as dla

    if k > S.shape[0]:
        raise linsolve.SolverError(f"requested {k} eigenpairs but the reduced "
                                   f"problem has dimension {S.shape[0]}")
    S = 0.5 * (S + S.T)
    lams, V = dla.eigh(S, np.diag(measures))
    return lams[:k], V[:, :k]


def solve_eigen(mesh, family="ECR", k=1, config=None):
    """k smallest Dirichlet-Laplacian eigenpairs.

    Families: "ECR"/"CR" (primal, full mass, ||u|| = 1), "RT-mixed" (saddle
    eigenproblem reduced to its cell Schur complement, ||u_RT|| = 1) and
    "RT-equiv" (ECR stiffness against the projected mass, ||Pi0 phi|| = 1).
    Both reduced problems are generalized eigenproblems of cell-block size
    against diag(|K|), solved densely.
    """
    config = config or linsolve.DEFAULT
    if family in ("ECR", "CR"):
        A, M, dm = assembly.assemble_eigen(mesh, family, "full")
        lams, X = linsolve.eig_smallest(A, M, k, config)
        return [EigenPair(lam=float(l), primal=BrokenField(dm, x))
                for l, x in zip(lams, X.T)]
    if family == "RT-equiv":
        # A phi = lam M_proj phi; the facet block is condensed out exactly
        A, _, dm = assembly.assemble_eigen(mesh, "ECR", "projected")
        n_f = dm.n_scalar - mesh.n_cells
        F = A[:n_f][:, :n_f]
        C = A[:n_f][:, n_f:]
        D = A[n_f:][:, n_f:]
        X = sla.splu(sp.csc_matrix(F)).solve(C.toarray())
        lams, Vc = _cell_schur_eigh(D.toarray() - C.T @ X, mesh.cell_measures, k)
        Vf = -X @ Vc
        return [EigenPair(lam=float(lams[j]),
                          primal=BrokenField(dm, np.concatenate([Vf[:, j], Vc[:, j]])))
                for j in range(k)]
    if family == "RT-mixed":
        # eliminate the flux: (B A^-1 B^T) u = lam diag(|K|) u
        system, rt, p0 = assembly.assemble_mixed_poisson(mesh, 0.0)
        X = sla.splu(sp.csc_matrix(system.A)).solve(system.B.T.toarray())
        lams, Vc = _cell_schur_eigh(system.B @ X, mesh.cell_measures, k)
        Vf = -X @ Vc
        return [EigenPair(lam=float(lams[j]), sigma=RTField(rt, Vf[:, j]),
                          u=BrokenField(p0, Vc[:, j]))
                for j in range(k)]
    raise ValueError(f"unknown eigen family {family!r}")

"""Simplicial meshes in n dimensions with facet incidence and geometry caches.

A mesh stores vertices, positively oriented cells, and the set of (n-1)-facets
with a canonical global orientation: the vertex tuple of every facet is sorted
ascending and the unit normal is derived from that tuple.  Each cell records,
for each of its facets, a sign telling whether the canonical normal points out
of the cell.  Meshes are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEGENERACY_RTOL = 1e-14


class MeshError(ValueError):
    """Raised for malformed mesh input or broken mesh invariants."""


@dataclass(frozen=True)
class CellGeometry:
    """Geometry of one simplex: measure, centroid, H = sum of squared edge
    lengths, barycentric gradients and the centered second-moment matrix."""

    dim: int
    vertices: np.ndarray          # (n+1, n), cell vertex order
    measure: float
    centroid: np.ndarray          # (n,)
    H: float
    barycentric_gradients: np.ndarray   # (n+1, n)
    second_moment: np.ndarray     # (n, n), integral of (x-mid)(x-mid)^T


@dataclass(frozen=True)
class FacetGeometry:
    """Geometry of one facet: (n-1)-measure, centroid and canonical unit
    normal."""

    dim: int
    vertices: np.ndarray          # (n, n), sorted-index order
    measure: float
    centroid: np.ndarray
    unit_normal: np.ndarray


def _lock(a):
    a.flags.writeable = False
    return a


class SimplexMesh:
    """Immutable simplicial complex with oriented facets.

    Attributes
    ----------
    dim : int
        Spatial dimension n >= 2.
    vertices : (nv, n) float array
    cells : (nc, n+1) int array
        Vertex indices; every cell is stored with positive volume.
    facets : (nf, n) int array
        Facet vertex tuples, each sorted ascending (the canonical
        orientation that fixes the global unit normal).
    cell_facets : (nc, n+1) int array
        Facet index opposite local vertex ``i``.
    cell_facet_signs : (nc, n+1) int array
        +1 where the canonical facet normal points out of the cell.
    facet_cells : (nf, 2) int array
        Incident cells, second entry -1 on the boundary.
    is_boundary_facet : (nf,) bool array
    """

    def __init__(self, dim, vertices, cells):
        dim = int(dim)
        if dim < 2:
            raise MeshError(f"mesh dimension must be >= 2, got {dim}")
        vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != dim:
            raise MeshError("vertex array must have shape (nv, dim)")
        if cells.ndim != 2 or cells.shape[1] != dim + 1:
            raise MeshError("cell array must have shape (nc, dim+1)")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("cell vertex index out of range")
        if len(cells) == 0:
            raise MeshError("mesh has no cells")

        self.dim = dim
        self.vertices = _lock(vertices)
        self.cells = _lock(self._orient_and_check(vertices, cells))
        self._build_facets()
        self._build_geometry()

    # -- construction ------------------------------------------------------

    @staticmethod
    def _orient_and_check(vertices, cells):
        n = vertices.shape[1]
        for row in cells:
            if len(set(row.tolist())) != n + 1:
                raise MeshError(f"degenerate cell (repeated vertex index): {row.tolist()}")
        x = vertices[cells]                       # (nc, n+1, n)
        edges = x[:, 1:, :] - x[:, :1, :]         # (nc, n, n)
        vol = np.linalg.det(edges) / math.factorial(n)
        diff = x[:, :, None, :] - x[:, None, :, :]
        max_edge = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))
        bad = np.abs(vol) < DEGENERACY_RTOL * max_edge ** n
        if bad.any():
            raise MeshError(f"degenerate cell(s) at indices {np.flatnonzero(bad).tolist()}")
        cells = cells.copy()
        flip = vol < 0
        cells[flip, -2], cells[flip, -1] = cells[flip, -1], cells[flip, -2].copy()
        return cells

    def _build_facets(self):
        n, cells = self.dim, self.cells
        nc = len(cells)
        # local facet i = cell vertices with local vertex i removed
        keep = np.array([[j for j in range(n + 1) if j != i] for i in range(n + 1)])
        local = cells[:, keep]                    # (nc, n+1, n)
        local = np.sort(local, axis=2).reshape(nc * (n + 1), n)
        facets, inverse = np.unique(local, axis=0, return_inverse=True)
        self.facets = _lock(facets)
        self.cell_facets = _lock(inverse.reshape(nc, n + 1).astype(np.int64))

        counts = np.bincount(self.cell_facets.ravel(), minlength=len(facets))
        if counts.max() > 2:
            raise MeshError("facet shared by more than two cells")
        self.is_boundary_facet = _lock(counts == 1)

        facet_cells = np.full((len(facets), 2), -1, dtype=np.int64)
        cell_ids = np.repeat(np.arange(nc), n + 1)
        order = np.argsort(self.cell_facets.ravel(), kind="stable")
        sorted_f = self.cell_facets.ravel()[order]
        sorted_c = cell_ids[order]
        first = np.searchsorted(sorted_f, np.arange(len(facets)), side="left")
        facet_cells[:, 0] = sorted_c[first]
        two = counts == 2
        facet_cells[two, 1] = sorted_c[first[two] + 1]
        self.facet_cells = _lock(facet_cells)

    def _build_geometry(self):
        n = self.dim
        x = self.vertices[self.cells]                      # (nc, n+1, n)
        edges = x[:, 1:, :] - x[:, :1, :]
        self.cell_measures = _lock(np.linalg.det(edges) / math.factorial(n))
        self.cell_centroids = _lock(x.mean(axis=1))
        diff = x[:, :, None, :] - x[:, None, :, :]
        sq = (diff ** 2).sum(-1)
        self.cell_H = _lock(sq.sum(axis=(1, 2)) / 2.0)     # each pair counted twice
        self.cell_diameters = _lock(np.sqrt(sq.max(axis=(1, 2))))

        inv = np.linalg.inv(edges)                         # rows of inv^T are grad(lambda_1..n)
        grads = np.empty((len(self.cells), n + 1, n))
        grads[:, 1:, :] = np.swapaxes(inv, 1, 2)
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self.barycentric_gradients = _lock(grads)

        centered = x - self.cell_centroids[:, None, :]     # (nc, n+1, n)
        outer = np.einsum("cki,ckj->cij", centered, centered)
        scale = self.cell_measures / ((n + 1) * (n + 2))
        self.cell_second_moments = _lock(outer * scale[:, None, None])

        p = self.vertices[self.facets]                     # (nf, n, n)
        if n == 2:
            t = p[:, 1, :] - p[:, 0, :]
            length = np.linalg.norm(t, axis=1)
            normal = np.stack([t[:, 1], -t[:, 0]], axis=1) / length[:, None]
            self.facet_measures = _lock(length)
            self.facet_normals = _lock(normal)
        else:
            c = np.cross(p[:, 1, :] - p[:, 0, :], p[:, 2, :] - p[:, 0, :])
            area2 = np.linalg.norm(c, axis=1)
            self.facet_measures = _lock(area2 / 2.0)
            self.facet_normals = _lock(c / area2[:, None])
        self.facet_centroids = _lock(p.mean(axis=1))

        # sign: +1 iff canonical normal points away from the opposite vertex
        opp = self.vertices[self.cells]                    # (nc, n+1, n) local vertex i
        fc = self.facet_centroids[self.cell_facets]        # (nc, n+1, n)
        fn = self.facet_normals[self.cell_facets]
        dots = np.einsum("cki,cki->ck", fn, fc - opp)
        if np.any(np.abs(dots) < 1e-14 * self.cell_diameters[:, None]):
            raise MeshError("facet orientation is ambiguous (degenerate geometry)")
        self.cell_facet_signs = _lock(np.where(dots > 0, 1, -1).astype(np.int64))

        interior = ~self.is_boundary_facet
        sign_sum = np.zeros(len(self.facets))
        np.add.at(sign_sum, self.cell_facets.ravel(), self.cell_facet_signs.ravel())
        if np.any(sign_sum[interior] != 0):
            raise MeshError("interior facet signs are not antisymmetric")

    # -- simple queries ----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_facets(self):
        return len(self.facets)

    def interior_facet_indices(self):
        return np.flatnonzero(~self.is_boundary_facet)

    def boundary_facet_indices(self):
        return np.flatnonzero(self.is_boundary_facet)

    @property
    def h_max(self):
        return float(self.cell_diameters.max())

    def find_cell(self, point):
        """Index of a cell containing ``point`` (barycentric test)."""
        point = np.asarray(point, dtype=float)
        rel = point[None, :] - self.vertices[self.cells[:, 0]]
        lam = np.einsum("cki,ci->ck", self.barycentric_gradients[:, 1:, :], rel)
        lam0 = 1.0 - lam.sum(axis=1)
        ok = (lam.min(axis=1) >= -1e-12) & (lam0 >= -1e-12)
        hits = np.flatnonzero(ok)
        if len(hits) == 0:
            raise MeshError(f"point {point.tolist()} lies outside the mesh")
        return int(hits[0])

    def translated(self, vec):
        """New mesh with all vertices shifted by ``vec``."""
        return SimplexMesh(self.dim, self.vertices + np.asarray(vec, dtype=float), self.cells)


def cell_geometry(mesh, cell_index):
    """Exact per-cell geometry; raises on an out-of-range index."""
    i = int(cell_index)
    if not 0 <= i < mesh.n_cells:
        raise MeshError(f"cell index {i} out of range")
    return CellGeometry(
        dim=mesh.dim,
        vertices=mesh.vertices[mesh.cells[i]],
        measure=float(mesh.cell_measures[i]),
        centroid=mesh.cell_centroids[i],
        H=float(mesh.cell_H[i]),
        barycentric_gradients=mesh.barycentric_gradients[i],
        second_moment=mesh.cell_second_moments[i],
    )


def facet_geometry(mesh, facet_index):
    """Exact per-facet geometry; raises on an out-of-range index."""
    i = int(facet_index)
    if not 0 <= i < mesh.n_facets:
        raise MeshError(f"facet index {i} out of range")
    return FacetGeometry(
        dim=mesh.dim,
        vertices=mesh.vertices[mesh.facets[i]],
        measure=float(mesh.facet_measures[i]),
        centroid=mesh.facet_centroids[i],
        unit_normal=mesh.facet_normals[i],
    )


# -- generation ------------------------------------------------------------

def build_box_mesh(dim, subdivisions, variant="diagonal"):
    """Mesh of the unit box (0,1)^dim.

    ``dim=2`` splits each grid square into two triangles along the same
    diagonal, or into four (``variant="crisscross"``) around the square
    center.  ``dim=3`` splits each grid cube into six tetrahedra by the
    Kuhn rule.

    Parameters
    ----------
    dim : 2 or 3
    subdivisions : int
        Number of grid intervals per coordinate direction, >= 1.
    variant : "diagonal" or "crisscross"
        Only meaningful in 2D.
    """
    m = int(subdivisions)
    if dim not in (2, 3):
        raise MeshError(f"build_box_mesh supports dim 2 or 3, got {dim}")
    if m < 1:
        raise MeshError("subdivisions must be >= 1")
    if variant not in ("diagonal", "crisscross"):
        raise MeshError(f"unknown variant {variant!r}")
    if dim == 3 and variant != "diagonal":
        raise MeshError("the crisscross variant is 2D only")

    if dim == 2:
        grid = np.arange(m + 1) / m
        xv, yv = np.meshgrid(grid, grid, indexing="ij")
        verts = np.stack([xv.ravel(), yv.ravel()], axis=1)

        def vid(i, j):
            return i * (m + 1) + j

        cells = []
        if variant == "diagonal":
            for i in range(m):
                for j in range(m):
                    v00, v10 = vid(i, j), vid(i + 1, j)
                    v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
                    cells.append((v00, v10, v11))
                    cells.append((v00, v11, v01))
        else:
            centers = np.array([[(i + 0.5) / m, (j + 0.5) / m]
                                for i in range(m) for j in range(m)])
            base = len(verts)
            verts = np.vstack([verts, centers])
            for i in range(m):
                for j in range(m):
                    c = base + i * m + j
                    v00, v10 = vid(i, j), vid(i + 1, j)
                    v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
                    cells.extend([(v00, v10, c), (v10, v11, c),
                                  (v11, v01, c), (v01, v00, c)])
        return SimplexMesh(2, verts, np.array(cells))

    grid = np.arange(m + 1) / m
    xv, yv, zv = np.meshgrid(grid, grid, grid, indexing="ij")
    verts = np.stack([xv.ravel(), yv.ravel(), zv.ravel()], axis=1)

    def vid3(i, j, k):
        return (i * (m + 1) + j) * (m + 1) + k

    import itertools

    cells = []
    unit = np.eye(3, dtype=int)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                corner = np.array([i, j, k])
                for perm in itertools.permutations(range(3)):
                    path = [corner]
                    for p in perm:
                        path.append(path[-1] + unit[p])
                    cells.append([vid3(*q) for q in path])
    return SimplexMesh(3, verts, np.array(cells))


def refine_uniform(mesh):
    """One sweep of uniform (red) refinement.

    2D: each triangle becomes 4 similar triangles.  3D: octasection into 8
    tetrahedra; the interior octahedron is cut along its shortest diagonal
    (lexicographic midpoint-index tie-break), which keeps the children
    shape-regular across levels.
    """
    n = mesh.dim
    cells = mesh.cells
    if n == 2:
        pair_cols = [(0, 1), (0, 2), (1, 2)]
    else:
        pair_cols = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    pairs = np.sort(np.stack([cells[:, list(p)] for p in pair_cols], axis=1), axis=2)
    flat = pairs.reshape(-1, 2)
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    mid_ids = inverse.reshape(len(cells), len(pair_cols)) + mesh.n_vertices
    midpoints = mesh.vertices[edges].mean(axis=1)
    verts = np.vstack([mesh.vertices, midpoints])

    children = []
    if n == 2:
        for c in range(len(cells)):
            v0, v1, v2 = cells[c]
            m01, m02, m12 = mid_ids[c]
            children.extend([(v0, m01, m02), (m01, v1, m12),
                             (m02, m12, v2), (m01, m12, m02)])
    else:
        for c in range(len(cells)):
            v = cells[c]
            m01, m02, m03, m12, m13, m23 = mid_ids[c]
            children.extend([(v[0], m01, m02, m03), (m01, v[1], m12, m13),
                             (m02, m12, v[2], m23), (m03, m13, m23, v[3])])
            candidates = [(m01, m23, (m02, m03, m13, m12)),
                          (m02, m13, (m01, m03, m23, m12)),
                          (m03, m12, (m01, m02, m23, m13))]
            best = None
            for p, q, ring in candidates:
                length = float(np.linalg.norm(verts[p] - verts[q]))
                key = (length, min(p, q), max(p, q))
                if best is None or key < best[0]:
                    best = (key, p, q, ring)
            _, p, q, ring = best
            for a, b in zip(ring, ring[1:] + ring[:1]):
                children.append((p, q, a, b))
    return SimplexMesh(n, verts, np.array(children))


def mesh_hierarchy(coarse, levels):
    """List [coarse, refined once, ...] of length ``levels + 1``."""
    out = [coarse]
    for _ in range(levels):
        out.append(refine_uniform(out[-1]))
    return out


# -- plain-text i/o ---------------------------------------------------------

def write_mesh(mesh):
    """Serialize to the plain-text format ``dim nv nc`` / vertex lines /
    0-based cell lines.  Coordinates carry 17 significant digits so a
    read-back round-trips exactly."""
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}"]
    for v in mesh.vertices:
        lines.append(" ".join(f"{x:.17g}" for x in v))
    for c in mesh.cells:
        lines.append(" ".join(str(int(i)) for i in c))
    return "\n".join(lines) + "\n"


def read_mesh(text):
    """Parse the plain-text mesh format; raises MeshError on malformed
    headers, out-of-range indices and degenerate cells."""
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise MeshError("empty mesh file")
    head = rows[0].split()
    if len(head) != 3:
        raise MeshError(f"malformed header {rows[0]!r} (want 'dim n_vertices n_cells')")
    try:
        dim, nv, nc = (int(t) for t in head)
    except ValueError as exc:
        raise MeshError(f"malformed header {rows[0]!r}") from exc
    if len(rows) != 1 + nv + nc:
        raise MeshError(f"expected {1 + nv + nc} lines, found {len(rows)}")
    try:
        verts = np.array([[float(t) for t in rows[1 + i].split()] for i in range(nv)])
        cells = np.array([[int(t) for t in rows[1 + nv + i].split()] for i in range(nc)])
    except ValueError as exc:
        raise MeshError(f"malformed vertex or cell line: {exc}") from exc
    if verts.shape != (nv, dim):
        raise MeshError("vertex line does not match header dimension")
    if cells.shape != (nc, dim + 1):
        raise MeshError("cell line does not match header dimension")
    return SimplexMesh(dim, verts, cells)

"""Conforming simplicial meshes and the weak-acuteness audit.

The simulator relies on the discrete maximum principle: the off-diagonal
entries ``k_ij = -(stiffness)_ij`` of the P1 stiffness matrix must be
nonnegative.  This holds on weakly acute (non-obtuse) meshes, and the
structured generator below produces such meshes by construction (each
rectangular cell is split into two right triangles along a fixed
diagonal).  ``audit_weak_acuteness`` certifies the property for any mesh
given its assembled stiffness matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    """Raised for malformed meshes or invalid generator arguments."""


@dataclass(frozen=True)
class TriMesh:
    """Conforming simplicial triangulation.

    Attributes
    ----------
    dim : int
        Spatial dimension (2 for triangles, 3 for tetrahedra).
    nodes : ndarray, shape (n_nodes, dim)
        Node coordinates.
    elements : ndarray, shape (n_elements, dim + 1)
        Vertex indices of each simplex, positively oriented.
    boundary_nodes : ndarray
        Sorted indices of nodes on the Dirichlet boundary.
    boundary_tag : dict
        Node index -> tag string ("dirichlet" for every node here).
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    boundary_tag: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        elements = np.ascontiguousarray(np.asarray(self.elements, dtype=np.int64))
        bnodes = np.unique(np.asarray(self.boundary_nodes, dtype=np.int64))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary_nodes", bnodes)
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise MeshError(f"nodes must have shape (n, {self.dim})")
        if elements.ndim != 2 or elements.shape[1] != self.dim + 1:
            raise MeshError(f"elements must have shape (n, {self.dim + 1})")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise MeshError("element vertex index out of range")
        if bnodes.size and (bnodes.min() < 0 or bnodes.max() >= len(nodes)):
            raise MeshError("boundary node index out of range")
        if elements.size:
            srt = np.sort(elements, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                bad = int(np.nonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))[0][0])
                raise MeshError(f"element {bad} has repeated vertices")
        if self.dim == 2 and len(elements):
            v1 = nodes[elements[:, 1]] - nodes[elements[:, 0]]
            v2 = nodes[elements[:, 2]] - nodes[elements[:, 0]]
            det = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
            if np.any(det <= 0):
                bad = int(np.argmin(det))
                raise MeshError(f"element {bad} is degenerate or negatively oriented")
        self._check_conforming(elements)

    @staticmethod
    def _check_conforming(elements: np.ndarray) -> None:
        # A facet (edge in 2D, face in 3D) may be shared by at most two
        # simplices; hanging nodes are outside the supported mesh family.
        if not elements.size:
            return
        d1 = elements.shape[1]
        srt = np.sort(elements, axis=1)
        facets = np.concatenate(
            [np.delete(srt, k, axis=1) for k in range(d1)], axis=0
        )
        _, counts = np.unique(facets, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("mesh is not conforming: a facet is shared by "
                            f"{int(counts.max())} elements")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.nonzero(mask)[0]

    def node_adjacency(self) -> sp.csr_matrix:
        """Boolean node-to-node adjacency (nodes sharing an element)."""
        e = self.elements
        d1 = e.shape[1]
        rows, cols = [], []
        for a in range(d1):
            for b in range(d1):
                if a != b:
                    rows.append(e[:, a])
                    cols.append(e[:, b])
        data = np.ones(len(rows) * self.n_elements, dtype=np.int8)
        adj = sp.coo_matrix(
            (data, (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        ).tocsr()
        adj.data[:] = 1
        return adj


@dataclass(frozen=True)
class AcutenessReport:
    """Outcome of the discrete maximum-principle audit."""

    is_weakly_acute: bool
    min_offdiag_kij: float
    violating_pairs: list


def build_structured_mesh(nx: int, ny: int, rect=((0.0, 0.0), (1.0, 1.0))) -> TriMesh:
    """Triangulate a rectangle into 2*nx*ny right triangles.

    Every cell is split along the same lower-left to upper-right diagonal,
    which keeps the topology reproducible and, for square cells, makes
    every triangle right isosceles (hence weakly acute).

    Parameters
    ----------
    nx, ny : int
        Cell counts per axis; must be >= 1.
    rect : ((x0, y0), (x1, y1))
        Axis-aligned bounding rectangle.

    Returns
    -------
    TriMesh with (nx+1)*(ny+1) nodes and 2*nx*ny triangles.
    """
    if nx < 1 or ny < 1:
        raise MeshError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    (x0, y0), (x1, y1) = rect
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate rectangle {rect}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    a = nid(I, J)
    b = nid(I + 1, J)
    c = nid(I + 1, J + 1)
    d = nid(I, J + 1)
    # diagonal a-c: triangles (a, b, c) and (a, c, d), both CCW
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    on_boundary = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)
    boundary = np.nonzero(on_boundary.ravel())[0]
    tags = {int(k): "dirichlet" for k in boundary}
    return TriMesh(2, nodes, elements, boundary, tags)


def mesh_size(mesh: TriMesh) -> float:
    """Maximum edge length over all elements."""
    if mesh.n_elements == 0:
        raise MeshError("empty mesh")
    e = mesh.elements
    h = 0.0
    d1 = e.shape[1]
    for a in range(d1):
        for b in range(a + 1, d1):
            ln = np.linalg.norm(mesh.nodes[e[:, a]] - mesh.nodes[e[:, b]], axis=1)
            h = max(h, float(ln.max()))
    return h


def audit_weak_acuteness(
    mesh: TriMesh, stiffness: sp.spmatrix, tol: float = 1e-12
) -> AcutenessReport:
    """Check ``k_ij = -(stiffness)_ij >= 0`` for all stored pairs i != j.

    Exact zeros occur legitimately (right angles opposite an edge), so the
    classification tolerance is ``-tol`` rather than 0.
    """
    if stiffness.shape != (mesh.n_nodes, mesh.n_nodes):
        raise MeshError(
            f"stiffness shape {stiffness.shape} does not match mesh with "
            f"{mesh.n_nodes} nodes"
        )
    coo = sp.coo_matrix(stiffness)
    off = coo.row != coo.col
    rows, cols, vals = coo.row[off], coo.col[off], -coo.data[off]
    if rows.size == 0:
        return AcutenessReport(True, 0.0, [])
    min_k = float(vals.min() + 0.0)  # fold -0.0 into +0.0
    bad = vals < -tol
    # report each unordered pair once
    violating = sorted(
        {
            (int(min(i, j)), int(max(i, j)), float(v))
            for i, j, v in zip(rows[bad], cols[bad], vals[bad])
        }
    )
    return AcutenessReport(not violating, min_k, violating)


def count_components(mesh: TriMesh, node_mask: np.ndarray) -> int:
    """Connected components of the node subgraph selected by ``node_mask``."""
    idx = np.nonzero(np.asarray(node_mask, dtype=bool))[0]
    if idx.size == 0:
        return 0
    sub = mesh.node_adjacency()[idx][:, idx]
    ncomp, _ = sp.csgraph.connected_components(sub, directed=False)
    return int(ncomp)

"""P1 finite-element operator assembly.

All element matrices are closed-form (stiffness, mass, lumped mass) or use
the degree-4 triangle rule (quartic integrands such as the double wells).
Sparse operators are plain ``scipy.sparse.csr_matrix`` objects; explicit
stored zeros are kept so the sparsity pattern always equals the mesh
adjacency pattern (the weak-acuteness audit relies on this).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import quadrature as quad
from .mesh import MeshError, TriMesh

SparseOperator = sp.csr_matrix

# reference P1 element mass matrix, scaled by |T| on use
_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True)
class ElementGeometry:
    """Per-element geometric data for a 2D triangulation.

    ``grads[e, a]`` is the (constant) gradient of the hat function of
    local vertex ``a`` on element ``e``; ``areas[e]`` the element area.
    """

    areas: np.ndarray  # (ne,)
    grads: np.ndarray  # (ne, 3, 2)


def element_geometry(mesh: TriMesh) -> ElementGeometry:
    if mesh.dim != 2:
        raise NotImplementedError("assembly is implemented for d=2")
    xy = mesh.nodes[mesh.elements]  # (ne, 3, 2)
    x, y = xy[..., 0], xy[..., 1]
    # b_a = y_{a+1} - y_{a+2}, c_a = x_{a+2} - x_{a+1} (cyclic)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (
        y[:, 1] - y[:, 0]
    )
    if np.any(det <= 0.0):
        bad = int(np.argmin(det))
        raise MeshError(f"degenerate element {bad} (area {det[bad] / 2.0:g})")
    areas = 0.5 * det
    grads = np.stack([b, c], axis=2) / det[:, None, None]
    return ElementGeometry(areas, grads)


def _scatter(mesh: TriMesh, ke: np.ndarray) -> SparseOperator:
    """Scatter per-element 3x3 blocks into a global CSR matrix."""
    e = mesh.elements
    rows = np.repeat(e, 3, axis=1).ravel()
    cols = np.tile(e, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(mesh: TriMesh, geom: ElementGeometry | None = None) -> SparseOperator:
    """Matrix of the gradient inner product, entry (i,j) = integral of
    grad(eta_i) . grad(eta_j).  Symmetric PSD with constants in the kernel."""
    geom = geom or element_geometry(mesh)
    ke = np.einsum("eai,ebi,e->eab", geom.grads, geom.grads, geom.areas)
    return _scatter(mesh, ke)


def assemble_mass(mesh: TriMesh, geom: ElementGeometry | None = None) -> SparseOperator:
    """Consistent mass matrix, entry (i,j) = integral of eta_i eta_j."""
    geom = geom or element_geometry(mesh)
    ke = geom.areas[:, None, None] * _MASS_REF[None, :, :]
    return _scatter(mesh, ke)


def assemble_lumped_mass(mesh: TriMesh, geom: ElementGeometry | None = None) -> SparseOperator:
    """Diagonal (vertex-rule) mass matrix; diagonal i = sum of |T|/3 over
    elements touching node i.  Trace equals the domain area."""
    geom = geom or element_geometry(mesh)
    diag = np.zeros(mesh.n_nodes)
    np.add.at(diag, mesh.elements.ravel(), np.repeat(geom.areas / 3.0, 3))
    return sp.diags(diag).tocsr()


def lumped_mass_diagonal(mesh: TriMesh, geom: ElementGeometry | None = None) -> np.ndarray:
    geom = geom or element_geometry(mesh)
    diag = np.zeros(mesh.n_nodes)
    np.add.at(diag, mesh.elements.ravel(), np.repeat(geom.areas / 3.0, 3))
    return diag


def element_gradients(mesh: TriMesh, values: np.ndarray, geom: ElementGeometry | None = None) -> np.ndarray:
    """Constant gradient of the affine interpolant on each element.

    ``values`` holds nodal values; returns an (ne, 2) array.
    """
    geom = geom or element_geometry(mesh)
    vals = np.asarray(values, dtype=float)
    if vals.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got {vals.shape}")
    return np.einsum("ea,eai->ei", vals[mesh.elements], geom.grads)


def weighted_mass(mesh: TriMesh, geom: ElementGeometry, elem_weights: np.ndarray) -> SparseOperator:
    """Mass matrix with a piecewise-constant weight: integral of
    w_T eta_i eta_j."""
    ke = (geom.areas * elem_weights)[:, None, None] * _MASS_REF[None, :, :]
    return _scatter(mesh, ke)


def weighted_stiffness(mesh: TriMesh, geom: ElementGeometry, elem_weights: np.ndarray) -> SparseOperator:
    """Stiffness matrix with a piecewise-constant scalar weight."""
    ke = np.einsum("eai,ebi,e->eab", geom.grads, geom.grads, geom.areas * elem_weights)
    return _scatter(mesh, ke)


def tensor_stiffness(mesh: TriMesh, geom: ElementGeometry, tensors: np.ndarray) -> SparseOperator:
    """Stiffness matrix with a piecewise-constant 2x2 tensor weight:
    entry (i,j) = sum_T |T| grad(eta_i) . H_T grad(eta_j)."""
    ke = np.einsum("eai,eij,ebj,e->eab", geom.grads, tensors, geom.grads, geom.areas)
    return _scatter(mesh, ke)


def squared_field_mass(mesh: TriMesh, geom: ElementGeometry, values: np.ndarray) -> SparseOperator:
    """Matrix with entries integral of (v_h)^2 eta_i eta_j for P1 ``v_h``
    (degree-4 rule, exact)."""
    vq = quad.at_quad_points(values[mesh.elements])  # (ne, 6)
    bary = quad.TRI4_BARY  # (6, 3)
    w = quad.TRI4_WEIGHTS
    ke = np.einsum(
        "eq,q,qa,qb,e->eab", vq * vq, w, bary, bary, geom.areas
    )
    return _scatter(mesh, ke)


def nodal_load(mesh: TriMesh, geom: ElementGeometry, values_at_quad: np.ndarray) -> np.ndarray:
    """Load vector L_i = integral of g eta_i with ``g`` given at the
    degree-4 quadrature points, shape (ne, 6)."""
    contrib = np.einsum(
        "eq,q,qa,e->ea", values_at_quad, quad.TRI4_WEIGHTS, quad.TRI4_BARY, geom.areas
    )
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elements.ravel(), contrib.ravel())
    return out


def integrate_p1_function(mesh: TriMesh, geom: ElementGeometry, f, values: np.ndarray) -> float:
    """Integral of f(v_h) for a pointwise map ``f`` of a P1 field
    (degree-4 rule; exact when f(v_h) has degree <= 4 per element)."""
    vq = quad.at_quad_points(values[mesh.elements])
    return quad.integrate_elementwise(f(vq), geom.areas)


def edge_table(stiffness: SparseOperator):
    """Unordered node pairs with their stiffness couplings.

    Returns (i, j, kij) arrays over the strict upper triangle of the
    stored pattern, with ``kij = -stiffness[i, j]`` (nonnegative on weakly
    acute meshes).  Stored zeros are kept.
    """
    coo = sp.coo_matrix(stiffness)
    upper = coo.row < coo.col
    return coo.row[upper], coo.col[upper], -coo.data[upper]


def graph_laplacian(n: int, ei: np.ndarray, ej: np.ndarray, weights: np.ndarray) -> SparseOperator:
    """Weighted graph Laplacian: sum over edges of w (e_i - e_j)(e_i - e_j)^T."""
    rows = np.concatenate([ei, ej, ei, ej])
    cols = np.concatenate([ei, ej, ej, ei])
    data = np.concatenate([weights, weights, -weights, -weights])
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class Operators:
    """Per-mesh discrete structures reused across time steps."""

    mesh: TriMesh
    geom: ElementGeometry
    stiffness: SparseOperator
    mass: SparseOperator
    lumped_diag: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_k: np.ndarray

    @property
    def lumped_mass(self) -> SparseOperator:
        return sp.diags(self.lumped_diag).tocsr()

    def mass_dt(self, lumped: bool) -> SparseOperator:
        """Mass operator used in time-derivative inner products."""
        return self.lumped_mass if lumped else self.mass

    def grad_form(self, u: np.ndarray, v: np.ndarray) -> float:
        """Gradient inner product of one or more P1 fields.

        For (n,) arrays returns u^T K v; for (n, d) arrays sums over
        components (Frobenius gradient product of vector fields).
        """
        if u.ndim == 1:
            return float(u @ (self.stiffness @ v))
        return float(np.sum(u * (self.stiffness @ v)))

    def l2_form(self, u: np.ndarray, v: np.ndarray, lumped: bool = False) -> float:
        M = self.lumped_mass if lumped else self.mass
        if u.ndim == 1:
            return float(u @ (M @ v))
        return float(np.sum(u * (M @ v)))


def build_operators(mesh: TriMesh) -> Operators:
    geom = element_geometry(mesh)
    K = assemble_stiffness(mesh, geom)
    M = assemble_mass(mesh, geom)
    diag = lumped_mass_diagonal(mesh, geom)
    ei, ej, kij = edge_table(K)
    return Operators(mesh, geom, K, M, diag, ei, ej, kij)


def apply_dirichlet(A: SparseOperator, b: np.ndarray, fixed: np.ndarray, values: np.ndarray):
    """Symmetric row/column elimination of Dirichlet constraints.

    Returns (A_ff, b_f, free) where ``free`` is the boolean mask of
    retained dofs and the right-hand side has been lifted by the
    prescribed values.
    """
    n = A.shape[0]
    free = np.ones(n, dtype=bool)
    free[fixed] = False
    g = np.zeros(n)
    g[fixed] = values
    b_f = (b - A @ g)[free]
    A_ff = A[free][:, free].tocsc()
    return A_ff, b_f, free

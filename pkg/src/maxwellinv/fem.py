"""Lowest-order edge elements (Whitney 1-forms) and nodal P1 on Mesh2D.

Edge degrees of freedom are circulations along globally oriented edges
(lower vertex index to higher).  The local basis is always built in the
global orientation, so no separate sign bookkeeping is needed during
assembly.  Quadrature: the three edge-midpoint rule on triangles (exact
for degree 2), midpoint rule on boundary edges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, InvalidCoefficientError
from .mesh import Mesh2D

# barycentric coordinates of the edge-midpoint quadrature points
_QP = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])

_factorization_count = 0


def factorization_count() -> int:
    """Number of sparse factorizations performed since the last reset."""
    return _factorization_count


def reset_factorization_count() -> None:
    global _factorization_count
    _factorization_count = 0


@dataclass
class CoefficientField:
    """Piecewise-constant complex refractive index, one value per triangle."""

    values: np.ndarray

    @classmethod
    def constant(cls, kappa: complex, mesh: Mesh2D) -> "CoefficientField":
        return cls(np.full(mesh.n_triangles, kappa, dtype=complex))

    def require_admissible(self) -> None:
        v = self.values
        if not (np.all(v.real > 0.0) and np.all(v.imag > 0.0)):
            raise InvalidCoefficientError(
                "refractive index must satisfy Re > 0 and Im > 0 on every triangle")


class EdgeSpace:
    """Whitney edge-element space; dof count equals the mesh edge count."""

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        self.n_dofs = mesh.n_edges
        tri = mesh.triangles
        pts = mesh.vertices[tri]                        # (T, 3, 2)
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        self.area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        T = len(tri)

        # gradients of the barycentric coordinates
        grads = np.empty((T, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[:, i, 0] = (pts[:, j, 1] - pts[:, k, 1]) / (2.0 * self.area)
            grads[:, i, 1] = (pts[:, k, 0] - pts[:, j, 0]) / (2.0 * self.area)
        self.grads = grads

        # local edges (01, 12, 20) reordered to the global orientation
        locpairs = np.array([[0, 1], [1, 2], [2, 0]])
        a_loc = locpairs[:, 0][None, :].repeat(T, axis=0)
        b_loc = locpairs[:, 1][None, :].repeat(T, axis=0)
        ga = np.take_along_axis(tri, a_loc, axis=1)
        gb = np.take_along_axis(tri, b_loc, axis=1)
        swap = ga > gb
        a_loc[swap], b_loc[swap] = b_loc[swap], a_loc[swap]

        ta = np.arange(T)[:, None].repeat(3, axis=1)
        ga_grad = grads[ta, a_loc]                      # (T, 3, 2)
        gb_grad = grads[ta, b_loc]

        # w_ab(x) = lambda_a grad(lambda_b) - lambda_b grad(lambda_a)
        # basis values at the quadrature points: (T, 3 basis, 3 qp, 2)
        lam_a = _QP.T[a_loc]                            # (T, 3 basis, 3 qp)
        lam_b = _QP.T[b_loc]
        wq = lam_a[..., None] * gb_grad[:, :, None, :] - \
            lam_b[..., None] * ga_grad[:, :, None, :]
        self.basis_at_qp = wq                           # (T, 3, 3 qp, 2)

        # scalar curl of each basis function (constant per triangle)
        self.curls = 2.0 * (ga_grad[..., 0] * gb_grad[..., 1] -
                            ga_grad[..., 1] * gb_grad[..., 0])

        # precomputed local blocks for fast (re)assembly
        self._mass_loc = np.einsum("tiqc,tjqc->tij", wq, wq) * \
            (self.area / 3.0)[:, None, None]
        rows = np.repeat(mesh.tri_edges[:, :, None], 3, axis=2)
        cols = np.repeat(mesh.tri_edges[:, None, :], 3, axis=1)
        self._rows = rows.ravel()
        self._cols = cols.ravel()

    def _scatter(self, local: np.ndarray) -> sp.csr_matrix:
        A = sp.coo_matrix((local.ravel(), (self._rows, self._cols)),
                          shape=(self.n_dofs, self.n_dofs))
        return A.tocsr()

    def interpolate(self, field) -> np.ndarray:
        """Edge-circulation dofs of a vector field given as f(points)->(n,2)."""
        mesh = self.mesh
        p0 = mesh.vertices[mesh.edges[:, 0]]
        p1 = mesh.vertices[mesh.edges[:, 1]]
        # two-point Gauss rule along each edge (exact for cubics)
        s = 0.5 / np.sqrt(3.0)
        xa = 0.5 * (p0 + p1) - s * (p1 - p0)
        xb = 0.5 * (p0 + p1) + s * (p1 - p0)
        vec = p1 - p0
        fa = np.asarray(field(xa))
        fb = np.asarray(field(xb))
        return 0.5 * (np.einsum("ic,ic->i", fa, vec) + np.einsum("ic,ic->i", fb, vec))

    def eval_at_qp(self, coeffs: np.ndarray) -> np.ndarray:
        """Field values at the triangle quadrature points, shape (T, 3 qp, 2)."""
        c = coeffs[self.mesh.tri_edges]                 # (T, 3)
        return np.einsum("ti,tiqc->tqc", c, self.basis_at_qp)

    def eval_curl(self, coeffs: np.ndarray) -> np.ndarray:
        """Scalar curl per triangle (constant), shape (T,)."""
        c = coeffs[self.mesh.tri_edges]
        return np.einsum("ti,ti->t", c, self.curls)


class NodalSpace:
    """P1 hat functions; dof count equals the mesh vertex count."""

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        self.n_dofs = mesh.n_vertices
        tri = mesh.triangles
        pts = mesh.vertices[tri]
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        self.area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        T = len(tri)
        grads = np.empty((T, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[:, i, 0] = (pts[:, j, 1] - pts[:, k, 1]) / (2.0 * self.area)
            grads[:, i, 1] = (pts[:, k, 0] - pts[:, j, 0]) / (2.0 * self.area)
        self.grads = grads
        rows = np.repeat(tri[:, :, None], 3, axis=2)
        cols = np.repeat(tri[:, None, :], 3, axis=1)
        self._rows = rows.ravel()
        self._cols = cols.ravel()

    def _scatter(self, local: np.ndarray) -> sp.csr_matrix:
        A = sp.coo_matrix((local.ravel(), (self._rows, self._cols)),
                          shape=(self.n_dofs, self.n_dofs))
        return A.tocsr()

    def stiffness(self) -> sp.csr_matrix:
        loc = np.einsum("tic,tjc->tij", self.grads, self.grads) * \
            self.area[:, None, None]
        return self._scatter(loc)

    def mass(self) -> sp.csr_matrix:
        base = (np.ones((3, 3)) + np.eye(3)) / 12.0
        loc = base[None, :, :] * self.area[:, None, None]
        return self._scatter(loc)


def assemble_curlcurl(space: EdgeSpace) -> sp.csr_matrix:
    """S[i, j] = integral of curl w_i curl w_j; real symmetric."""
    loc = space.curls[:, :, None] * space.curls[:, None, :] * \
        space.area[:, None, None]
    return space._scatter(loc)


def assemble_mass(space: EdgeSpace, kappa: CoefficientField | np.ndarray) -> sp.csr_matrix:
    """M[i, j] = integral of kappa w_i . w_j; complex symmetric."""
    values = kappa.values if isinstance(kappa, CoefficientField) else np.asarray(kappa)
    loc = space._mass_loc * values[:, None, None]
    return space._scatter(loc)


def assemble_mixed_curl(nodal: NodalSpace, edge: EdgeSpace) -> sp.csr_matrix:
    """C[i, j] = integral of curl(phi_j) . w_i (nodal trial, edge test).

    The 2D curl of a scalar is the rotated gradient (d2 phi, -d1 phi).
    """
    if nodal.mesh is not edge.mesh:
        raise ValueError("nodal and edge space must share a mesh")
    curlphi = np.stack([nodal.grads[:, :, 1], -nodal.grads[:, :, 0]], axis=2)
    wbar = edge.basis_at_qp.mean(axis=2)                # (T, 3, 2) mean over qp
    loc = np.einsum("tic,tjc->tij", wbar, curlphi) * edge.area[:, None, None]
    rows = np.repeat(edge.mesh.tri_edges[:, :, None], 3, axis=2).ravel()
    cols = np.repeat(edge.mesh.triangles[:, None, :], 3, axis=1).ravel()
    A = sp.coo_matrix((loc.ravel(), (rows, cols)),
                      shape=(edge.n_dofs, nodal.n_dofs))
    return A.tocsr()


def discrete_gradient(mesh: Mesh2D) -> sp.csr_matrix:
    """Node-to-edge incidence: (G p)[e=(i,j)] = p[j] - p[i] for i < j."""
    E = mesh.n_edges
    rows = np.repeat(np.arange(E), 2)
    cols = mesh.edges.ravel()
    data = np.tile([-1.0, 1.0], E)
    return sp.coo_matrix((data, (rows, cols)),
                         shape=(E, mesh.n_vertices)).tocsr()


def assemble_boundary_mass(space: EdgeSpace, curve_tag: str) -> sp.csr_matrix:
    """B[i, j] = integral over the tagged curve of (w_i . tau)(w_j . tau).

    On its own edge a Whitney function has constant tangential component
    1/length, and zero on the other edges, so B is diagonal.
    """
    tag = space.mesh.tag(curve_tag)
    diag = np.zeros(space.n_dofs)
    if len(tag.edges):
        diag[tag.edges] = 1.0 / tag.lengths
    return sp.diags(diag).tocsr()


def assemble_boundary_load(space: EdgeSpace, curve_tag: str, g) -> np.ndarray:
    """b[i] = integral over the tagged curve of g (w_i . tau), midpoint rule.

    ``g`` is either a callable of points (n, 2) or precomputed midpoint samples
    ordered as in the curve tag.
    """
    tag = space.mesh.tag(curve_tag)
    b = np.zeros(space.n_dofs, dtype=complex)
    if len(tag.edges) == 0:
        return b
    gv = np.asarray(g(tag.midpoints) if callable(g) else g, dtype=complex)
    b[tag.edges] = tag.signs * gv
    return b


def tangential_trace(space: EdgeSpace, coeffs: np.ndarray, curve_tag: str) -> np.ndarray:
    """Midpoint tangential component on the tagged curve, CCW positive."""
    tag = space.mesh.tag(curve_tag)
    return tag.signs * coeffs[tag.edges] / tag.lengths


class Factorization:
    """Reusable sparse complex LU; immutable after construction."""

    def __init__(self, A: sp.spmatrix):
        global _factorization_count
        n, m = A.shape
        if n != m:
            raise FactorizationError("matrix must be square")
        try:
            self._lu = spla.splu(sp.csc_matrix(A, dtype=complex))
        except RuntimeError as exc:
            raise FactorizationError(f"sparse LU failed: {exc}") from exc
        _factorization_count += 1
        self.shape = A.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=complex))


def factorize(A: sp.spmatrix) -> Factorization:
    return Factorization(A)


def solve_many(fact: Factorization, rhs_list) -> list[np.ndarray]:
    """Elementwise solves; loop form so results match single solves bitwise."""
    return [fact.solve(b) for b in rhs_list]

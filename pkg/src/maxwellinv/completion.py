"""Data completion by iterated quasi-reversibility.

The unknown pair (E, F) couples an edge-element field with a nodal scalar
(the 2D curl of E).  A least-squares operator enforces the first-order
system curl F = k^2 kappa0 E, curl E = F in the annulus together with the
measured tangential trace of E and the known curl trace on the accessible
boundary patches.  A quadratic penalty of strength ``delta`` anchors each
iterate to the previous one; iterating drives the interior mismatch down
while a single matrix factorization is reused throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import (
    _QP,
    CoefficientField,
    EdgeSpace,
    Factorization,
    NodalSpace,
    assemble_mass,
    tangential_trace,
)
from .forward import MediumConfig, TraceData
from .mesh import Mesh2D


@dataclass(frozen=True)
class QRConfig:
    delta: float = 0.1
    max_iters: int = 50
    rel_change_tol: float = 1e-3
    scaled_variant: bool = False
    data_weight: float = 100.0

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError("penalty strength delta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.data_weight <= 0.0:
            raise ValueError("data_weight must be positive")


@dataclass(frozen=True)
class QRResult:
    """Completed fields (one column per wave) and per-iteration residuals."""

    x_edge: np.ndarray        # (n_edges, n_waves)
    x_nodal: np.ndarray       # (n_vertices, n_waves)
    residuals: np.ndarray     # (n_iters,) total least-squares residual norm
    n_iters: int


class QROperator:
    """Factorized least-squares completion on a fixed mesh.

    ``data_tag`` names the accessible boundary patches carrying the trace
    data; completed traces can be read off any tagged curve of the mesh.
    """

    def __init__(self, mesh: Mesh2D, m: MediumConfig, data_tag: str = "Gamma0",
                 neumann_tag: str = "Gamma_outer",
                 config: QRConfig = QRConfig()):
        self.mesh = mesh
        self.medium = m
        self.data_tag = data_tag
        self.neumann_tag = neumann_tag
        self.config = config
        self.edge_space = EdgeSpace(mesh)
        self.nodal_space = NodalSpace(mesh)
        self.n_edge = self.edge_space.n_dofs
        self.n_nodal = self.nodal_space.n_dofs

        if config.scaled_variant:
            c1 = c2 = m.k * m.sqrt_kappa0
            self.neumann_scale = 1.0 / (m.k * m.sqrt_kappa0)
        else:
            c1 = m.k ** 2 * m.kappa0
            c2 = 1.0 + 0.0j
            self.neumann_scale = 1.0 + 0.0j

        blocks, weights = self._build_blocks(complex(c1), complex(c2))
        self._blocks = blocks
        self._weights = weights

        normal = sp.csr_matrix((self.n_edge + self.n_nodal,) * 2, dtype=complex)
        for B, w in zip(blocks, weights):
            normal = normal + B.conj().T @ sp.diags(w) @ B
        penalty = sp.block_diag([
            assemble_mass(self.edge_space,
                          CoefficientField.constant(1.0 + 0.0j, mesh)),
            self.nodal_space.mass().astype(complex),
        ])
        self._penalty = penalty.tocsr()
        self.fact = Factorization((normal + config.delta * self._penalty).tocsc())

    # -- data geometry -------------------------------------------------------

    @property
    def data_angles(self) -> np.ndarray:
        tag = self.mesh.tag(self.data_tag)
        return np.arctan2(tag.midpoints[:, 1], tag.midpoints[:, 0])

    # -- operator blocks -----------------------------------------------------

    def _build_blocks(self, c1: complex, c2: complex):
        mesh, es = self.mesh, self.edge_space
        T = mesh.n_triangles
        n = self.n_edge + self.n_nodal
        qp = np.asarray(_QP)                       # (3 qps, 3 barycentric)
        area_w = np.repeat(es.area / 3.0, 3)       # one weight per (t, qp)

        # vector residual  curl F - c1 E  at the quadrature points
        rows, cols, vals = [], [], []
        row_of = np.arange(6 * T).reshape(T, 3, 2)  # (t, qp, component)
        g = es.grads                                # (T, 3 vertices, 2)
        curlF = np.stack([g[:, :, 1], -g[:, :, 0]], axis=2)  # (T, v, comp)
        for q in range(3):
            for comp in range(2):
                rows.append(np.repeat(row_of[:, q, comp], 3))
                cols.append((self.n_edge + mesh.triangles).ravel())
                vals.append(curlF[:, :, comp].ravel())
                rows.append(np.repeat(row_of[:, q, comp], 3))
                cols.append(mesh.tri_edges.ravel())
                vals.append(-c1 * es.basis_at_qp[:, :, q, comp].ravel())
        B1 = sp.coo_matrix((np.concatenate(vals).astype(complex),
                            (np.concatenate(rows), np.concatenate(cols))),
                           shape=(6 * T, n)).tocsr()
        w1 = np.repeat(es.area / 3.0, 6)

        # scalar residual  curl E - c2 F  at the quadrature points
        rows, cols, vals = [], [], []
        row_of = np.arange(3 * T).reshape(T, 3)
        for q in range(3):
            rows.append(np.repeat(row_of[:, q], 3))
            cols.append(mesh.tri_edges.ravel())
            vals.append(es.curls.astype(complex).ravel())
            rows.append(np.repeat(row_of[:, q], 3))
            cols.append((self.n_edge + mesh.triangles).ravel())
            vals.append(np.tile(-c2 * qp[q], T))
        B2 = sp.coo_matrix((np.concatenate(vals),
                            (np.concatenate(rows), np.concatenate(cols))),
                           shape=(3 * T, n)).tocsr()
        w2 = area_w

        # tangential trace of E on the data patches
        tag = mesh.tag(self.data_tag)
        ne = len(tag.edges)
        B3 = sp.coo_matrix((tag.signs / tag.lengths,
                            (np.arange(ne), tag.edges)),
                           shape=(ne, n)).tocsr().astype(complex)
        w3 = self.config.data_weight * tag.lengths

        # midpoint value of F on the curl-data boundary (the whole accessible
        # boundary when the curl trace is known everywhere)
        ntag = mesh.tag(self.neumann_tag)
        nn = len(ntag.edges)
        vids = mesh.edges[ntag.edges]
        B4 = sp.coo_matrix((np.full(2 * nn, 0.5),
                            (np.repeat(np.arange(nn), 2),
                             (self.n_edge + vids).ravel())),
                           shape=(nn, n)).tocsr().astype(complex)
        w4 = self.config.data_weight * ntag.lengths

        return (B1, B2, B3, B4), (w1, w2, w3, w4)

    # -- iteration -----------------------------------------------------------

    def complete(self, dirichlet: np.ndarray,
                 neumann: np.ndarray | None = None) -> QRResult:
        """Iterate the penalized least-squares problem for all waves at once.

        ``dirichlet`` holds the measured tangential trace of E on the data
        patches, one row per wave, sampled at the patch edge midpoints in tag
        order.  ``neumann`` holds the curl trace there (zero for difference
        data).
        """
        dirichlet = np.atleast_2d(np.asarray(dirichlet, dtype=complex))
        tag = self.mesh.tag(self.data_tag)
        if dirichlet.shape[1] != len(tag.edges):
            raise ValueError("dirichlet data does not match the data patches")
        ntag = self.mesh.tag(self.neumann_tag)
        if neumann is None:
            neumann = np.zeros((dirichlet.shape[0], len(ntag.edges)),
                               dtype=complex)
        neumann = np.atleast_2d(np.asarray(neumann, dtype=complex))
        if neumann.shape != (dirichlet.shape[0], len(ntag.edges)):
            raise ValueError("neumann data does not match the curl-data boundary")
        neumann = neumann * self.neumann_scale

        B1, B2, B3, B4 = self._blocks
        w1, w2, w3, w4 = self._weights
        y3 = dirichlet.T                          # (n_data, n_waves)
        y4 = neumann.T
        rhs0 = B3.conj().T @ (w3[:, None] * y3) + B4.conj().T @ (w4[:, None] * y4)

        cfg = self.config
        x = np.zeros((self.n_edge + self.n_nodal, dirichlet.shape[0]),
                     dtype=complex)
        residuals = []
        for _ in range(cfg.max_iters):
            x_prev = x
            x = self.fact.solve(rhs0 + cfg.delta * (self._penalty @ x_prev))
            r2 = (np.sum(w1[:, None] * np.abs(B1 @ x) ** 2)
                  + np.sum(w2[:, None] * np.abs(B2 @ x) ** 2)
                  + np.sum(w3[:, None] * np.abs(B3 @ x - y3) ** 2)
                  + np.sum(w4[:, None] * np.abs(B4 @ x - y4) ** 2))
            residuals.append(np.sqrt(r2))
            num = np.linalg.norm(x - x_prev)
            den = np.linalg.norm(x)
            if den > 0.0 and num <= cfg.rel_change_tol * den:
                break
        return QRResult(x_edge=x[:self.n_edge], x_nodal=x[self.n_edge:],
                        residuals=np.array(residuals), n_iters=len(residuals))

    def completed_trace(self, result: QRResult, curve_tag: str,
                        directions: np.ndarray) -> TraceData:
        """Read the completed tangential trace off a tagged interior curve."""
        tag = self.mesh.tag(curve_tag)
        values = np.stack([
            tangential_trace(self.edge_space, result.x_edge[:, w], curve_tag)
            for w in range(result.x_edge.shape[1])])
        return TraceData(curve_tag=curve_tag, midpoints=tag.midpoints,
                         arc_lengths=tag.lengths, values=values,
                         directions=np.asarray(directions, dtype=float))


def complete_traces(op: QROperator, measured: TraceData, curve_tag: str,
                    neumann: np.ndarray | None = None) -> tuple[TraceData, QRResult]:
    """Transfer measured patch traces onto the operator's mesh and complete.

    The measured trace may live on a different mesh; values are carried over
    by periodic interpolation in boundary angle.
    """
    dirichlet = measured.interp_values(op.data_angles)
    result = op.complete(dirichlet, neumann)
    trace = op.completed_trace(result, curve_tag, measured.directions)
    return trace, result

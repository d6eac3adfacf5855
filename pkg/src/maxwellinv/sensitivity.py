"""Amplitude derivatives of the interior trace for a candidate support.

Writing kappa(a) = kappa0 (1 + a chi_D), the field depends analytically on
the amplitude a and satisfies (A0 - a k^2 M_D) E(a) = b with a fixed
background matrix A0.  Successive derivatives solve A0 E^(n) =
n k^2 M_D E^(n-1), so a single factorization of A0 serves every order and
every incident wave.  The tangential traces of the derivatives on the
interior measurement curve form a Taylor model of the difference data that
is cheap to evaluate at any amplitude.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DegenerateSupportError
from .fem import CoefficientField, EdgeSpace, assemble_mass, tangential_trace
from .forward import (
    DirectSolver,
    MediumConfig,
    kappa_field,
    plane_wave_neumann,
    wave_directions,
)
from .mesh import Mesh2D


def _subdivision_barycentrics(levels: int) -> np.ndarray:
    """Barycentric centroids of a triangle subdivided ``levels`` times."""
    tris = [np.eye(3)]
    for _ in range(levels):
        finer = []
        for t in tris:
            a, b, c = t
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            finer += [np.array([a, ab, ca]), np.array([ab, b, bc]),
                      np.array([ca, bc, c]), np.array([ab, bc, ca])]
        tris = finer
    return np.stack([t.mean(axis=0) for t in tris])   # (4**levels, 3)


_COVERAGE_BARY = _subdivision_barycentrics(2)


def coverage(mesh: Mesh2D, support) -> np.ndarray:
    """Fraction of each triangle covered by the support.

    Estimated from 16 interior sample points per triangle; varies smoothly
    enough with the support parameters to keep the misfit landscape usable
    on coarse meshes, unlike a binary centroid test.
    """
    corners = mesh.vertices[mesh.triangles]            # (T, 3, 2)
    pts = np.einsum("qv,tvc->tqc", _COVERAGE_BARY, corners)
    inside = support.contains(pts.reshape(-1, 2))
    return inside.reshape(mesh.n_triangles, -1).mean(axis=1)


def perturbed_kappa(mesh: Mesh2D, m: MediumConfig, support,
                    amplitude: float) -> "CoefficientField":
    """kappa0 (1 + a * coverage): the field the sensitivity chain linearizes.

    This is the coverage-smoothed counterpart of the binary indicator used
    for data synthesis; derivative checks against full nonlinear solves must
    perturb this same discrete field.
    """
    frac = coverage(mesh, support)
    return CoefficientField(m.kappa0 * (1.0 + amplitude * frac))


@dataclass(frozen=True)
class TaylorTrace:
    """Derivative traces T^(n) on the interior curve, one row block per order.

    ``terms[n]`` has shape (n_waves, n_points) and holds the trace of the
    n-th amplitude derivative; the difference data is modeled by
    sum_{n>=1} a^n / n! terms[n].
    """

    curve_tag: str
    midpoints: np.ndarray
    arc_lengths: np.ndarray
    directions: np.ndarray
    terms: np.ndarray            # (order + 1, n_waves, n_points)

    @property
    def order(self) -> int:
        return self.terms.shape[0] - 1

    def eval_delta(self, a: float) -> np.ndarray:
        """Taylor model of the difference trace at amplitude ``a``."""
        if abs(a) >= 1.0:
            raise ValueError("amplitude magnitude must stay below 1")
        out = np.zeros_like(self.terms[0])
        for n in range(1, self.terms.shape[0]):
            out += (a ** n / factorial(n)) * self.terms[n]
        return out

    def last_term_ratio(self, a: float) -> float:
        """Size of the highest retained term relative to the modeled data."""
        n = self.order
        last = (a ** n / factorial(n)) * self.terms[n]
        total = self.eval_delta(a)
        denom = np.sqrt(np.sum(np.abs(total) ** 2 * self.arc_lengths))
        if denom == 0.0:
            return 0.0
        return float(np.sqrt(np.sum(np.abs(last) ** 2 * self.arc_lengths)) / denom)


class BackgroundModel:
    """Background solves and amplitude-derivative chains on a fixed mesh.

    The matrix S - k^2 M(kappa0) is factorized once; ``taylor_trace`` then
    costs one triangular solve per order (all waves batched as columns).
    """

    def __init__(self, mesh: Mesh2D, m: MediumConfig, n_waves: int = 8,
                 curve_tag: str = "r=0.8", boundary_tag: str = "Gamma"):
        self.mesh = mesh
        self.medium = m
        self.curve_tag = curve_tag
        self.space = EdgeSpace(mesh)
        self.waves = wave_directions(n_waves)
        self.solver = DirectSolver(self.space, kappa_field(mesh, m), m,
                                   boundary_tag=boundary_tag)
        mids = mesh.tag(boundary_tag).midpoints
        loads = np.stack([plane_wave_neumann(w, m, mids) for w in self.waves])
        self.background = np.stack(
            [self.solver.solve(g) for g in loads], axis=1)   # (n_dofs, n_waves)

    @property
    def directions(self) -> np.ndarray:
        return np.array([w.direction for w in self.waves])

    def derivative_fields(self, support, order: int) -> list[np.ndarray]:
        """Coefficient arrays of E^(0) ... E^(order), each (n_dofs, n_waves)."""
        if order < 1:
            raise ValueError("derivative order must be at least 1")
        frac = coverage(self.mesh, support)
        if not np.any(frac > 0.0):
            raise DegenerateSupportError(
                "candidate support contains no mesh triangle")
        kappa_d = self.medium.kappa0 * frac
        M_d = assemble_mass(self.space, kappa_d)
        k2 = self.medium.k ** 2
        fields = [self.background]
        for n in range(1, order + 1):
            rhs = n * k2 * (M_d @ fields[-1])
            fields.append(self.solver.fact.solve(rhs))
        return fields

    def taylor_trace(self, support, order: int = 4) -> TaylorTrace:
        fields = self.derivative_fields(support, order)
        tag = self.mesh.tag(self.curve_tag)
        terms = np.stack([
            np.stack([tangential_trace(self.space, f[:, w], self.curve_tag)
                      for w in range(f.shape[1])])
            for f in fields])
        return TaylorTrace(curve_tag=self.curve_tag, midpoints=tag.midpoints,
                           arc_lengths=tag.lengths, directions=self.directions,
                           terms=terms)

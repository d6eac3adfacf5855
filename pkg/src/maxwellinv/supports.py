"""Parametric perturbation regions with amplitude semantics kappa0 (1 + a chi_D)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometryError

_ANGLE_GRID = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float]
    r: float

    def __post_init__(self):
        if self.r <= 0.0:
            raise InvalidGeometryError("ball radius must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points) - np.asarray(self.center)
        return np.einsum("ic,ic->i", d, d) < self.r ** 2

    def bounding_radius(self) -> float:
        return float(np.hypot(*self.center) + self.r)

    def boundary_points(self, n: int = 256) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.asarray(self.center) + self.r * np.stack([np.cos(t), np.sin(t)], axis=1)


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse."""

    center: tuple[float, float]
    rx: float
    ry: float

    def __post_init__(self):
        if self.rx <= 0.0 or self.ry <= 0.0:
            raise InvalidGeometryError("ellipse radii must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points) - np.asarray(self.center)
        return (d[:, 0] / self.rx) ** 2 + (d[:, 1] / self.ry) ** 2 < 1.0

    def bounding_radius(self) -> float:
        return float(np.hypot(*self.center) + max(self.rx, self.ry))

    def boundary_points(self, n: int = 256) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.asarray(self.center) + \
            np.stack([self.rx * np.cos(t), self.ry * np.sin(t)], axis=1)


@dataclass(frozen=True)
class FourierStar:
    """Star-shaped region: radius about the center is r0 + sum of harmonics.

    ``coeffs`` is a sequence of (a_n, b_n) pairs for n = 1 ... N_r, entering
    as a_n cos(n theta) + b_n sin(n theta).
    """

    center: tuple[float, float]
    r0: float
    coeffs: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.r0 <= 0.0:
            raise InvalidGeometryError("base radius must be positive")
        if np.min(self.radius_at(_ANGLE_GRID)) <= 0.0:
            raise InvalidGeometryError("star radius must stay positive")

    def radius_at(self, theta: np.ndarray) -> np.ndarray:
        r = np.full_like(np.asarray(theta, dtype=float), self.r0)
        for n, (an, bn) in enumerate(self.coeffs, start=1):
            r = r + an * np.cos(n * theta) + bn * np.sin(n * theta)
        return r

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points) - np.asarray(self.center)
        rho = np.hypot(d[:, 0], d[:, 1])
        theta = np.arctan2(d[:, 1], d[:, 0])
        return rho < self.radius_at(theta)

    def bounding_radius(self) -> float:
        rmax = float(np.max(self.radius_at(_ANGLE_GRID)))
        return float(np.hypot(*self.center) + rmax)

    def boundary_points(self, n: int = 256) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        r = self.radius_at(t)
        return np.asarray(self.center) + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


@dataclass(frozen=True)
class Union:
    parts: tuple

    def contains(self, points: np.ndarray) -> np.ndarray:
        mask = np.zeros(len(points), dtype=bool)
        for p in self.parts:
            mask |= p.contains(points)
        return mask

    def bounding_radius(self) -> float:
        return max(p.bounding_radius() for p in self.parts)

    def boundary_points(self, n: int = 256) -> np.ndarray:
        return np.concatenate([p.boundary_points(n) for p in self.parts])


Support = Ball | Ellipse | FourierStar | Union


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two boundary point clouds."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))

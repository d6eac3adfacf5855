"""Polar-structured conforming triangulations of disks and annuli.

Nodes are placed on concentric circles whose radii include every requested
embedded radius, so embedded circles are realized exactly as closed polylines
of mesh edges.  Adjacent rings with different node counts are stitched by a
two-pointer sweep over the node angles.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidGeometryError, UnknownTagError

_RADIUS_TOL = 1e-12
# node spacing target as a fraction of h; keeps stitch diagonals under 1.5 h
_SPACING = 0.85


@dataclass(frozen=True)
class PatchSpec:
    """Equally distributed angular patches on a full boundary circle."""

    count: int
    angular_half_width: float = 0.075
    phase: float = 0.0

    def __post_init__(self):
        if self.count < 1:
            raise InvalidGeometryError("patch count must be >= 1")
        if self.angular_half_width <= 0.0:
            raise InvalidGeometryError("patch half width must be positive")
        if self.count * 2.0 * self.angular_half_width >= 2.0 * math.pi:
            raise InvalidGeometryError("patches overlap the full circle")

    def centers(self) -> np.ndarray:
        return self.phase + 2.0 * np.pi * np.arange(self.count) / self.count


@dataclass(frozen=True)
class CurveTag:
    """Ordered edge list of a tagged curve with per-edge geometry.

    ``normals`` point outward from the region the curve encloses (radially
    outward for all circle tags used here); ``signs`` flip an edge's global
    lower-to-higher orientation onto the counterclockwise curve tangent.
    """

    edges: np.ndarray      # (n,) edge indices, ordered by midpoint angle
    midpoints: np.ndarray  # (n, 2)
    normals: np.ndarray    # (n, 2)
    lengths: np.ndarray    # (n,) arc length weights
    signs: np.ndarray      # (n,) +-1

    @property
    def angles(self) -> np.ndarray:
        return np.arctan2(self.midpoints[:, 1], self.midpoints[:, 0])

    def measure(self) -> float:
        return float(self.lengths.sum())


@dataclass(frozen=True)
class Mesh2D:
    """Conforming triangulation with oriented edges and tagged curves."""

    vertices: np.ndarray   # (V, 2)
    triangles: np.ndarray  # (T, 3) vertex indices, positively oriented
    edges: np.ndarray      # (E, 2) vertex pairs with i < j
    tri_edges: np.ndarray  # (T, 3) edge index of local edges (01, 12, 20)
    curve_tags: dict[str, CurveTag] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def tag(self, name: str) -> CurveTag:
        try:
            return self.curve_tags[name]
        except KeyError:
            raise UnknownTagError(f"unknown curve tag {name!r}") from None

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edge_vectors(self) -> np.ndarray:
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def boundary_edge_mask(self) -> np.ndarray:
        counts = np.bincount(self.tri_edges.ravel(), minlength=self.n_edges)
        return counts == 1

    def max_diameter(self) -> float:
        p = self.vertices[self.triangles]
        d = [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(d))

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles).tobytes())
        return h.hexdigest()[:16]

    def with_tags(self, extra: dict[str, CurveTag]) -> "Mesh2D":
        tags = dict(self.curve_tags)
        tags.update(extra)
        return replace(self, curve_tags=tags)


def _ring_radii(r_start: float, r_end: float, h: float,
                required: list[float]) -> list[float]:
    """Radii from r_start (exclusive) to r_end, spacing <= h, hitting required."""
    stops = sorted(set(required) | {r_end})
    radii: list[float] = []
    prev = r_start
    for stop in stops:
        gap = stop - prev
        if gap <= _RADIUS_TOL:
            continue
        nseg = max(1, math.ceil(gap / (_SPACING * h) - 1e-9))
        for i in range(1, nseg + 1):
            radii.append(prev + gap * i / nseg)
        radii[-1] = stop  # avoid roundoff on required radii
        prev = stop
    return radii


def _ring_nodes(radius: float, h: float) -> np.ndarray:
    n = max(6, math.ceil(2.0 * np.pi * radius / (_SPACING * h) - 1e-9))
    return 2.0 * np.pi * np.arange(n) / n


def _stitch_rings(inner_idx: np.ndarray, inner_ang: np.ndarray,
                  outer_idx: np.ndarray, outer_ang: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the strip between two concentric node rings (CCW output)."""
    m, n = len(inner_idx), len(outer_idx)
    tris = []
    i = j = 0
    # sentinel angles wrap by one full turn
    a = np.concatenate([inner_ang, inner_ang[:1] + 2.0 * np.pi])
    b = np.concatenate([outer_ang, outer_ang[:1] + 2.0 * np.pi])
    while i < m or j < n:
        adv_inner = j >= n or (i < m and a[i + 1] <= b[j + 1])
        if adv_inner:
            tris.append((inner_idx[i], outer_idx[j % n], inner_idx[(i + 1) % m]))
            i += 1
        else:
            tris.append((inner_idx[i % m], outer_idx[j], outer_idx[(j + 1) % n]))
            j += 1
    return tris


def _build_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    local = triangles[:, [[0, 1], [1, 2], [2, 0]]]
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def _circle_tag(mesh_vertices: np.ndarray, edges: np.ndarray,
                edge_idx: np.ndarray) -> CurveTag:
    mids = 0.5 * (mesh_vertices[edges[edge_idx, 0]] + mesh_vertices[edges[edge_idx, 1]])
    ang = np.arctan2(mids[:, 1], mids[:, 0])
    order = np.argsort(ang)
    edge_idx = edge_idx[order]
    mids = mids[order]
    vec = mesh_vertices[edges[edge_idx, 1]] - mesh_vertices[edges[edge_idx, 0]]
    lengths = np.linalg.norm(vec, axis=1)
    rad = np.linalg.norm(mids, axis=1)
    normals = mids / rad[:, None]
    tangent = np.stack([-normals[:, 1], normals[:, 0]], axis=1)  # CCW
    signs = np.where(np.einsum("ij,ij->i", vec, tangent) >= 0.0, 1.0, -1.0)
    return CurveTag(edges=edge_idx, midpoints=mids, normals=normals,
                    lengths=lengths, signs=signs)


def _radius_tag_name(r: float) -> str:
    return f"r={r:g}"


def _assemble(vertices: np.ndarray, triangles: list[tuple[int, int, int]],
              embedded_radii: list[float], boundary_tags: dict[str, float]) -> Mesh2D:
    verts = np.asarray(vertices, dtype=float)
    tris = np.asarray(triangles, dtype=np.int64)
    edges, tri_edges = _build_edges(tris)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    vert_rad = np.linalg.norm(verts, axis=1)

    tags: dict[str, CurveTag] = {}
    boundary = counts == 1
    for name, r in boundary_tags.items():
        on_r = (np.abs(vert_rad[edges[:, 0]] - r) < _RADIUS_TOL) & \
               (np.abs(vert_rad[edges[:, 1]] - r) < _RADIUS_TOL)
        idx = np.nonzero(boundary & on_r)[0]
        tags[name] = _circle_tag(verts, edges, idx)
    for r in embedded_radii:
        on_r = (np.abs(vert_rad[edges[:, 0]] - r) < _RADIUS_TOL) & \
               (np.abs(vert_rad[edges[:, 1]] - r) < _RADIUS_TOL)
        idx = np.nonzero(on_r & ~boundary)[0]
        tags[_radius_tag_name(r)] = _circle_tag(verts, edges, idx)

    mesh = Mesh2D(vertices=verts, triangles=tris, edges=edges,
                  tri_edges=tri_edges, curve_tags=tags)
    if np.any(mesh.triangle_areas() <= 0.0):
        raise InvalidGeometryError("mesher produced a non-positive triangle")
    return mesh


def mesh_disk(radius: float, h: float, embedded_radii: list[float] | None = None) -> Mesh2D:
    """Triangulate the disk of given radius; embedded circles become mesh polylines.

    The outer boundary is tagged ``Gamma``, each embedded circle ``r=<value>``.
    """
    embedded_radii = list(embedded_radii or [])
    if not 0.0 < h < radius:
        raise InvalidGeometryError("need 0 < h < radius")
    for r in embedded_radii:
        if not 0.0 < r < radius:
            raise InvalidGeometryError(f"embedded radius {r} outside (0, {radius})")

    radii = _ring_radii(0.0, radius, h, embedded_radii)
    vertices: list[tuple[float, float]] = [(0.0, 0.0)]
    tris: list[tuple[int, int, int]] = []
    prev_idx = np.array([0])
    prev_ang = np.array([0.0])
    for j, r in enumerate(radii):
        ang = _ring_nodes(r, h)
        idx = np.arange(len(vertices), len(vertices) + len(ang))
        vertices.extend(zip(r * np.cos(ang), r * np.sin(ang)))
        if j == 0:
            tris.extend((0, idx[i], idx[(i + 1) % len(idx)]) for i in range(len(idx)))
        else:
            tris.extend(_stitch_rings(prev_idx, prev_ang, idx, ang))
        prev_idx, prev_ang = idx, ang
    return _assemble(np.array(vertices), tris, embedded_radii, {"Gamma": radius})


def mesh_annulus(r_in: float, r_out: float, h: float,
                 embedded_radii: list[float] | None = None) -> Mesh2D:
    """Triangulate the annulus r_in < |x| < r_out.

    Boundary circles are tagged ``Gamma_inner`` / ``Gamma_outer``; embedded
    circles ``r=<value>``.
    """
    embedded_radii = list(embedded_radii or [])
    if not 0.0 < r_in < r_out:
        raise InvalidGeometryError("need 0 < r_in < r_out")
    if h <= 0.0 or h >= r_out:
        raise InvalidGeometryError("need 0 < h < r_out")
    for r in embedded_radii:
        if not r_in < r < r_out:
            raise InvalidGeometryError(f"embedded radius {r} outside ({r_in}, {r_out})")

    radii = [r_in] + _ring_radii(r_in, r_out, h, embedded_radii)
    vertices: list[tuple[float, float]] = []
    tris: list[tuple[int, int, int]] = []
    prev_idx = prev_ang = None
    for r in radii:
        ang = _ring_nodes(r, h)
        idx = np.arange(len(vertices), len(vertices) + len(ang))
        vertices.extend(zip(r * np.cos(ang), r * np.sin(ang)))
        if prev_idx is not None:
            tris.extend(_stitch_rings(prev_idx, prev_ang, idx, ang))
        prev_idx, prev_ang = idx, ang
    return _assemble(np.array(vertices), tris, embedded_radii,
                     {"Gamma_inner": r_in, "Gamma_outer": r_out})


def tag_patches(mesh: Mesh2D, boundary_tag: str, spec: PatchSpec) -> Mesh2D:
    """Split a full boundary circle into accessible ``Gamma0`` and hidden ``Gamma1``.

    An edge belongs to ``Gamma0`` when its midpoint angle lies within the
    half-width of some patch center.
    """
    tag = mesh.tag(boundary_tag)
    ang = tag.angles
    centers = spec.centers()
    diff = ang[:, None] - centers[None, :]
    dist = np.abs((diff + np.pi) % (2.0 * np.pi) - np.pi).min(axis=1)
    in_patch = dist <= spec.angular_half_width

    def sub(mask: np.ndarray) -> CurveTag:
        return CurveTag(edges=tag.edges[mask], midpoints=tag.midpoints[mask],
                        normals=tag.normals[mask], lengths=tag.lengths[mask],
                        signs=tag.signs[mask])

    return mesh.with_tags({"Gamma0": sub(in_patch), "Gamma1": sub(~in_patch)})


def save_mesh(mesh: Mesh2D, path: str) -> None:
    """Plain-text dump with VERTICES / TRIANGLES / EDGES / TAGS sections."""
    with open(path, "w") as f:
        f.write("VERTICES\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write("TRIANGLES\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        f.write("EDGES\n")
        for a, b in mesh.edges:
            f.write(f"{a} {b}\n")
        f.write("TAGS\n")
        for name, tag in mesh.curve_tags.items():
            idx = " ".join(str(e) for e in tag.edges)
            f.write(f"{name}: {idx}\n")


def load_mesh(path: str) -> Mesh2D:
    sections: dict[str, list[str]] = {}
    current = None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line in ("VERTICES", "TRIANGLES", "EDGES", "TAGS"):
                current = line
                sections[current] = []
            else:
                sections[current].append(line)
    verts = np.array([[float(t) for t in ln.split()] for ln in sections["VERTICES"]])
    tris = np.array([[int(t) for t in ln.split()] for ln in sections["TRIANGLES"]],
                    dtype=np.int64)
    edges, tri_edges = _build_edges(tris)
    mesh = Mesh2D(vertices=verts, triangles=tris, edges=edges, tri_edges=tri_edges)
    tags = {}
    for ln in sections.get("TAGS", []):
        name, _, rest = ln.partition(":")
        idx = np.array([int(t) for t in rest.split()], dtype=np.int64)
        tags[name.strip()] = _circle_tag(verts, edges, idx)
    return mesh.with_tags(tags)

"""Direct problem: plane-wave illumination, edge-FEM solve, trace extraction.

The governing equation is curl curl E - k^2 kappa E = 0 with a Neumann
boundary condition given by the scalar 2D curl of an incident plane wave.
The weak form assembles to (S - k^2 M(kappa)) x = boundary load.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import MaxwellInvError
from .fem import (
    CoefficientField,
    EdgeSpace,
    Factorization,
    assemble_boundary_load,
    assemble_curlcurl,
    assemble_mass,
    tangential_trace,
)
from .mesh import Mesh2D


@dataclass(frozen=True)
class MediumConfig:
    """Physical constants; dimensionless defaults reproduce kappa0 = 1 + i."""

    omega: float = 1.0
    eps0: float = 1.0
    mu0: float = 1.0
    eps_background: float = 1.0
    sigma_background: float = 1.0

    def __post_init__(self):
        for name in ("omega", "eps0", "mu0", "eps_background", "sigma_background"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def k(self) -> float:
        return self.omega * np.sqrt(self.mu0 * self.eps0)

    @property
    def kappa0(self) -> complex:
        return background_kappa(self)

    @property
    def sqrt_kappa0(self) -> complex:
        return complex(np.sqrt(complex(self.kappa0)))  # principal branch


def background_kappa(m: MediumConfig) -> complex:
    """(eps + i sigma / omega) / eps0."""
    return (m.eps_background + 1j * m.sigma_background / m.omega) / m.eps0


@dataclass(frozen=True)
class IncidentWave:
    direction: tuple[float, float]

    def __post_init__(self):
        n = np.hypot(*self.direction)
        if abs(n - 1.0) > 1e-12:
            raise ValueError("wave direction must be a unit vector")

    @classmethod
    def from_angle(cls, theta: float) -> "IncidentWave":
        return cls((float(np.cos(theta)), float(np.sin(theta))))

    @property
    def polarization(self) -> tuple[float, float]:
        return (-self.direction[1], self.direction[0])


def wave_directions(count: int) -> list[IncidentWave]:
    """Directions (cos, sin) of angles 2 pi m / count."""
    return [IncidentWave.from_angle(2.0 * np.pi * m / count) for m in range(count)]


def plane_wave_field(w: IncidentWave, m: MediumConfig, points: np.ndarray) -> np.ndarray:
    """E(x) = perp(eta) exp(i k sqrt(kappa0) eta . x), shape (n, 2) complex."""
    eta = np.asarray(w.direction)
    phase = np.exp(1j * m.k * m.sqrt_kappa0 * (np.asarray(points) @ eta))
    return phase[:, None] * np.asarray(w.polarization)[None, :]


def plane_wave_neumann(w: IncidentWave, m: MediumConfig, points: np.ndarray) -> np.ndarray:
    """Scalar 2D curl of the plane wave: i k sqrt(kappa0) exp(i k sqrt(kappa0) eta . x)."""
    eta = np.asarray(w.direction)
    c = 1j * m.k * m.sqrt_kappa0
    return c * np.exp(1j * m.k * m.sqrt_kappa0 * (np.asarray(points) @ eta))


class DirectSolver:
    """Factorized direct problem for one refractive index; reusable across waves."""

    def __init__(self, space: EdgeSpace, kappa: CoefficientField, m: MediumConfig,
                 boundary_tag: str = "Gamma"):
        kappa.require_admissible()
        self.space = space
        self.medium = m
        self.boundary_tag = boundary_tag
        S = assemble_curlcurl(space)
        M = assemble_mass(space, kappa)
        self.fact = Factorization((S - m.k ** 2 * M).tocsc())

    def solve(self, g_N) -> np.ndarray:
        b = assemble_boundary_load(self.space, self.boundary_tag, g_N)
        return self.fact.solve(b)

    def solve_wave(self, w: IncidentWave) -> np.ndarray:
        mids = self.space.mesh.tag(self.boundary_tag).midpoints
        return self.solve(plane_wave_neumann(w, self.medium, mids))


def solve_direct(mesh: Mesh2D, kappa: CoefficientField, g_N, m: MediumConfig,
                 boundary_tag: str = "Gamma",
                 space: EdgeSpace | None = None) -> np.ndarray:
    """One-shot solve of (S - k^2 M(kappa)) x = load(g_N)."""
    space = space or EdgeSpace(mesh)
    return DirectSolver(space, kappa, m, boundary_tag).solve(g_N)


def kappa_field(mesh: Mesh2D, m: MediumConfig, support=None,
                amplitude: float = 0.0) -> CoefficientField:
    """kappa0 (1 + a chi_D) sampled at triangle centroids."""
    values = np.full(mesh.n_triangles, m.kappa0, dtype=complex)
    if support is not None and amplitude != 0.0:
        inside = support.contains(mesh.centroids())
        values[inside] *= (1.0 + amplitude)
    return CoefficientField(values)


@dataclass(frozen=True)
class TraceData:
    """Complex tangential-trace samples on a tagged curve, one row per wave."""

    curve_tag: str
    midpoints: np.ndarray       # (n, 2)
    arc_lengths: np.ndarray     # (n,)
    values: np.ndarray          # (n_waves, n) complex
    directions: np.ndarray      # (n_waves, 2)

    def __post_init__(self):
        if self.values.shape != (len(self.directions), len(self.arc_lengths)):
            raise ValueError("trace value shape mismatch")

    @property
    def n_waves(self) -> int:
        return self.values.shape[0]

    @property
    def angles(self) -> np.ndarray:
        return np.arctan2(self.midpoints[:, 1], self.midpoints[:, 0])

    def norms(self) -> np.ndarray:
        """Per-wave L2(curve) norm with arc-length weights."""
        return np.sqrt(np.einsum("we,e->w", np.abs(self.values) ** 2,
                                 self.arc_lengths).real)

    def interp_values(self, dst_angles: np.ndarray) -> np.ndarray:
        """Periodic linear interpolation of each wave's trace in angle."""
        src = self.angles
        order = np.argsort(src)
        a = src[order]
        out = np.empty((self.n_waves, len(dst_angles)), dtype=complex)
        a_ext = np.concatenate([[a[-1] - 2.0 * np.pi], a, [a[0] + 2.0 * np.pi]])
        dst = (np.asarray(dst_angles) + np.pi) % (2.0 * np.pi) - np.pi
        for w in range(self.n_waves):
            v = self.values[w][order]
            v_ext = np.concatenate([[v[-1]], v, [v[0]]])
            out[w] = np.interp(dst, a_ext, v_ext.real) + \
                1j * np.interp(dst, a_ext, v_ext.imag)
        return out


def extract_trace(space: EdgeSpace, coeffs_per_wave, directions,
                  curve_tag: str) -> TraceData:
    tag = space.mesh.tag(curve_tag)
    values = np.stack([tangential_trace(space, c, curve_tag) for c in coeffs_per_wave])
    dirs = np.array([w.direction if isinstance(w, IncidentWave) else w
                     for w in directions], dtype=float)
    return TraceData(curve_tag=curve_tag, midpoints=tag.midpoints,
                     arc_lengths=tag.lengths, values=values, directions=dirs)


def add_noise(t: TraceData, eta: float, seed: int) -> TraceData:
    """Perturb each dof by a complex sample uniform in the unit disk, scaled so
    the relative L2(curve) error equals eta exactly (per wave)."""
    if eta < 0.0:
        raise ValueError("noise level must be >= 0")
    if eta == 0.0:
        return replace(t, values=t.values.copy())
    rng = np.random.default_rng(seed)
    noisy = np.empty_like(t.values)
    for w in range(t.n_waves):
        r = np.sqrt(rng.random(t.values.shape[1]))
        phi = 2.0 * np.pi * rng.random(t.values.shape[1])
        p = r * np.exp(1j * phi)
        pnorm = np.sqrt(np.einsum("e,e->", np.abs(p) ** 2, t.arc_lengths))
        vnorm = np.sqrt(np.einsum("e,e->", np.abs(t.values[w]) ** 2, t.arc_lengths))
        noisy[w] = t.values[w] + p * (eta * vnorm / pnorm)
    return replace(t, values=noisy)


@dataclass(frozen=True)
class Dataset:
    """Synthesized measurements plus ground-truth diagnostics."""

    directions: np.ndarray          # (M, 2)
    meas_gamma0: TraceData          # E[kappa_ex] x n on Gamma0 (possibly noisy)
    bg_gamma0: TraceData            # E[kappa0] x n on Gamma0 (exact)
    diag_delta_int: TraceData       # exact difference trace on Gamma_int
    mesh_checksum: str
    noise_eta: float
    seed: int

    def delta_gamma0(self) -> TraceData:
        return replace(self.meas_gamma0,
                       values=self.meas_gamma0.values - self.bg_gamma0.values)


def synthesize_dataset(mesh: Mesh2D, m: MediumConfig, support, amplitude: float,
                       n_waves: int = 8, gamma_int_tag: str = "r=0.8",
                       noise_eta: float = 0.0, seed: int = 0,
                       space: EdgeSpace | None = None) -> Dataset:
    """Solve the direct problem with kappa_ex and kappa0 for all plane waves.

    Both solves share the same Neumann load (inverse-crime guard: callers
    should invert on a different mesh; the mesh checksum is recorded).
    """
    if support is None:
        raise MaxwellInvError("data synthesis requires a ground-truth support")
    space = space or EdgeSpace(mesh)
    waves = wave_directions(n_waves)
    solver_ex = DirectSolver(space, kappa_field(mesh, m, support, amplitude), m)
    solver_bg = DirectSolver(space, kappa_field(mesh, m), m)
    mids = mesh.tag("Gamma").midpoints
    loads = [plane_wave_neumann(w, m, mids) for w in waves]
    ex = [solver_ex.solve(g) for g in loads]
    bg = [solver_bg.solve(g) for g in loads]

    meas = extract_trace(space, ex, waves, "Gamma0")
    meas = add_noise(meas, noise_eta, seed)
    bg0 = extract_trace(space, bg, waves, "Gamma0")
    delta_int = [e - b for e, b in zip(ex, bg)]
    diag = extract_trace(space, delta_int, waves, gamma_int_tag)
    return Dataset(directions=np.array([w.direction for w in waves]),
                   meas_gamma0=meas, bg_gamma0=bg0, diag_delta_int=diag,
                   mesh_checksum=mesh.checksum(), noise_eta=noise_eta, seed=seed)


def hcurl_error(space: EdgeSpace, coeffs: np.ndarray, field_fn, curl_fn) -> float:
    """Relative H(curl) error of an edge-element field against an exact field.

    ``field_fn(points) -> (n, 2)`` and ``curl_fn(points) -> (n,)`` evaluate the
    exact solution; integration uses the triangle midpoint rule.
    """
    mesh = space.mesh
    p = mesh.vertices[mesh.triangles]
    qp = np.stack([0.5 * (p[:, 0] + p[:, 1]), 0.5 * (p[:, 1] + p[:, 2]),
                   0.5 * (p[:, 2] + p[:, 0])], axis=1)       # (T, 3, 2)
    flat = qp.reshape(-1, 2)
    exact = np.asarray(field_fn(flat)).reshape(len(p), 3, 2)
    approx = space.eval_at_qp(np.asarray(coeffs, dtype=complex))
    w = (space.area / 3.0)[:, None]
    err2 = np.sum(w * np.sum(np.abs(exact - approx) ** 2, axis=2))
    ref2 = np.sum(w * np.sum(np.abs(exact) ** 2, axis=2))
    exact_curl = np.asarray(curl_fn(flat)).reshape(len(p), 3)
    approx_curl = space.eval_curl(np.asarray(coeffs, dtype=complex))[:, None]
    err2 += np.sum(w * np.abs(exact_curl - approx_curl) ** 2)
    ref2 += np.sum(w * np.abs(exact_curl) ** 2)
    return float(np.sqrt(err2 / ref2))


# --- dataset file format -----------------------------------------------------
# header lines "key value", then per-wave blocks; floats written with repr for
# bit-exact round-trips.

def _write_trace(f, label: str, t: TraceData) -> None:
    f.write(f"TRACE {label} {t.curve_tag} {t.n_waves} {t.values.shape[1]}\n")
    for w in range(t.n_waves):
        f.write(f"WAVE {float(t.directions[w, 0])!r} {float(t.directions[w, 1])!r}\n")
        for e in range(t.values.shape[1]):
            f.write(" ".join(repr(float(v)) for v in (
                t.midpoints[e, 0], t.midpoints[e, 1],
                t.values[w, e].real, t.values[w, e].imag,
                t.arc_lengths[e])) + "\n")


def _read_trace(lines, pos):
    head = lines[pos].split()
    assert head[0] == "TRACE"
    label, tag, n_waves, n_edges = head[1], head[2], int(head[3]), int(head[4])
    pos += 1
    dirs = np.zeros((n_waves, 2))
    values = np.zeros((n_waves, n_edges), dtype=complex)
    mids = np.zeros((n_edges, 2))
    arcs = np.zeros(n_edges)
    for w in range(n_waves):
        parts = lines[pos].split()
        assert parts[0] == "WAVE"
        dirs[w] = [float(parts[1]), float(parts[2])]
        pos += 1
        for e in range(n_edges):
            x, y, re, im, arc = (float(v) for v in lines[pos].split())
            mids[e] = (x, y)
            arcs[e] = arc
            values[w, e] = re + 1j * im
            pos += 1
    trace = TraceData(curve_tag=tag, midpoints=mids, arc_lengths=arcs,
                      values=values, directions=dirs)
    return label, trace, pos


def write_traces(path: str, traces: dict[str, TraceData],
                 header: dict | None = None) -> None:
    """Write labeled trace blocks with a key-value header (bit-exact format)."""
    with open(path, "w") as f:
        f.write("MAXWELLINV TRACES 1\n")
        for k, v in (header or {}).items():
            f.write(f"# {k} {v}\n")
        for label, t in traces.items():
            _write_trace(f, label, t)


def read_traces(path: str) -> tuple[dict, dict[str, TraceData]]:
    """Read a trace file back into (header, {label: TraceData})."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    assert lines[0].startswith("MAXWELLINV TRACES")
    meta = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("# "):
        _, k, v = lines[pos].split(" ", 2)
        meta[k] = v
        pos += 1
    traces = {}
    while pos < len(lines) and lines[pos].startswith("TRACE"):
        label, trace, pos = _read_trace(lines, pos)
        traces[label] = trace
    return meta, traces


def write_dataset(ds: Dataset, path: str, header: dict | None = None) -> None:
    with open(path, "w") as f:
        f.write("MAXWELLINV DATASET 1\n")
        meta = {"mesh_checksum": ds.mesh_checksum, "noise_eta": repr(ds.noise_eta),
                "seed": ds.seed}
        meta.update(header or {})
        for k, v in meta.items():
            f.write(f"# {k} {v}\n")
        _write_trace(f, "meas_gamma0", ds.meas_gamma0)
        _write_trace(f, "bg_gamma0", ds.bg_gamma0)
        _write_trace(f, "diag_delta_int", ds.diag_delta_int)


def read_dataset(path: str) -> Dataset:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    assert lines[0].startswith("MAXWELLINV DATASET")
    meta = {}
    pos = 1
    while lines[pos].startswith("# "):
        _, k, v = lines[pos].split(" ", 2)
        meta[k] = v
        pos += 1
    traces = {}
    while pos < len(lines) and lines[pos].startswith("TRACE"):
        label, trace, pos = _read_trace(lines, pos)
        traces[label] = trace
    return Dataset(directions=traces["meas_gamma0"].directions,
                   meas_gamma0=traces["meas_gamma0"],
                   bg_gamma0=traces["bg_gamma0"],
                   diag_delta_int=traces["diag_delta_int"],
                   mesh_checksum=meta["mesh_checksum"],
                   noise_eta=float(meta["noise_eta"]), seed=int(meta["seed"]))

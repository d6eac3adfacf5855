"""Declarative experiment configuration: JSON schema, validation, presets.

An ``ExperimentConfig`` describes one complete run: geometry, medium,
ground-truth perturbation, mesh sizes, data-completion settings, and the
inversion stage list.  Configs round-trip through JSON and hash to a
checksum that every output artifact embeds, so results stay traceable to
the exact settings that produced them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

from .completion import QRConfig
from .errors import ConfigError
from .forward import MediumConfig
from .supports import Ball, Ellipse, FourierStar, Union

STAGES = ("ball", "ellipse", "multi", "fourier")

# full-fidelity mesh sizes; defaults below are coarser for minutes-level runs
PAPER_SCALE = {"h_data": 0.0138, "h_v": 0.02, "h_inverse": 0.041}


@dataclass(frozen=True)
class GeometryConfig:
    """Unit-disk geometry: domain, known annulus, measurement circle, patches."""

    domain_radius: float = 1.0
    inner_radius: float = 0.7        # inner boundary of the known annulus
    gamma_int_radius: float = 0.8    # interior measurement circle
    n_patches: int = 32
    patch_half_width: float = 0.075


@dataclass(frozen=True)
class MeshConfig:
    """Mesh sizes for data synthesis, completion, and inversion."""

    h_data: float = 0.03
    h_v: float = 0.02
    h_inverse: float = 0.04
    allow_matching: bool = False     # override the inverse-crime guard


@dataclass(frozen=True)
class InversionConfig:
    stages: tuple[str, ...] = ("ball",)
    order: int = 4
    d0: float = 0.4
    r0: float = 0.15
    ftol: float = 1e-6
    max_iter: int = 100
    rel_threshold: float = 0.3
    inner_radius: float | None = None   # admissible region; default: geometry's
    nr_max: int = 4                      # Fourier refinement stages
    improve_tol: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    medium: MediumConfig = field(default_factory=MediumConfig)
    truth: object | None = None          # Ball | Ellipse | FourierStar | Union
    amplitude: float = 0.1
    n_waves: int = 8
    meshes: MeshConfig = field(default_factory=MeshConfig)
    qr: QRConfig = field(default_factory=QRConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    noise_eta: float = 0.0
    seed: int = 0
    skip_completion: bool = False
    sweep_amplitudes: tuple[float, ...] | None = None

    def checksum(self) -> str:
        blob = json.dumps(config_to_dict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --- support (de)serialization ----------------------------------------------

def support_to_dict(support) -> dict:
    if isinstance(support, Ball):
        return {"shape": "ball", "center": list(support.center), "r": support.r}
    if isinstance(support, Ellipse):
        return {"shape": "ellipse", "center": list(support.center),
                "rx": support.rx, "ry": support.ry}
    if isinstance(support, FourierStar):
        return {"shape": "star", "center": list(support.center),
                "r0": support.r0, "coeffs": [list(c) for c in support.coeffs]}
    if isinstance(support, Union):
        return {"shape": "union",
                "parts": [support_to_dict(p) for p in support.parts]}
    raise ConfigError(f"unknown support type {type(support).__name__}")


def support_from_dict(d: dict):
    try:
        shape = d["shape"]
        if shape == "ball":
            return Ball(tuple(d["center"]), d["r"])
        if shape == "ellipse":
            return Ellipse(tuple(d["center"]), d["rx"], d["ry"])
        if shape == "star":
            return FourierStar(tuple(d["center"]), d["r0"],
                               tuple(tuple(c) for c in d["coeffs"]))
        if shape == "union":
            return Union(tuple(support_from_dict(p) for p in d["parts"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"truth: malformed support spec: {exc}") from None
    raise ConfigError(f"truth.shape: unknown shape {shape!r}")


# --- JSON round-trip ---------------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = {
        "name": cfg.name,
        "geometry": asdict(cfg.geometry),
        "medium": asdict(cfg.medium),
        "truth": None if cfg.truth is None else support_to_dict(cfg.truth),
        "amplitude": cfg.amplitude,
        "n_waves": cfg.n_waves,
        "meshes": asdict(cfg.meshes),
        "qr": asdict(cfg.qr),
        "inversion": {**asdict(cfg.inversion),
                      "stages": list(cfg.inversion.stages)},
        "noise_eta": cfg.noise_eta,
        "seed": cfg.seed,
        "skip_completion": cfg.skip_completion,
        "sweep_amplitudes": (None if cfg.sweep_amplitudes is None
                             else list(cfg.sweep_amplitudes)),
    }
    return d


def _section(d: dict, key: str, cls, post=None):
    raw = d.get(key)
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected an object, got {type(raw).__name__}")
    known = cls.__dataclass_fields__
    for k in raw:
        if k not in known:
            raise ConfigError(f"{key}.{k}: unknown field")
    if post:
        raw = post(dict(raw))
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a JSON object")
    known = ExperimentConfig.__dataclass_fields__
    for k in d:
        if k not in known:
            raise ConfigError(f"{k}: unknown top-level field")

    truth = d.get("truth")
    sweep = d.get("sweep_amplitudes")
    cfg = ExperimentConfig(
        name=d.get("name", "experiment"),
        geometry=_section(d, "geometry", GeometryConfig),
        medium=_section(d, "medium", MediumConfig),
        truth=None if truth is None else support_from_dict(truth),
        amplitude=d.get("amplitude", 0.1),
        n_waves=d.get("n_waves", 8),
        meshes=_section(d, "meshes", MeshConfig),
        qr=_section(d, "qr", QRConfig),
        inversion=_section(d, "inversion", InversionConfig,
                           post=lambda r: {**r, "stages": tuple(r["stages"])}
                           if "stages" in r else r),
        noise_eta=d.get("noise_eta", 0.0),
        seed=d.get("seed", 0),
        skip_completion=d.get("skip_completion", False),
        sweep_amplitudes=None if sweep is None else tuple(sweep),
    )
    validate_config(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            d = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(d)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


# --- validation --------------------------------------------------------------

def validate_config(cfg: ExperimentConfig) -> None:
    g = cfg.geometry
    if not 0.0 < g.inner_radius < g.gamma_int_radius < g.domain_radius:
        raise ConfigError(
            "geometry: need 0 < inner_radius < gamma_int_radius < domain_radius "
            f"(got {g.inner_radius}, {g.gamma_int_radius}, {g.domain_radius})")
    if g.n_patches < 1:
        raise ConfigError("geometry.n_patches: must be at least 1")

    ms = cfg.meshes
    for name in ("h_data", "h_v", "h_inverse"):
        if getattr(ms, name) <= 0.0:
            raise ConfigError(f"meshes.{name}: must be positive")
    if ms.h_data >= ms.h_inverse and not ms.allow_matching:
        raise ConfigError(
            "meshes: h_data must be finer than h_inverse (inverting on the "
            "synthesis discretization is an inverse crime); set "
            "allow_matching to override")

    inv = cfg.inversion
    for s in inv.stages:
        if s not in STAGES:
            raise ConfigError(
                f"inversion.stages: unknown stage {s!r} (choose from {STAGES})")
    if "fourier" in inv.stages and "ball" not in inv.stages:
        raise ConfigError(
            "inversion.stages: 'fourier' refines a ball stage and requires "
            "'ball' earlier in the list")
    if inv.order < 1:
        raise ConfigError("inversion.order: must be at least 1")
    if not 0.0 < inv.rel_threshold <= 1.0:
        raise ConfigError("inversion.rel_threshold: must lie in (0, 1]")

    if cfg.n_waves < 1:
        raise ConfigError("n_waves: must be at least 1")
    if cfg.noise_eta < 0.0:
        raise ConfigError("noise_eta: must be non-negative")
    if not abs(cfg.amplitude) < 1.0:
        raise ConfigError("amplitude: magnitude must stay below 1")
    if cfg.sweep_amplitudes is not None:
        if len(cfg.sweep_amplitudes) == 0:
            raise ConfigError("sweep_amplitudes: must not be empty")
        for a in cfg.sweep_amplitudes:
            if not abs(a) < 1.0:
                raise ConfigError(
                    f"sweep_amplitudes: magnitude of {a} must stay below 1")
def paper_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Full-fidelity mesh sizes for overnight-quality runs."""
    return replace(cfg, meshes=replace(cfg.meshes, **PAPER_SCALE))


# --- presets -----------------------------------------------------------------

def _ball_truth() -> Ball:
    return Ball((-0.4, 0.0), 0.2)


def preset(name: str) -> ExperimentConfig:
    """Shipped configurations reproducing the benchmark experiments."""
    if name == "table1":
        return ExperimentConfig(name="table1", truth=_ball_truth(),
                                amplitude=0.1)
    if name == "table5":
        return ExperimentConfig(name="table5", truth=_ball_truth(),
                                amplitude=0.1, skip_completion=True)
    if name == "table2_sweep":
        return ExperimentConfig(
            name="table2_sweep", truth=_ball_truth(), amplitude=0.1,
            sweep_amplitudes=(0.1, -0.1, 0.2, -0.2, 0.3, -0.3))
    if name == "ellipse":
        return ExperimentConfig(
            name="ellipse", truth=Ellipse((-0.4, 0.0), 0.15, 0.25),
            amplitude=0.1, skip_completion=True,
            inversion=InversionConfig(stages=("ellipse",)))
    if name == "two_ball":
        # the outer ball straddles the known-annulus boundary, so exact
        # interior data is used and the admissible region is widened
        return ExperimentConfig(
            name="two_ball",
            truth=Union((Ball((-0.55, -0.45), 0.1), Ball((0.4, 0.6), 0.07))),
            amplitude=0.1, skip_completion=True,
            inversion=InversionConfig(stages=("multi",), inner_radius=0.95))
    if name == "star_fourier":
        return ExperimentConfig(
            name="star_fourier",
            truth=FourierStar((-0.4, 0.0), 0.2,
                              ((0.0, 0.0), (0.04, 0.0), (0.0, 0.03))),
            amplitude=0.1, skip_completion=True,
            inversion=InversionConfig(stages=("ball", "fourier")))
    raise ConfigError(f"unknown preset {name!r} (choose from {PRESETS})")


PRESETS = ("table1", "table5", "table2_sweep", "ellipse", "two_ball",
           "star_fourier")

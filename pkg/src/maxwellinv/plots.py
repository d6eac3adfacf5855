"""Figure rendering for run reports (headless Agg backend).

Each helper writes one PNG next to the delimited output files.  Figures
carry no timestamps so reruns with identical inputs produce identical
bytes.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .forward import TraceData  # noqa: E402
from .mesh import Mesh2D  # noqa: E402

_META = {"Software": "maxwellinv"}


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_field(mesh: Mesh2D, kappa_values: np.ndarray, path: str,
               truth=None, support=None) -> None:
    """Per-triangle map of Re(kappa) with truth/reconstruction outlines."""
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    tpc = ax.tripcolor(mesh.vertices[:, 0], mesh.vertices[:, 1],
                       mesh.triangles, facecolors=kappa_values.real,
                       cmap="viridis")
    fig.colorbar(tpc, ax=ax, label="Re kappa")
    for s, style, label in ((truth, "w--", "exact"),
                            (support, "r-", "reconstructed")):
        if s is not None:
            b = s.boundary_points(256)
            ax.plot(b[:, 0], b[:, 1], style, lw=1.4, label=label)
    if truth is not None or support is not None:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title("reconstructed refractive index")
    _save(fig, path)


def plot_traces(measured: TraceData, model_values: np.ndarray | None,
                path: str) -> None:
    """Aggregate |trace|^2 on the measurement circle, data vs model."""
    order = np.argsort(measured.angles)
    ang = measured.angles[order]
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    power = np.sum(np.abs(measured.values) ** 2, axis=0)
    ax.plot(ang, power[order], "k-", lw=1.2, label="data")
    if model_values is not None:
        mp = np.sum(np.abs(model_values) ** 2, axis=0)
        ax.plot(ang, mp[order], "r--", lw=1.2, label="model at optimum")
    ax.set_xlabel("boundary angle")
    ax.set_ylabel("sum |trace|^2")
    ax.legend(fontsize=8)
    ax.set_title("difference traces on the measurement circle")
    _save(fig, path)


def plot_cost_history(histories: dict[str, np.ndarray], path: str) -> None:
    """Per-stage best cost against outer iteration, log scale."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, h in histories.items():
        if len(h):
            ax.semilogy(np.arange(1, len(h) + 1), h, marker=".", label=label)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("cost")
    ax.legend(fontsize=8)
    ax.set_title("minimization history")
    _save(fig, path)

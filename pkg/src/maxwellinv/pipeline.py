"""End-to-end orchestration: synthesize -> complete -> localize -> minimize.

Each command reads an ``ExperimentConfig`` and writes plain-text artifacts
(plus rendered figures) into an output directory.  Every artifact embeds
the config checksum; identical config and seed reproduce identical files.
Wall-clock timings go to the run log only, keeping the data artifacts
byte-stable.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import plots
from .completion import QROperator, complete_traces
from .config import ExperimentConfig, support_to_dict
from .errors import ConfigError
from .forward import (
    Dataset,
    TraceData,
    kappa_field,
    read_dataset,
    read_traces,
    synthesize_dataset,
    write_dataset,
    write_traces,
)
from .inversion import (
    CostEvaluator,
    PeakSet,
    ReconstructionResult,
    locate_peaks,
    reconstruct_ball,
    reconstruct_ellipse,
    reconstruct_multi,
    refine_fourier,
    support_errors,
)
from .mesh import PatchSpec, mesh_annulus, mesh_disk, tag_patches
from .sensitivity import BackgroundModel
from .supports import Ball


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: str
    dataset: str | None
    completed: str
    peaks: str
    result: str
    field_dump: str
    log: str
    figures: tuple[str, ...]


# --- mesh construction -------------------------------------------------------

def _patch_spec(cfg: ExperimentConfig) -> PatchSpec:
    g = cfg.geometry
    return PatchSpec(count=g.n_patches,
                     angular_half_width=g.patch_half_width)


def data_mesh(cfg: ExperimentConfig):
    g = cfg.geometry
    mesh = mesh_disk(g.domain_radius, cfg.meshes.h_data, [g.gamma_int_radius])
    return tag_patches(mesh, "Gamma", _patch_spec(cfg))


def v_mesh(cfg: ExperimentConfig):
    g = cfg.geometry
    mesh = mesh_annulus(g.inner_radius, g.domain_radius, cfg.meshes.h_v,
                        [g.gamma_int_radius])
    return tag_patches(mesh, "Gamma_outer", _patch_spec(cfg))


def inverse_mesh(cfg: ExperimentConfig):
    g = cfg.geometry
    return mesh_disk(g.domain_radius, cfg.meshes.h_inverse,
                     [g.gamma_int_radius])


def _gamma_int_tag(cfg: ExperimentConfig) -> str:
    r = cfg.geometry.gamma_int_radius
    return f"r={r:g}"


# --- commands ---------------------------------------------------------------

def cmd_synth(cfg: ExperimentConfig, out_dir: str,
              amplitude: float | None = None) -> str:
    """Solve the direct problem for the ground truth; write the dataset file."""
    if cfg.truth is None:
        raise ConfigError("truth: data synthesis requires a ground truth")
    os.makedirs(out_dir, exist_ok=True)
    a = cfg.amplitude if amplitude is None else amplitude
    ds = synthesize_dataset(data_mesh(cfg), cfg.medium, cfg.truth, a,
                            n_waves=cfg.n_waves,
                            gamma_int_tag=_gamma_int_tag(cfg),
                            noise_eta=cfg.noise_eta, seed=cfg.seed)
    path = f"{out_dir}/dataset.txt"
    write_dataset(ds, path, header={"config_checksum": cfg.checksum(),
                                    "experiment": cfg.name,
                                    "amplitude": repr(float(a))})
    return path


def cmd_complete(cfg: ExperimentConfig, dataset: Dataset | str,
                 out_dir: str) -> str:
    """Transmit the patch data onto the interior circle; write the trace file."""
    if isinstance(dataset, str):
        dataset = read_dataset(dataset)
    os.makedirs(out_dir, exist_ok=True)
    header = {"config_checksum": cfg.checksum(), "experiment": cfg.name}
    if cfg.skip_completion:
        completed = dataset.diag_delta_int
        header["completion"] = "skipped (exact interior traces)"
    else:
        op = QROperator(v_mesh(cfg), cfg.medium, config=cfg.qr)
        completed, result = complete_traces(op, dataset.delta_gamma0(),
                                            _gamma_int_tag(cfg))
        header.update(completion="quasi-reversibility",
                      delta=repr(cfg.qr.delta), iters=result.n_iters,
                      scaled=cfg.qr.scaled_variant,
                      data_weight=repr(cfg.qr.data_weight))
    path = f"{out_dir}/completed.txt"
    write_traces(path, {"delta_int": completed}, header=header)
    return path


_BALL_STAGES = {"ball", "fourier"}


def run_stages(cfg: ExperimentConfig, evaluator: CostEvaluator,
               peaks: PeakSet) -> list[tuple[str, ReconstructionResult, float]]:
    """Run the configured stage list, warm-starting later stages."""
    inv = cfg.inversion
    results = []
    ball_result = None
    for stage in inv.stages:
        t0 = time.perf_counter()
        if stage == "ball":
            res = reconstruct_ball(evaluator, peaks[0], d0=inv.d0, r0=inv.r0,
                                   ftol=inv.ftol, max_iter=inv.max_iter)
            ball_result = res
        elif stage == "ellipse":
            res = reconstruct_ellipse(evaluator, peaks[0], d0=inv.d0,
                                      r0=inv.r0, ftol=inv.ftol,
                                      max_iter=inv.max_iter)
        elif stage == "multi":
            res = reconstruct_multi(evaluator, peaks, d0=inv.d0, r0=inv.r0,
                                    ftol=inv.ftol, max_iter=inv.max_iter)
        elif stage == "fourier":
            if ball_result is None:
                raise ConfigError(
                    "inversion.stages: 'fourier' needs a prior 'ball' stage")
            res = refine_fourier(evaluator, ball_result, peaks[0],
                                 nr_max=inv.nr_max,
                                 improve_tol=inv.improve_tol,
                                 ftol=inv.ftol, max_iter=inv.max_iter)
        else:
            raise ConfigError(f"inversion.stages: unknown stage {stage!r}")
        if cfg.truth is not None:
            res = replace(res, errors=support_errors(
                res.support, res.amplitude, cfg.truth, cfg.amplitude))
        results.append((stage, res, time.perf_counter() - t0))
    return results


def ball_depth(support, gamma_int_radius: float) -> float | None:
    """Distance from the interior measurement circle to a ball's center."""
    if not isinstance(support, Ball):
        return None
    return gamma_int_radius - float(np.hypot(*support.center))


def _support_line(support) -> str:
    return json.dumps(support_to_dict(support), default=float)


def write_result(cfg: ExperimentConfig, results, path: str) -> None:
    with open(path, "w") as f:
        f.write("MAXWELLINV RESULT 1\n")
        f.write(f"# config_checksum {cfg.checksum()}\n")
        f.write(f"# experiment {cfg.name}\n")
        for stage, res, _ in results:
            f.write(f"STAGE {stage}\n")
            f.write(f"support {_support_line(res.support)}\n")
            f.write(f"amplitude {float(res.amplitude)!r}\n")
            f.write(f"cost {float(res.cost)!r}\n")
            f.write(f"n_evals {res.n_evals}\n")
            depth = ball_depth(res.support, cfg.geometry.gamma_int_radius)
            if depth is not None:
                f.write(f"depth {float(depth)!r}\n")
            if res.errors:
                f.write("TABLE parameter exact approx rel_error\n")
                rows = _error_rows(res, cfg.truth, cfg.amplitude)
                for name, exact, approx, rel in rows:
                    f.write(f"{name} {float(exact)!r} {float(approx)!r} "
                            f"{float(rel)!r}\n")
            f.write("COST_HISTORY " +
                    " ".join(repr(float(v)) for v in res.trace) + "\n")


def _error_rows(res: ReconstructionResult, truth, truth_amplitude: float):
    rows = []
    sup = res.support
    if isinstance(sup, Ball) and isinstance(truth, Ball):
        rows.append(("center_x", truth.center[0], sup.center[0],
                     res.errors.get("center")))
        rows.append(("center_y", truth.center[1], sup.center[1],
                     res.errors.get("center")))
        rows.append(("radius", truth.r, sup.r, res.errors.get("radius")))
    for key in ("rx", "ry"):
        if key in (res.errors or {}):
            rows.append((key, getattr(truth, key), getattr(sup, key),
                         res.errors[key]))
    if "amplitude" in (res.errors or {}):
        rows.append(("amplitude", truth_amplitude, res.amplitude,
                     res.errors["amplitude"]))
    return rows


def write_field_dump(cfg: ExperimentConfig, mesh, support, amplitude: float,
                     path: str) -> np.ndarray:
    """Per-triangle centroid and reconstructed kappa, for external plotting."""
    kappa = kappa_field(mesh, cfg.medium, support, amplitude).values
    cent = mesh.centroids()
    with open(path, "w") as f:
        f.write("MAXWELLINV FIELD 1\n")
        f.write(f"# config_checksum {cfg.checksum()}\n")
        f.write("# columns x y re_kappa im_kappa\n")
        for i in range(mesh.n_triangles):
            f.write(f"{float(cent[i, 0])!r} {float(cent[i, 1])!r} "
                    f"{float(kappa[i].real)!r} {float(kappa[i].imag)!r}\n")
    return kappa


@dataclass(frozen=True)
class InvertOutput:
    result: str
    field_dump: str
    peaks: str
    figures: tuple[str, ...]
    stages: list          # (stage name, ReconstructionResult, seconds)


def cmd_invert(cfg: ExperimentConfig, completed: TraceData | str,
               out_dir: str) -> InvertOutput:
    """Localize peaks and run the stage list; write result and field dump."""
    if isinstance(completed, str):
        _, traces = read_traces(completed)
        completed = traces["delta_int"]
    os.makedirs(out_dir, exist_ok=True)
    mesh = inverse_mesh(cfg)
    model = BackgroundModel(mesh, cfg.medium, n_waves=cfg.n_waves,
                            curve_tag=_gamma_int_tag(cfg))
    inv = cfg.inversion
    evaluator = CostEvaluator(model, completed,
                              inner_radius=(inv.inner_radius
                                            or cfg.geometry.inner_radius),
                              order=inv.order)
    peaks = locate_peaks(evaluator.data, rel_threshold=inv.rel_threshold)

    peaks_path = f"{out_dir}/peaks.txt"
    with open(peaks_path, "w") as f:
        f.write("MAXWELLINV PEAKS 1\n")
        f.write(f"# config_checksum {cfg.checksum()}\n")
        f.write("# columns x y angle height\n")
        for p in peaks.peaks:
            ang = float(np.arctan2(p.point[1], p.point[0]))
            f.write(f"{float(p.point[0])!r} {float(p.point[1])!r} "
                    f"{ang!r} {float(p.height)!r}\n")

    results = run_stages(cfg, evaluator, peaks)
    result_path = f"{out_dir}/result.txt"
    write_result(cfg, results, result_path)

    final = results[-1][1]
    dump_path = f"{out_dir}/field_dump.txt"
    kappa = write_field_dump(cfg, mesh, final.support, final.amplitude,
                             dump_path)

    figures = _render_figures(cfg, mesh, kappa, evaluator, model, final,
                              results, out_dir)
    return InvertOutput(result=result_path, field_dump=dump_path,
                        peaks=peaks_path, figures=figures, stages=results)


def _render_figures(cfg, mesh, kappa, evaluator, model, final, results,
                    out_dir) -> tuple[str, ...]:
    field_png = f"{out_dir}/field.png"
    plots.plot_field(mesh, kappa, field_png, truth=cfg.truth,
                     support=final.support)
    trace_png = f"{out_dir}/traces.png"
    tt = model.taylor_trace(final.support, cfg.inversion.order)
    plots.plot_traces(evaluator.data, tt.eval_delta(final.amplitude),
                      trace_png)
    cost_png = f"{out_dir}/cost_history.png"
    plots.plot_cost_history(
        {stage: res.trace for stage, res, _ in results}, cost_png)
    return (field_png, trace_png, cost_png)


def cmd_pipeline(cfg: ExperimentConfig, out_dir: str) -> RunArtifacts:
    """Run synth -> complete -> invert; write all artifacts plus a log."""
    if cfg.sweep_amplitudes is not None:
        return run_sweep(cfg, out_dir)
    os.makedirs(out_dir, exist_ok=True)
    log_lines = [f"experiment {cfg.name}", f"config_checksum {cfg.checksum()}",
                 f"seed {cfg.seed}", f"noise_eta {cfg.noise_eta}"]
    t0 = time.perf_counter()
    dataset_path = cmd_synth(cfg, out_dir)
    log_lines.append(f"synth_seconds {time.perf_counter() - t0:.2f}")
    t0 = time.perf_counter()
    completed_path = cmd_complete(cfg, dataset_path, out_dir)
    log_lines.append(f"complete_seconds {time.perf_counter() - t0:.2f}")
    t0 = time.perf_counter()
    out = cmd_invert(cfg, completed_path, out_dir)
    log_lines.append(f"invert_seconds {time.perf_counter() - t0:.2f}")
    for stage, res, dt in out.stages:
        log_lines.append(f"stage {stage} seconds {dt:.2f} "
                         f"cost {res.cost!r} n_evals {res.n_evals}")

    log_path = f"{out_dir}/run.log"
    with open(log_path, "w") as f:
        f.write("\n".join(log_lines) + "\n")
    return RunArtifacts(out_dir=out_dir, dataset=dataset_path,
                        completed=completed_path, peaks=out.peaks,
                        result=out.result, field_dump=out.field_dump,
                        log=log_path, figures=out.figures)


# --- amplitude sweep ---------------------------------------------------------

def run_sweep(cfg: ExperimentConfig, out_dir: str) -> RunArtifacts:
    """Repeat the pipeline across exact amplitudes, sharing every operator.

    The background direct solve, the completion operator, and the inversion
    model are built once; only the perturbed direct solve changes with the
    exact amplitude.
    """
    if cfg.truth is None:
        raise ConfigError("truth: the amplitude sweep requires a ground truth")
    os.makedirs(out_dir, exist_ok=True)
    dmesh = data_mesh(cfg)
    op = None if cfg.skip_completion else QROperator(v_mesh(cfg), cfg.medium,
                                                     config=cfg.qr)
    model = BackgroundModel(inverse_mesh(cfg), cfg.medium,
                            n_waves=cfg.n_waves,
                            curve_tag=_gamma_int_tag(cfg))
    inv = cfg.inversion
    rows = []
    log_lines = [f"experiment {cfg.name}",
                 f"config_checksum {cfg.checksum()}", f"seed {cfg.seed}"]
    for a_ex in cfg.sweep_amplitudes:
        t0 = time.perf_counter()
        ds = synthesize_dataset(dmesh, cfg.medium, cfg.truth, a_ex,
                                n_waves=cfg.n_waves,
                                gamma_int_tag=_gamma_int_tag(cfg),
                                noise_eta=cfg.noise_eta, seed=cfg.seed)
        if op is None:
            completed = ds.diag_delta_int
        else:
            completed, _ = complete_traces(op, ds.delta_gamma0(),
                                           _gamma_int_tag(cfg))
        evaluator = CostEvaluator(model, completed,
                                  inner_radius=(inv.inner_radius
                                                or cfg.geometry.inner_radius),
                                  order=inv.order)
        peaks = locate_peaks(evaluator.data, rel_threshold=inv.rel_threshold)
        res = reconstruct_ball(evaluator, peaks[0], d0=inv.d0, r0=inv.r0,
                               ftol=inv.ftol, max_iter=inv.max_iter)
        depth = ball_depth(res.support, cfg.geometry.gamma_int_radius)
        amp_err = abs(res.amplitude - a_ex) / abs(a_ex)
        rows.append((a_ex, res.amplitude, amp_err, res.support.center[0],
                     res.support.center[1], res.support.r, depth))
        log_lines.append(f"a_ex {a_ex!r} seconds {time.perf_counter() - t0:.2f}")

    amp_errs = np.array([r[2] for r in rows])
    radii = np.array([r[5] for r in rows])
    depths = np.array([r[6] for r in rows])
    result_path = f"{out_dir}/result.txt"
    with open(result_path, "w") as f:
        f.write("MAXWELLINV SWEEP 1\n")
        f.write(f"# config_checksum {cfg.checksum()}\n")
        f.write(f"# experiment {cfg.name}\n")
        f.write("TABLE a_exact a_approx amp_rel_error center_x center_y "
                "radius depth\n")
        for row in rows:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")
        f.write(f"SUMMARY mean_amp_rel_error {float(np.mean(amp_errs))!r}\n")
        f.write(f"SUMMARY std_amp_rel_error {float(np.std(amp_errs))!r}\n")
        f.write(f"SUMMARY std_radius {float(np.std(radii))!r}\n")
        f.write(f"SUMMARY std_depth {float(np.std(depths))!r}\n")

    log_path = f"{out_dir}/run.log"
    with open(log_path, "w") as f:
        f.write("\n".join(log_lines) + "\n")
    return RunArtifacts(out_dir=out_dir, dataset=None, completed="",
                        peaks="", result=result_path, field_dump="",
                        log=log_path, figures=())

"""Peak localization and parametric reconstruction of the perturbation.

The squared modulus of the difference traces, summed over incident waves,
peaks on the interior measurement circle near the projection of the
perturbation.  Each candidate support is then scored by the misfit between
the measured difference traces and the Taylor model of the sensitivity
chain; a golden-section search handles the amplitude (the misfit is a
polynomial in a) while Powell's method moves the geometric parameters.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DegenerateSupportError, InvalidGeometryError, NoPeakError
from .forward import TraceData
from .optimize import golden_section, powell_minimize
from .sensitivity import BackgroundModel, TaylorTrace, coverage
from .supports import Ball, Ellipse, FourierStar, Union


@dataclass(frozen=True)
class Peak:
    point: np.ndarray        # on the measurement curve
    normal: np.ndarray       # outward radial direction
    height: float


@dataclass(frozen=True)
class PeakSet:
    peaks: tuple[Peak, ...]

    def __len__(self) -> int:
        return len(self.peaks)

    def __getitem__(self, i: int) -> Peak:
        return self.peaks[i]


def locate_peaks(delta_traces: TraceData, rel_threshold: float = 0.3) -> PeakSet:
    """Find surface peaks of the aggregate indicator sum_m |trace_m|^2.

    The indicator is smoothed by a periodic 3-point moving average along the
    curve; local maxima above ``rel_threshold`` times the global maximum
    become peaks.  A flat indicator (max/min ratio below 1.2) means nothing
    is localized and raises ``NoPeakError``.
    """
    power = np.sum(np.abs(delta_traces.values) ** 2, axis=0)
    if np.all(power == 0.0):
        raise NoPeakError("difference traces are identically zero")
    order = np.argsort(delta_traces.angles)
    p = power[order]
    smooth = (np.roll(p, 1) + p + np.roll(p, -1)) / 3.0
    if smooth.min() > 0.0 and smooth.max() / smooth.min() < 1.2:
        raise NoPeakError("trace indicator is flat; no localizable peak")
    is_max = (smooth >= np.roll(smooth, 1)) & (smooth > np.roll(smooth, -1))
    keep = is_max & (smooth >= rel_threshold * smooth.max())
    mids = delta_traces.midpoints[order]
    angles = delta_traces.angles[order]
    n = len(smooth)
    peaks = []
    for i in np.flatnonzero(keep):
        # sub-edge refinement: parabola through the three samples at the top
        il, ir = (i - 1) % n, (i + 1) % n
        th_l = angles[i] + ((angles[il] - angles[i] + np.pi) % (2 * np.pi) - np.pi)
        th_r = angles[i] + ((angles[ir] - angles[i] + np.pi) % (2 * np.pi) - np.pi)
        y_l, y_c, y_r = smooth[il], smooth[i], smooth[ir]
        denom = (th_l - angles[i]) * (y_r - y_c) - (th_r - angles[i]) * (y_l - y_c)
        if abs(denom) > 0.0:
            theta = angles[i] + 0.5 * (
                (th_l - angles[i]) ** 2 * (y_r - y_c)
                - (th_r - angles[i]) ** 2 * (y_l - y_c)) / denom
        else:
            theta = angles[i]
        radius = np.linalg.norm(mids[i])
        point = radius * np.array([np.cos(theta), np.sin(theta)])
        normal = np.array([np.cos(theta), np.sin(theta)])
        peaks.append(Peak(point=point, normal=normal, height=float(smooth[i])))
    peaks.sort(key=lambda pk: -pk.height)
    if not peaks:
        raise NoPeakError("no local maximum above the peak threshold")
    return PeakSet(tuple(peaks))


def cost_J(support, a: float, data: TraceData, tt: TaylorTrace) -> float:
    """Half the squared arc-weighted misfit of the Taylor model at amplitude a."""
    if data.values.shape != tt.terms[0].shape or \
            not np.array_equal(data.midpoints, tt.midpoints):
        raise ValueError("data and Taylor traces live on different curves")
    resid = data.values - tt.eval_delta(a)
    return 0.5 * float(np.sum(np.abs(resid) ** 2 * tt.arc_lengths))


def transfer_trace(data: TraceData, model: BackgroundModel) -> TraceData:
    """Interpolate measured traces onto the model's measurement curve."""
    tag = model.mesh.tag(model.curve_tag)
    angles = np.arctan2(tag.midpoints[:, 1], tag.midpoints[:, 0])
    return TraceData(curve_tag=model.curve_tag, midpoints=tag.midpoints,
                     arc_lengths=tag.lengths,
                     values=data.interp_values(angles),
                     directions=data.directions)


@dataclass(frozen=True)
class ReconstructionResult:
    support: object
    amplitude: float
    cost: float
    n_evals: int
    trace: np.ndarray                 # optimizer per-iteration best values
    errors: dict | None = None        # relative errors vs ground truth


class CostEvaluator:
    """Reduced cost over support parameters with inner amplitude search.

    For each candidate support the Taylor traces are computed once (reusing
    the model's background factorization); the amplitude profile J(a) is
    then a polynomial evaluated through precomputed inner products, so the
    golden-section search costs no further solves.  Supports that leave the
    admissible interior region or capture no mesh triangle score a large
    penalty instead of failing.
    """

    def __init__(self, model: BackgroundModel, data: TraceData,
                 inner_radius: float = 0.7, order: int = 4,
                 max_order: int = 10, term_ratio_tol: float = 0.01,
                 amplitude_bracket: tuple[float, float] = (-0.99, 0.99),
                 golden_tol: float = 1e-5):
        if not np.array_equal(data.midpoints,
                              model.mesh.tag(model.curve_tag).midpoints):
            data = transfer_trace(data, model)
        self.model = model
        self.data = data
        self.inner_radius = inner_radius
        self.order = order
        self.max_order = max_order
        self.term_ratio_tol = term_ratio_tol
        self.amplitude_bracket = amplitude_bracket
        self.golden_tol = golden_tol
        self.arcs = data.arc_lengths
        self.data_energy = 0.5 * float(
            np.sum(np.abs(data.values) ** 2 * self.arcs))
        self.penalty = 1e6 * self.data_energy if self.data_energy > 0.0 else 1e6
        self.n_evals = 0
        self._centroid_radii = np.linalg.norm(model.mesh.centroids(), axis=1)

    def admissible(self, support) -> bool:
        covered = coverage(self.model.mesh, support) > 0.0
        if not np.any(covered):
            return False
        return bool(np.all(self._centroid_radii[covered] < self.inner_radius))

    def amplitude_profile(self, tt: TaylorTrace):
        """J(a) through the Gram matrix of {data, T^(1), ..., T^(N)}."""
        N = tt.order
        terms = tt.terms[1:]                     # (N, n_waves, n_points)
        w = self.arcs
        b = np.array([np.sum((terms[n] * np.conj(self.data.values)).real * w)
                      for n in range(N)])
        G = np.array([[np.sum((terms[n] * np.conj(terms[m])).real * w)
                       for m in range(N)] for n in range(N)])
        c0 = 2.0 * self.data_energy
        fact = np.array([factorial(n + 1) for n in range(N)], dtype=float)

        def profile(a: float) -> float:
            alpha = np.array([a ** (n + 1) for n in range(N)]) / fact
            return 0.5 * float(c0 - 2.0 * alpha @ b + alpha @ G @ alpha)

        return profile

    def optimal_amplitude(self, tt: TaylorTrace) -> tuple[float, float]:
        profile = self.amplitude_profile(tt)
        lo, hi = self.amplitude_bracket
        return golden_section(profile, lo, hi, tol=self.golden_tol)

    def reduced_cost(self, support) -> tuple[float, float]:
        """(best amplitude, cost) for a candidate support, or penalty."""
        self.n_evals += 1
        if not self.admissible(support):
            return 0.0, self.penalty
        order = self.order
        while True:
            tt = self.model.taylor_trace(support, order)
            a, j = self.optimal_amplitude(tt)
            if order >= self.max_order or \
                    tt.last_term_ratio(a) <= self.term_ratio_tol:
                return a, j
            order = min(order + 2, self.max_order)

    def final_result(self, support, powell_res) -> ReconstructionResult:
        """Re-evaluate the cost at the reported optimum (result invariant)."""
        a, j = self.reduced_cost(support)
        return ReconstructionResult(support=support, amplitude=a, cost=j,
                                    n_evals=self.n_evals,
                                    trace=powell_res.trace)


def _guarded(builder, evaluator):
    """Wrap a params->support builder into a penalized scalar objective."""

    def objective(params):
        try:
            support = builder(params)
        except InvalidGeometryError:
            return evaluator.penalty
        try:
            _, j = evaluator.reduced_cost(support)
        except DegenerateSupportError:
            return evaluator.penalty
        return j

    return objective


def _powell_with_restart(objective, x0, ftol, max_iter, step0, restarts=1):
    """Run Powell, then warm-start again with a fresh direction set.

    The ellipse misfit couples both semi-axes to the amplitude in a long
    flat valley; a restart from the first optimum with fresh coordinate
    directions routinely escapes the plateau where the collapsed direction
    set stagnated.
    """
    res = powell_minimize(objective, x0, ftol=ftol, max_iter=max_iter,
                          step0=step0)
    for _ in range(restarts):
        again = powell_minimize(objective, res.x, ftol=ftol,
                                max_iter=max_iter, step0=step0)
        if again.fun >= res.fun:
            break
        res = again
    return res


def reconstruct_ball(evaluator: CostEvaluator, peak: Peak,
                     d0: float = 0.4, r0: float = 0.15,
                     ftol: float = 1e-6, max_iter: int = 100) -> ReconstructionResult:
    """Fit a single ball behind the peak: center = x_hat - d * n_hat."""

    def builder(params):
        d, r = params
        center = peak.point - d * peak.normal
        return Ball(tuple(center), r)

    res = powell_minimize(_guarded(builder, evaluator), np.array([d0, r0]),
                          ftol=ftol, max_iter=max_iter, step0=np.array([0.05]))
    return evaluator.final_result(builder(res.x), res)


def reconstruct_multi(evaluator: CostEvaluator, peaks: PeakSet,
                      d0: float = 0.4, r0: float = 0.15,
                      ftol: float = 1e-6, max_iter: int = 100) -> ReconstructionResult:
    """Fit one ball per peak with a single shared amplitude."""
    P = len(peaks)
    if P < 1:
        raise ValueError("reconstruct_multi needs at least one peak")

    def builder(params):
        ds, rs = params[:P], params[P:]
        return Union(tuple(Ball(tuple(peaks[i].point - ds[i] * peaks[i].normal),
                                rs[i]) for i in range(P)))

    x0 = np.concatenate([np.full(P, d0), np.full(P, r0)])
    res = powell_minimize(_guarded(builder, evaluator), x0,
                          ftol=ftol, max_iter=max_iter, step0=np.array([0.05]))
    return evaluator.final_result(builder(res.x), res)


def reconstruct_ellipse(evaluator: CostEvaluator, peak: Peak,
                        d0: float = 0.4, r0: float = 0.15,
                        ftol: float = 1e-6, max_iter: int = 100) -> ReconstructionResult:
    """Fit an axis-aligned ellipse behind the peak."""

    def builder(params):
        d, rx, ry = params
        center = peak.point - d * peak.normal
        return Ellipse(tuple(center), rx, ry)

    res = _powell_with_restart(_guarded(builder, evaluator),
                               np.array([d0, r0, r0]), ftol, max_iter,
                               np.array([0.05]))
    return evaluator.final_result(builder(res.x), res)


def refine_fourier(evaluator: CostEvaluator, ball_init: ReconstructionResult,
                   peak: Peak, nr_max: int = 4,
                   improve_tol: float = 0.01,
                   ftol: float = 1e-6, max_iter: int = 100) -> ReconstructionResult:
    """Refine a ball reconstruction into a star-shaped boundary.

    Fourier harmonics of the radius are added one order at a time, each
    stage warm-started from the previous one with the new coefficients at
    zero; refinement stops once the relative cost improvement drops below
    ``improve_tol``.
    """
    if not isinstance(ball_init.support, Ball):
        raise ValueError("refine_fourier needs a ball-stage warm start")
    ball = ball_init.support
    d_init = float((peak.point - np.asarray(ball.center)) @ peak.normal)
    best_params = np.array([d_init, ball.r])
    best_cost = ball_init.cost
    best_res = None
    for nr in range(1, nr_max + 1):

        def builder(params, nr=nr):
            d, r0 = params[0], params[1]
            coeffs = tuple((params[2 + 2 * n], params[3 + 2 * n])
                           for n in range(nr))
            center = peak.point - d * peak.normal
            return FourierStar(tuple(center), r0, coeffs)

        x0 = np.concatenate([best_params,
                             np.zeros(2 * nr - (len(best_params) - 2))])
        res = powell_minimize(_guarded(builder, evaluator), x0,
                              ftol=ftol, max_iter=max_iter,
                              step0=np.array([0.02]))
        improved = (best_cost - res.fun) / best_cost if best_cost > 0.0 else 0.0
        if res.fun < best_cost:
            best_params = res.x
            best_cost = res.fun
            best_res = (builder(res.x), res)
        if improved < improve_tol:
            break
    if best_res is None:
        return ball_init
    support, res = best_res
    return evaluator.final_result(support, res)


def support_errors(support, amplitude: float, truth, truth_amplitude: float) -> dict:
    """Relative errors of the reconstructed parameters against ground truth."""
    errors = {}
    if isinstance(support, Ball) and isinstance(truth, Ball):
        c = np.asarray(support.center)
        ce = np.asarray(truth.center)
        errors["center"] = float(np.linalg.norm(c - ce) / np.linalg.norm(ce))
        errors["radius"] = abs(support.r - truth.r) / truth.r
    if isinstance(support, Ellipse) and isinstance(truth, Ellipse):
        c = np.asarray(support.center)
        ce = np.asarray(truth.center)
        errors["center"] = float(np.linalg.norm(c - ce) / np.linalg.norm(ce))
        errors["rx"] = abs(support.rx - truth.rx) / truth.rx
        errors["ry"] = abs(support.ry - truth.ry) / truth.ry
    if truth_amplitude != 0.0:
        errors["amplitude"] = abs(amplitude - truth_amplitude) / abs(truth_amplitude)
    return errors

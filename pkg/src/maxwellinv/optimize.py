"""Derivative-free minimization: golden-section search and Powell's method."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, tol: float = 1e-5):
    """Minimize a scalar function on [lo, hi] by golden-section search.

    Returns ``(x, fx)`` where x is the midpoint of the final bracket and fx
    the best interior value seen.  The number of function evaluations is
    bounded by ceil(log((hi-lo)/tol) / log(1/rho)) + 2.
    """
    if hi <= lo:
        raise ValueError("golden_section needs lo < hi")
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for v in (fc, fd):
        if not np.isfinite(v):
            raise FloatingPointError("objective returned a non-finite value")
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
            if not np.isfinite(fc):
                raise FloatingPointError("objective returned a non-finite value")
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
            if not np.isfinite(fd):
                raise FloatingPointError("objective returned a non-finite value")
    return 0.5 * (a + b), min(fc, fd)


def _bracket(g, step: float = 0.1, grow: float = 2.0, max_expand: int = 40):
    """Expand [0, step] about t=0 until a minimum of g is bracketed.

    Returns (lo, hi) with lo < hi containing a local minimizer of g along
    the line; searches both directions.
    """
    g0 = g(0.0)
    t = step
    gp = g(t)
    if gp >= g0:
        # try the negative direction
        tm = -step
        gm = g(tm)
        if gm >= g0:
            return -step, step
        t, gp = tm, gm
        grow_sign = -1.0
    else:
        grow_sign = 1.0
    prev_t = 0.0
    for _ in range(max_expand):
        nxt = t + grow_sign * abs(t) * (grow - 1.0) + grow_sign * step
        gn = g(nxt)
        if gn >= gp:
            lo, hi = sorted((prev_t, nxt))
            return lo, hi
        prev_t = t
        t, gp = nxt, gn
    lo, hi = sorted((prev_t, t))
    return lo, hi


def line_minimize(f, x: np.ndarray, direction: np.ndarray, tol: float = 1e-5,
                  step: float = 0.1):
    """Minimize f along x + t * direction; returns (new_x, new_f)."""
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        return np.array(x, dtype=float), f(x)
    d = d / norm

    def g(t):
        return f(x + t * d)

    lo, hi = _bracket(g, step=step)
    t, ft = golden_section(g, lo, hi, tol=tol)
    f0 = g(0.0)
    if ft >= f0:
        return np.array(x, dtype=float), f0
    return x + t * d, ft


@dataclass(frozen=True)
class PowellResult:
    x: np.ndarray
    fun: float
    n_iters: int
    trace: np.ndarray        # best value after each outer iteration
    converged: bool


def powell_minimize(f, x0: np.ndarray, ftol: float = 1e-6, max_iter: int = 100,
                    line_tol: float = 1e-5,
                    step0: np.ndarray | None = None) -> PowellResult:
    """Powell's direction-set method without derivatives.

    Each outer iteration line-minimizes along every direction in the set,
    then replaces the direction of largest single-step decrease with the
    overall displacement.  Stops when the relative decrease of an outer
    iteration falls below ``ftol``.  ``step0`` sets the initial bracketing
    step of every line search (default 0.1).
    """
    x = np.array(x0, dtype=float)
    n = len(x)
    step = 0.1 if step0 is None else float(np.max(np.abs(step0)))
    dirs = [np.eye(n)[i] for i in range(n)]
    fx = f(x)
    if not np.isfinite(fx):
        raise FloatingPointError("objective is non-finite at the start point")
    history = []
    converged = False
    for it in range(max_iter):
        x_start, f_start = x.copy(), fx
        biggest_drop, drop_index = 0.0, 0
        for i, d in enumerate(dirs):
            x_new, f_new = line_minimize(f, x, d, tol=line_tol, step=step)
            drop = fx - f_new
            if drop > biggest_drop:
                biggest_drop, drop_index = drop, i
            x, fx = x_new, f_new
        history.append(fx)
        if f_start - fx <= ftol * (abs(f_start) + abs(fx) + 1e-300):
            converged = True
            break
        displacement = x - x_start
        if np.linalg.norm(displacement) > 0.0:
            dirs.pop(drop_index)
            dirs.append(displacement / np.linalg.norm(displacement))
            x_new, f_new = line_minimize(f, x, displacement, tol=line_tol, step=step)
            x, fx = x_new, f_new
            history[-1] = fx
    return PowellResult(x=x, fun=fx, n_iters=len(history),
                        trace=np.array(history), converged=converged)

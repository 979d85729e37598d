"""Recovery-upon-default curves: raw means, local smoothing, gamma-kernel fit.

Raw per-age recovery percentages (recovered amount over original amount,
averaged over loans defaulting at that age) are smoothed with a local-linear
tricube regression and then fitted to the three-parameter kernel
R(x) = c * x^(k-1) * exp(-x/theta), which supports extrapolation beyond the
observed default ages.  When k > 1 the kernel has a single interior peak at
(k-1)*theta.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import NumericalError

__all__ = [
    "RecoveryPoints",
    "GammaKernelFit",
    "RecoveryFitError",
    "recovery_points",
    "smooth",
    "fit_gamma_kernel",
    "recovery_at",
]

DEFAULT_SPAN = 0.75
DEFAULT_RESTARTS = 10
DEFAULT_BUDGET = 10000
_MIN_POINTS = 5


@dataclass(frozen=True)
class RecoveryPoints:
    """Mean recovery fraction and loan count per default age (absent ages omitted)."""

    ages: np.ndarray
    mean: np.ndarray
    count: np.ndarray


class RecoveryFitError(NumericalError):
    """Optimizer exhausted its budget; carries the best fit found so far."""

    def __init__(self, message: str, best: "GammaKernelFit | None" = None):
        super().__init__(message)
        self.best = best


def recovery_points(observations) -> RecoveryPoints:
    """Average recovery percentages by default age.

    observations is an iterable of (age, recovered_fraction) pairs.  Values
    above 1 are kept but flagged with a warning; above 1.5 they are rejected
    as data errors.
    """
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for age, pct in observations:
        age = int(age)
        pct = float(pct)
        if pct < 0 or pct > 1.5:
            raise ValueError(f"recovery fraction {pct} at age {age} outside [0, 1.5]")
        if pct > 1.0:
            warnings.warn(f"recovery fraction {pct} above 1 at age {age}", stacklevel=2)
        sums[age] = sums.get(age, 0.0) + pct
        counts[age] = counts.get(age, 0) + 1
    if not sums:
        raise ValueError("no recovery observations")
    ages = np.array(sorted(sums), dtype=np.int64)
    mean = np.array([sums[a] / counts[a] for a in ages])
    count = np.array([counts[a] for a in ages], dtype=np.int64)
    return RecoveryPoints(ages=ages, mean=mean, count=count)


def smooth(points, span: float = DEFAULT_SPAN) -> np.ndarray:
    """Local-linear tricube smoother evaluated on the observed age grid.

    For each target age the nearest ceil(span * n) points define the
    neighborhood; weights decay tricubically with distance over the
    neighborhood radius.  Exact on affine data.
    """
    if isinstance(points, RecoveryPoints):
        x = points.ages.astype(np.float64)
        y = points.mean
    else:
        x, y = points
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < _MIN_POINTS:
        raise ValueError(f"smoothing needs at least {_MIN_POINTS} points, got {n}")
    if not 0.0 < span <= 1.0:
        raise ValueError("span must lie in (0, 1]")
    r = min(max(int(math.ceil(span * n)), 2), n)
    fitted = np.empty(n)
    for i in range(n):
        dist = np.abs(x - x[i])
        h = np.sort(dist)[r - 1]
        if h <= 0:
            raise ValueError("degenerate age grid: neighborhood radius is zero")
        w = np.clip(dist / h, 0.0, 1.0)
        w = (1.0 - w**3) ** 3
        sw = w.sum()
        xm = (w * x).sum() / sw
        ym = (w * y).sum() / sw
        sxx = (w * (x - xm) ** 2).sum()
        if sxx <= 0:
            fitted[i] = ym
            continue
        beta = (w * (x - xm) * (y - ym)).sum() / sxx
        fitted[i] = ym + beta * (x[i] - xm)
    return fitted


@dataclass(frozen=True)
class GammaKernelFit:
    """Least-squares parameters of c * x^(k-1) * exp(-x/theta)."""

    c: float
    k: float
    theta: float
    residual: float

    def __post_init__(self) -> None:
        if self.c <= 0 or self.k <= 0 or self.theta <= 0:
            raise ValueError("gamma-kernel parameters must be positive")

    @property
    def peak_age(self) -> float:
        """Interior maximum location (k-1)*theta; 0 when the kernel is decreasing."""
        return (self.k - 1.0) * self.theta if self.k > 1.0 else 0.0


def _kernel(x: np.ndarray, c: float, k: float, theta: float) -> np.ndarray:
    return c * x ** (k - 1.0) * np.exp(-x / theta)


def _log_linear_seed(x: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    """Solve log R = log c + (k-1) log x - x/theta by linear least squares.

    Exact-generation data is recovered to float precision, which gives the
    simplex an essentially converged starting point.
    """
    pos = y > 0
    if pos.sum() < 3:
        return None
    lx = np.log(x[pos])
    design = np.column_stack([np.ones(pos.sum()), lx, -x[pos]])
    coef, *_ = np.linalg.lstsq(design, np.log(y[pos]), rcond=None)
    log_c, k_minus_1, inv_theta = coef
    if inv_theta <= 0 or k_minus_1 <= -1:
        return None
    return np.array([log_c, math.log(k_minus_1 + 1.0), -math.log(inv_theta)])


def fit_gamma_kernel(ages, values, restarts: int = DEFAULT_RESTARTS,
                     budget: int = DEFAULT_BUDGET, seed: int = 0) -> GammaKernelFit:
    """Fit the gamma kernel to a recovery curve by Nelder-Mead least squares.

    Parameters are optimized in log space (so they stay positive) from a
    log-linear warm start plus seeded random perturbations; the evaluation
    budget is split across restarts.  The best (residual, restart index)
    wins, keeping the reduction deterministic.  Values may dip slightly
    below zero (smoothers overshoot near the baseline); least squares
    handles that, only a curve with no positive mass is rejected.
    """
    x = np.asarray(ages, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.size < _MIN_POINTS:
        raise ValueError(f"fit needs at least {_MIN_POINTS} points, got {x.size}")
    if np.any(x <= 0):
        raise ValueError("ages must be positive")
    if not np.any(y > 0):
        raise ValueError("cannot fit a curve with no positive values")

    def objective(log_params: np.ndarray) -> float:
        c, k, theta = np.exp(np.clip(log_params, -50.0, 50.0))
        with np.errstate(over="ignore"):
            resid = y - _kernel(x, c, k, theta)
        if not np.all(np.isfinite(resid)):
            return 1e300
        return float(resid @ resid)

    seed_point = _log_linear_seed(x, y)
    if seed_point is None:
        peak = float(x[int(np.argmax(y))])
        seed_point = np.array([math.log(max(y.max(), 1e-6)), math.log(2.0),
                               math.log(max(peak, 1.0))])
    rng = np.random.default_rng(seed)
    starts = [seed_point]
    for _ in range(restarts - 1):
        starts.append(seed_point + rng.normal(scale=0.5, size=3))

    per_start = max(budget // max(restarts, 1), 100)
    best = None
    best_key = None
    any_converged = False
    for idx, start in enumerate(starts):
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"maxfev": per_start, "xatol": 1e-12,
                                "fatol": 1e-16, "adaptive": True})
        any_converged = any_converged or bool(res.success)
        key = (res.fun, idx)
        if best_key is None or key < best_key:
            best_key = key
            best = res.x
    c, k, theta = np.exp(best)
    fit = GammaKernelFit(c=float(c), k=float(k), theta=float(theta),
                         residual=float(best_key[0]))
    if not any_converged:
        raise RecoveryFitError(
            f"gamma-kernel fit exhausted its budget ({budget} evaluations)", best=fit)
    return fit


def recovery_at(fit: GammaKernelFit, age: float) -> float:
    """Evaluate the fitted kernel at an age, clamped to [0, 1]."""
    if age < 0:
        raise ValueError("age must be nonnegative")
    if age == 0:
        value = 0.0 if fit.k >= 1.0 else math.inf
    else:
        value = fit.c * age ** (fit.k - 1.0) * math.exp(-age / fit.theta)
    return min(max(value, 0.0), 1.0)


def write_recovery_csv(path: str | Path, points: RecoveryPoints,
                       smoothed: np.ndarray, fit: GammaKernelFit) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age", "raw_mean", "smoothed", "fitted"])
        for i in range(points.ages.size):
            age = int(points.ages[i])
            writer.writerow([age, repr(float(points.mean[i])),
                             repr(float(smoothed[i])),
                             repr(recovery_at(fit, age))])


def fit_to_json(fit: GammaKernelFit) -> str:
    return json.dumps({
        "c": fit.c, "k": fit.k, "theta": fit.theta,
        "residual": fit.residual, "peak_age": fit.peak_age,
    }, indent=2)


def fit_from_json(text: str) -> GammaKernelFit:
    doc = json.loads(text)
    return GammaKernelFit(c=float(doc["c"]), k=float(doc["k"]),
                          theta=float(doc["theta"]),
                          residual=float(doc.get("residual", 0.0)))

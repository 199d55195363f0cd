"""Learning-curve statistics used to score and compare training campaigns."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats


class InvalidInputError(ValueError):
    pass


@dataclass(frozen=True)
class RunSetSummary:
    mean: float
    ci_low: float
    ci_high: float
    std: float
    n_runs: int

    def to_dict(self) -> dict:
        return asdict(self)


def _curve(curve) -> np.ndarray:
    c = np.asarray(curve, dtype=float).ravel()
    if c.size == 0:
        raise InvalidInputError("learning curve is empty")
    if not np.isfinite(c).all():
        raise InvalidInputError("learning curve contains non-finite values")
    return c


def auc(curve) -> float:
    """Area under a learning curve: the sum of per-episode returns."""
    return float(_curve(curve).sum())


def final_mean(curve, window: int = 100) -> float:
    c = _curve(curve)
    if window < 1 or c.size < window:
        raise InvalidInputError(f"need at least {window} episodes, got {c.size}")
    return float(c[-window:].mean())


def _samples(samples, minimum: int = 2) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise InvalidInputError(f"need at least {minimum} samples, got {x.size}")
    if not np.isfinite(x).all():
        raise InvalidInputError("samples contain non-finite values")
    return x


def mean_ci(samples, level: float = 0.95, method: str = "t",
            n_boot: int = 2000, seed: int = 0) -> RunSetSummary:
    """Mean with a two-sided confidence interval.

    ``method="t"`` gives the Student-t interval ``mean +- t * s / sqrt(n)``;
    ``method="bootstrap"`` gives a seeded percentile bootstrap interval.
    """
    x = _samples(samples)
    n = x.size
    m = float(x.mean())
    s = float(x.std(ddof=1))
    if not 0.0 <= level < 1.0:
        raise InvalidInputError(f"level must be in [0, 1), got {level}")
    if method == "t":
        half = float(stats.t.ppf(0.5 + level / 2, n - 1)) * s / math.sqrt(n)
        lo, hi = m - half, m + half
    elif method == "bootstrap":
        rng = np.random.default_rng(seed)
        means = x[rng.integers(0, n, size=(n_boot, n))].mean(axis=1)
        lo, hi = np.quantile(means, [0.5 - level / 2, 0.5 + level / 2])
        lo, hi = min(float(lo), m), max(float(hi), m)
    else:
        raise InvalidInputError(f"unknown CI method {method!r}")
    return RunSetSummary(m, lo, hi, s, n)


def std_ci(samples, level: float = 0.95) -> tuple[float, float]:
    """Chi-square interval for the population standard deviation."""
    x = _samples(samples)
    n = x.size
    s = x.std(ddof=1)
    a = (1 - level) / 2
    lo = s * math.sqrt((n - 1) / stats.chi2.ppf(1 - a, n - 1))
    hi = s * math.sqrt((n - 1) / stats.chi2.ppf(a, n - 1))
    return float(lo), float(hi)


def t_test(a, b) -> tuple[float, float]:
    """Welch's unequal-variance t-test. Returns ``(t, two-tailed p)``."""
    x = _samples(a)
    y = _samples(b)
    vx = x.var(ddof=1) / x.size
    vy = y.var(ddof=1) / y.size
    diff = x.mean() - y.mean()
    se2 = vx + vy
    if se2 == 0.0:
        if diff == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (vx ** 2 / (x.size - 1) + vy ** 2 / (y.size - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return float(t), float(min(p, 1.0))


def tuning_loss(curves: Sequence, level: float = 0.95) -> float:
    """Upper CI bound of the mean negative AUC over repeated runs.

    Lower is better; used as a pessimistic score for a hyperparameter set.
    """
    if len(curves) < 2:
        raise InvalidInputError(f"need at least 2 curves, got {len(curves)}")
    return mean_ci([-auc(c) for c in curves], level).ci_high


def summarize(values, level: float = 0.95, method: str = "t") -> dict:
    """Summary fields for one metric across runs: mean and std, each with a CI."""
    s = mean_ci(values, level, method)
    lo, hi = std_ci(values, level)
    return {"mean": s.mean, "ci_low": s.ci_low, "ci_high": s.ci_high,
            "std": s.std, "std_ci_low": lo, "std_ci_high": hi, "n_runs": s.n_runs}

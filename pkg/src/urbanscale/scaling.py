"""Urban scaling fits: Y = Y0 * N**beta estimated on log-binned city data.

Cities with zero count are dropped (their log is undefined), the remaining
ones are grouped into bins equally spaced in log N, and a weighted straight
line is fitted through the bin means of (log N, log Y).  In ``count-sum``
mode a bin's weight is its total count, i.e. its standard error is taken to
shrink like one over the square root of that total.  Natural logs throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

COUNT_SUM = "count-sum"
UNIFORM = "uniform"
WEIGHT_MODES = (COUNT_SUM, UNIFORM)

SUBLINEAR, LINEAR, SUPERLINEAR = "sublinear", "linear", "superlinear"

_EDGE_SNAP = 1e-9


class FitImpossible(ValueError):
    """Not enough distinct data to fit a line."""


@dataclass(frozen=True)
class CityObservation:
    city_id: str
    population: float
    count: float

    def __post_init__(self):
        if not self.population >= 1:
            raise ValueError(f"population must be >= 1, got {self.population}")
        if not self.count >= 0:
            raise ValueError(f"count must be >= 0, got {self.count}")


@dataclass(frozen=True)
class BinnedPoint:
    mean_log_n: float
    mean_log_y: float
    n_cities: int
    weight: float


@dataclass(frozen=True)
class ScalingFit:
    beta: float
    beta_stderr: float
    log_y0: float
    r2: float
    n_bins: int
    n_cities: int
    regime: str
    zero_cities_excluded: int = 0

    @property
    def log10_y0(self) -> float:
        return self.log_y0 / math.log(10.0)

    @property
    def few_bins(self) -> bool:
        """Two-bin fits have no residual degrees of freedom; their stderr is 0 by convention."""
        return self.n_bins == 2


@dataclass(frozen=True)
class FitConfig:
    n_bins: int = 15
    weight_mode: str = COUNT_SUM

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError(f"n_bins must be >= 2, got {self.n_bins}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")


def classify(beta: float, stderr: float) -> str:
    if beta - 1.0 > stderr:
        return SUPERLINEAR
    if 1.0 - beta > stderr:
        return SUBLINEAR
    return LINEAR


def bin_indices(log_n: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin of each log-population; bins are right-closed, the first also holds the minimum."""
    lo, hi = float(log_n.min()), float(log_n.max())
    t = (log_n - lo) / (hi - lo) * n_bins
    near = np.rint(t)
    t = np.where(np.abs(t - near) < _EDGE_SNAP, near, t)
    return np.clip(np.ceil(t).astype(int) - 1, 0, n_bins - 1)


def bin_logspace(obs: Sequence[CityObservation], n_bins: int) -> list[BinnedPoint]:
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    kept = [o for o in obs if o.count > 0]
    if len({o.population for o in kept}) < 2:
        raise FitImpossible("need at least two distinct populations with non-zero counts")
    n = np.array([o.population for o in kept], dtype=float)
    y = np.array([o.count for o in kept], dtype=float)
    log_n, log_y = np.log(n), np.log(y)
    idx = bin_indices(log_n, n_bins)
    out = []
    for b in range(n_bins):
        sel = idx == b
        k = int(sel.sum())
        if k:
            out.append(BinnedPoint(float(log_n[sel].mean()), float(log_y[sel].mean()), k, float(y[sel].sum())))
    return out


def fit_wls(bins: Sequence[BinnedPoint], weight_mode: str = COUNT_SUM) -> ScalingFit:
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")
    if len(bins) < 2:
        raise FitImpossible("need at least two bins")
    x = np.array([b.mean_log_n for b in bins])
    y = np.array([b.mean_log_y for b in bins])
    w = np.array([b.weight for b in bins]) if weight_mode == COUNT_SUM else np.ones(len(bins))
    sw = w.sum()
    xm = float((w * x).sum() / sw)
    ym = float((w * y).sum() / sw)
    dx, dy = x - xm, y - ym
    sxx = float((w * dx * dx).sum())
    if sxx <= 0.0 or np.all(x == x[0]):
        raise FitImpossible("all bins share one log-population")
    beta = float((w * dx * dy).sum() / sxx)
    intercept = ym - beta * xm
    resid = dy - beta * dx
    ss_res = float((w * resid * resid).sum())
    ss_tot = float((w * dy * dy).sum())
    k = len(bins)
    stderr = math.sqrt(ss_res / (k - 2) / sxx) if k > 2 else 0.0
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(
        beta=beta,
        beta_stderr=stderr,
        log_y0=intercept,
        r2=min(1.0, max(0.0, r2)),
        n_bins=k,
        n_cities=int(sum(b.n_cities for b in bins)),
        regime=classify(beta, stderr),
    )


def fit_scaling(obs: Sequence[CityObservation], config: FitConfig = FitConfig()) -> ScalingFit:
    bins = bin_logspace(obs, config.n_bins)
    fit = fit_wls(bins, config.weight_mode)
    zeros = sum(1 for o in obs if o.count == 0)
    return replace(fit, zero_cities_excluded=zeros)

"""Treatment success S(t), its cross-trial average, and the treatment time T_fin."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chemfield import SitePattern


@dataclass(frozen=True)
class MetricParams:
    delta: int = 30000
    D_thresh: float = 3e-7
    delta_prime: int = 500

    def __post_init__(self):
        if self.delta_prime < 1 or self.delta < 1:
            raise ValueError("delta and delta_prime must be positive")
        if self.delta % self.delta_prime:
            raise ValueError(f"delta_prime={self.delta_prime} must divide delta={self.delta}")
        if self.D_thresh < 0:
            raise ValueError("D_thresh must be >= 0")


@dataclass(frozen=True)
class SuccessSeries:
    times: np.ndarray
    values: np.ndarray

    def at(self, t: int) -> float:
        idx = np.searchsorted(self.times, t)
        if idx >= len(self.times) or self.times[idx] != t:
            raise KeyError(f"t={t} is not a sampled time")
        return float(self.values[idx])


def success(K, pattern: SitePattern, r_KM: float) -> float:
    """Fraction of total demand treated, with each site's credit capped at its demand."""
    K = np.asarray(K, dtype=np.float64)
    return float(np.minimum(K / r_KM, pattern.demands).sum() / pattern.demands.sum())


def success_series(times, K_series, pattern: SitePattern, r_KM: float) -> SuccessSeries:
    """S at every sampled time, from a ``(len(times), c)`` array of K counts."""
    K = np.asarray(K_series, dtype=np.float64)
    vals = np.minimum(K / r_KM, pattern.demands).sum(axis=1) / pattern.demands.sum()
    return SuccessSeries(np.asarray(times), vals)


def s_avg(series: Sequence[SuccessSeries]) -> SuccessSeries:
    if not series:
        raise ValueError("need at least one series")
    times = series[0].times
    for s in series[1:]:
        if not np.array_equal(s.times, times):
            raise ValueError("all series must share one time grid")
    return SuccessSeries(times, np.mean([s.values for s in series], axis=0))


def s_std(series: Sequence[SuccessSeries]) -> np.ndarray:
    """Population standard deviation across trials at each sampled time."""
    return np.std([s.values for s in series], axis=0)


def t_fin(avg: SuccessSeries, params: MetricParams) -> int | None:
    """First sampled ``t`` whose forward window rate ``(S(t+delta)-S(t))/delta`` is <= D.

    Only ``t`` with ``t + delta`` inside the recorded horizon qualify; returns
    ``None`` when no such time exists.
    """
    times = np.asarray(avg.times)
    if len(times) > 1 and np.any(np.diff(times) != params.delta_prime):
        raise ValueError("series is not sampled every delta_prime steps")
    lag = params.delta // params.delta_prime
    if len(times) <= lag:
        return None
    rate = (avg.values[lag:] - avg.values[:-lag]) / params.delta
    hits = np.nonzero(rate <= params.D_thresh)[0]
    return int(times[hits[0]]) if len(hits) else None

"""Random case generators and independent reference implementations for the tests."""

from __future__ import annotations

import math

import mpmath
import numpy as np

from nanoswarm.chemfield import DepositLog, FieldParams, SitePattern

PHI = 0.005


def random_pattern(rng: np.random.Generator, max_sites: int = 5, min_sep: float = 3e-4) -> SitePattern:
    c = int(rng.integers(1, max_sites + 1))
    pts: list[np.ndarray] = []
    while len(pts) < c:
        p = rng.uniform(0.0005, PHI - 0.0005, size=2)
        if all(np.hypot(*(p - q)) > min_sep for q in pts):
            pts.append(p)
    return SitePattern(np.array(pts), rng.integers(1, 40, size=c).astype(float))


def random_log(rng: np.random.Generator, c: int, t: int, max_drops: int = 12) -> DepositLog:
    log = DepositLog(c)
    for _ in range(int(rng.integers(0, max_drops + 1))):
        j = int(rng.integers(c))
        log.record(j, int(rng.integers(0, t)), A=bool(rng.integers(2)), R=bool(rng.integers(2)))
    return log


def random_params(rng: np.random.Generator) -> FieldParams:
    return FieldParams(
        m=float(10 ** rng.uniform(-6.5, -5.5)),
        P_A=float(rng.choice([0.0, 2.0, 10.0, 50.0])),
        D_A=float(10 ** rng.uniform(-10, -8.5)),
        P_R=float(rng.choice([0.0, 10.0, 50.0])),
        D_R=float(10 ** rng.uniform(-10, -8.5)),
    )


def random_point_near(rng: np.random.Generator, pattern: SitePattern, scale: float) -> np.ndarray:
    y = pattern.positions[int(rng.integers(pattern.c))]
    return np.clip(y + rng.normal(0.0, scale, size=2), 0.0, PHI)


# -- mpmath reference fields, written straight from the defining sums ------

mpmath.mp.dps = 40


def mp_fields(t, x, pattern: SitePattern, log: DepositLog | None, params: FieldParams):
    """``(M, A, R)`` at ``x`` as mpmath numbers; ``x`` may hold mpf coordinates."""
    x0, x1 = mpmath.mpf(x[0]), mpmath.mpf(x[1])
    m = mpmath.mpf(params.m)
    M = mpmath.mpf(0)
    for y, P in zip(pattern.positions, pattern.demands):
        r2 = (mpmath.mpf(y[0]) - x0) ** 2 + (mpmath.mpf(y[1]) - x1) ** 2
        M += mpmath.mpf(P) * mpmath.exp(-r2 / m)
    M /= mpmath.pi * m

    def diffusing(times, P, D):
        P, D = mpmath.mpf(P), mpmath.mpf(D)
        acc = mpmath.mpf(0)
        for j, ts in enumerate(times):
            y = pattern.positions[j]
            r2 = (mpmath.mpf(y[0]) - x0) ** 2 + (mpmath.mpf(y[1]) - x1) ** 2
            for ts_ in ts:
                dt = t - ts_
                if dt > 0:
                    acc += mpmath.exp(-r2 / (4 * D * dt)) / dt
        return P / (4 * mpmath.pi * D) * acc

    if log is None:
        return M, mpmath.mpf(0), mpmath.mpf(0)
    return M, diffusing(log.A_times, params.P_A, params.D_A), diffusing(log.R_times, params.P_R, params.D_R)


def mp_total(t, x, pattern, log, params):
    M, A, R = mp_fields(t, x, pattern, log, params)
    return M + A - R


def mp_grad(func, x):
    """Gradient of an mpmath scalar function of a 2-vector by mpmath numerical differentiation."""
    x0, x1 = mpmath.mpf(x[0]), mpmath.mpf(x[1])
    return (mpmath.diff(lambda u: func((u, x1)), x0), mpmath.diff(lambda v: func((x0, v)), x1))


def central_diff(f, x, h: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    g = np.empty(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def t_fin_bruteforce(times, values, delta: int, D: float):
    """Scan every sampled time for the first flat forward window."""
    lookup = {int(t): float(v) for t, v in zip(times, values)}
    for t in times:
        t = int(t)
        if t + delta not in lookup:
            break
        if (lookup[t + delta] - lookup[t]) / delta <= D:
            return t
    return None


def wrapped_normal_mean_cos(sigma: float) -> float:
    return math.exp(-0.5 * sigma * sigma)

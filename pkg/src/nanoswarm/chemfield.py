"""Concentration fields of the marker (M), attractant (A) and repellent (R) chemicals.

M is a static sum of Gaussians centred on the cancer sites.  A and R are sums of
instantaneous point-source diffusion kernels, one per payload dropped at a site.
Time is an integer timestep; a payload dropped at step ``t*`` is invisible to
queries at ``t <= t*``.

The scalar kernels are numba-compiled so the trial engine can call them from
its inner loop; the public functions below are thin wrappers around them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit
from scipy import ndimage

__all__ = [
    "SitePattern",
    "FieldParams",
    "DepositLog",
    "FieldSnapshot",
    "Maximum",
    "gamma_M",
    "grad_M",
    "gamma_A",
    "grad_A",
    "gamma_R",
    "grad_R",
    "gamma_tot",
    "grad_tot",
    "find_spurious_maxima",
]

_EMPTY_I = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class SitePattern:
    """Cancer site locations (metres) and their M-signal strengths / demands."""

    positions: np.ndarray
    demands: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 2)
        dem = np.array(self.demands, dtype=np.float64).reshape(-1)
        if len(pos) != len(dem):
            raise ValueError(f"{len(pos)} site positions but {len(dem)} demands")
        if len(pos) == 0:
            raise ValueError("a site pattern needs at least one site")
        if np.any(dem < 0) or not np.any(dem > 0):
            raise ValueError("demands must be >= 0 with at least one > 0")
        if not np.all(np.isfinite(pos)):
            raise ValueError("site positions must be finite")
        pos.setflags(write=False)
        dem.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "demands", dem)

    @property
    def c(self) -> int:
        return len(self.demands)

    @property
    def total_demand(self) -> float:
        return float(self.demands.sum())

    def min_separation(self) -> float:
        if self.c < 2:
            return math.inf
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        return float(dist[np.triu_indices(self.c, 1)].min())

    def validate_domain(self, phi_max: float, epsilon: float) -> None:
        if np.any(self.positions < 0) or np.any(self.positions > phi_max):
            raise ValueError(f"all sites must lie inside [0, {phi_max}]^2")
        if self.min_separation() <= epsilon:
            raise ValueError(f"sites must be pairwise farther apart than epsilon={epsilon}")


@dataclass(frozen=True)
class FieldParams:
    m: float = 1e-6
    P_A: float = 0.0
    D_A: float = 1e-9
    P_R: float = 0.0
    D_R: float = 1e-9

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be > 0")
        if not (self.D_A > 0 and self.D_R > 0):
            raise ValueError("diffusion coefficients must be > 0")
        if self.P_A < 0 or self.P_R < 0:
            raise ValueError("payload sizes must be >= 0")


@dataclass
class DepositLog:
    """Per-site drop history: A and R payload timestamps (multisets) and K counts."""

    c: int
    A_times: list[list[int]] = field(default_factory=list)
    R_times: list[list[int]] = field(default_factory=list)
    K_count: list[int] = field(default_factory=list)

    def __post_init__(self):
        # commit order of (site, t) per chemical; field sums follow it so that
        # rounding matches the engine, which stores deposits as they happen
        self._order: dict[str, list[tuple[int, int]]] = {"A": [], "R": []}
        if not self.A_times:
            self.A_times = [[] for _ in range(self.c)]
        if not self.R_times:
            self.R_times = [[] for _ in range(self.c)]
        if not self.K_count:
            self.K_count = [0] * self.c

    def record(self, site: int, t: int, *, A: bool = False, R: bool = False) -> None:
        """Commit one terminating agent's drop at ``site`` during step ``t``."""
        if t < 0:
            raise ValueError("timestamps are nonnegative")
        self.K_count[site] += 1
        if A:
            self.A_times[site].append(int(t))
            self._order["A"].append((site, int(t)))
        if R:
            self.R_times[site].append(int(t))
            self._order["R"].append((site, int(t)))

    def arrays(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        """Flatten one chemical's history to ``(site_index, timestamp)`` arrays."""
        times = self.A_times if kind == "A" else self.R_times
        order = self._order[kind]
        if order and len(order) == sum(len(ts) for ts in times):
            return (np.array([j for j, _ in order], dtype=np.int64),
                    np.array([t for _, t in order], dtype=np.int64))
        sites = [j for j, ts in enumerate(times) for _ in ts]
        stamps = [t for ts in times for t in ts]
        return np.array(sites, dtype=np.int64), np.array(stamps, dtype=np.int64)

    @classmethod
    def from_arrays(cls, c, a_site, a_time, r_site, r_time, k_count) -> "DepositLog":
        log = cls(c)
        for j, t in zip(a_site, a_time):
            log.A_times[int(j)].append(int(t))
            log._order["A"].append((int(j), int(t)))
        for j, t in zip(r_site, r_time):
            log.R_times[int(j)].append(int(t))
            log._order["R"].append((int(j), int(t)))
        log.K_count = [int(k) for k in k_count]
        return log


# --------------------------------------------------------------------------
# compiled scalar kernels (shared with the engine)


@njit(cache=True, nogil=True)
def _m_value(x0, x1, sites, pm, m):
    acc = 0.0
    for j in range(sites.shape[0]):
        dx = sites[j, 0] - x0
        dy = sites[j, 1] - x1
        acc += pm[j] * math.exp(-(dx * dx + dy * dy) / m)
    return acc / (math.pi * m)


@njit(cache=True, nogil=True)
def _m_grad(x0, x1, sites, pm, m):
    gx = 0.0
    gy = 0.0
    for j in range(sites.shape[0]):
        dx = sites[j, 0] - x0
        dy = sites[j, 1] - x1
        w = pm[j] * math.exp(-(dx * dx + dy * dy) / m)
        gx += w * dx
        gy += w * dy
    s = 2.0 / (math.pi * m * m)
    return gx * s, gy * s


@njit(cache=True, nogil=True)
def _diff_value(x0, x1, t, sites, dsite, dtime, count, P, D):
    if P == 0.0:
        return 0.0
    acc = 0.0
    for k in range(count):
        dt = t - dtime[k]
        if dt <= 0:
            continue
        j = dsite[k]
        dx = sites[j, 0] - x0
        dy = sites[j, 1] - x1
        acc += math.exp(-(dx * dx + dy * dy) / (4.0 * D * dt)) / dt
    return acc * P / (4.0 * math.pi * D)


@njit(cache=True, nogil=True)
def _diff_grad(x0, x1, t, sites, dsite, dtime, count, P, D):
    gx = 0.0
    gy = 0.0
    if P == 0.0:
        return gx, gy
    for k in range(count):
        dt = t - dtime[k]
        if dt <= 0:
            continue
        j = dsite[k]
        dx = sites[j, 0] - x0
        dy = sites[j, 1] - x1
        inv = 1.0 / (4.0 * D * dt)
        w = math.exp(-(dx * dx + dy * dy) * inv) / dt * 2.0 * inv
        gx += w * dx
        gy += w * dy
    s = P / (4.0 * math.pi * D)
    return gx * s, gy * s


@njit(cache=True, nogil=True)
def _tot_value(x0, x1, t, sites, pm, m,
               a_site, a_time, na, P_A, D_A,
               r_site, r_time, nr, P_R, D_R):
    return (_m_value(x0, x1, sites, pm, m)
            + _diff_value(x0, x1, t, sites, a_site, a_time, na, P_A, D_A)
            - _diff_value(x0, x1, t, sites, r_site, r_time, nr, P_R, D_R))


@njit(cache=True, nogil=True)
def _tot_grad(x0, x1, t, sites, pm, m,
              a_site, a_time, na, P_A, D_A,
              r_site, r_time, nr, P_R, D_R):
    mx, my = _m_grad(x0, x1, sites, pm, m)
    ax, ay = _diff_grad(x0, x1, t, sites, a_site, a_time, na, P_A, D_A)
    rx, ry = _diff_grad(x0, x1, t, sites, r_site, r_time, nr, P_R, D_R)
    return mx + ax - rx, my + ay - ry


@njit(cache=True)
def _tot_value_grid(xs, ys, t, sites, pm, m,
                    a_site, a_time, na, P_A, D_A,
                    r_site, r_time, nr, P_R, D_R):
    out = np.empty((xs.shape[0], ys.shape[0]))
    for i in range(xs.shape[0]):
        for k in range(ys.shape[0]):
            out[i, k] = _tot_value(xs[i], ys[k], t, sites, pm, m,
                                   a_site, a_time, na, P_A, D_A,
                                   r_site, r_time, nr, P_R, D_R)
    return out


# --------------------------------------------------------------------------
# public API


def _xy(x) -> tuple[float, float]:
    x0, x1 = np.asarray(x, dtype=np.float64).reshape(2)
    return float(x0), float(x1)


def _log_arrays(log: DepositLog | None, kind: str):
    if log is None:
        return _EMPTY_I, _EMPTY_I
    return log.arrays(kind)


def gamma_M(x, pattern: SitePattern, params: FieldParams) -> float:
    """Marker concentration at ``x``; independent of time."""
    return _m_value(*_xy(x), pattern.positions, pattern.demands, params.m)


def grad_M(x, pattern: SitePattern, params: FieldParams) -> np.ndarray:
    return np.array(_m_grad(*_xy(x), pattern.positions, pattern.demands, params.m))


def gamma_A(t: int, x, pattern: SitePattern, log: DepositLog, params: FieldParams) -> float:
    s, ts = _log_arrays(log, "A")
    return _diff_value(*_xy(x), int(t), pattern.positions, s, ts, len(s), params.P_A, params.D_A)


def grad_A(t: int, x, pattern: SitePattern, log: DepositLog, params: FieldParams) -> np.ndarray:
    s, ts = _log_arrays(log, "A")
    return np.array(_diff_grad(*_xy(x), int(t), pattern.positions, s, ts, len(s),
                               params.P_A, params.D_A))


def gamma_R(t: int, x, pattern: SitePattern, log: DepositLog, params: FieldParams) -> float:
    s, ts = _log_arrays(log, "R")
    return _diff_value(*_xy(x), int(t), pattern.positions, s, ts, len(s), params.P_R, params.D_R)


def grad_R(t: int, x, pattern: SitePattern, log: DepositLog, params: FieldParams) -> np.ndarray:
    s, ts = _log_arrays(log, "R")
    return np.array(_diff_grad(*_xy(x), int(t), pattern.positions, s, ts, len(s),
                               params.P_R, params.D_R))


def gamma_tot(t: int, x, pattern: SitePattern, log: DepositLog | None,
              params: FieldParams) -> float:
    """Signed total ``M + A - R``; negative where the repellent dominates."""
    return FieldSnapshot.freeze(t, pattern, log, params).value(x)


def grad_tot(t: int, x, pattern: SitePattern, log: DepositLog | None,
             params: FieldParams) -> np.ndarray:
    return FieldSnapshot.freeze(t, pattern, log, params).grad(x)


class FieldSnapshot(NamedTuple):
    """Immutable view of every field at one timestep, ready for repeated queries."""

    t: int
    sites: np.ndarray
    pm: np.ndarray
    m: float
    a_site: np.ndarray
    a_time: np.ndarray
    P_A: float
    D_A: float
    r_site: np.ndarray
    r_time: np.ndarray
    P_R: float
    D_R: float

    @classmethod
    def freeze(cls, t: int, pattern: SitePattern, log: DepositLog | None,
               params: FieldParams) -> "FieldSnapshot":
        a_site, a_time = _log_arrays(log, "A")
        r_site, r_time = _log_arrays(log, "R")
        return cls(int(t), pattern.positions, pattern.demands, params.m,
                   a_site, a_time, params.P_A, params.D_A,
                   r_site, r_time, params.P_R, params.D_R)

    def _args(self):
        return (self.t, self.sites, self.pm, self.m,
                self.a_site, self.a_time, len(self.a_site), self.P_A, self.D_A,
                self.r_site, self.r_time, len(self.r_site), self.P_R, self.D_R)

    def value(self, x) -> float:
        return _tot_value(*_xy(x), *self._args())

    def grad(self, x) -> np.ndarray:
        return np.array(_tot_grad(*_xy(x), *self._args()))

    def grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Values on the tensor grid ``xs x ys``, indexed ``[ix, iy]``."""
        return _tot_value_grid(np.ascontiguousarray(xs, dtype=np.float64),
                               np.ascontiguousarray(ys, dtype=np.float64), *self._args())


# --------------------------------------------------------------------------
# "black hole" diagnostic


class Maximum(NamedTuple):
    position: np.ndarray
    value: float
    classification: str  # "true-site" or "spurious"
    site: int | None
    plateau: bool = False


def find_spurious_maxima(
    t: int,
    pattern: SitePattern,
    log: DepositLog | None,
    params: FieldParams,
    grid_resolution: int = 256,
    *,
    phi_max: float = 0.005,
    epsilon: float = 2e-5,
    match_radius: float | None = None,
) -> list[Maximum]:
    """Locate the local maxima of the total field on a uniform grid.

    A maximum is a grid node strictly greater than all of its (up to eight)
    neighbours.  It counts as ``true-site`` when it lies within ``match_radius``
    of a site; otherwise it is ``spurious``.  ``match_radius`` defaults to
    ``max(epsilon, sqrt(m)/10, half a grid diagonal)`` because a neighbouring
    site's Gaussian tail shifts the true peak slightly off its source.

    Equal-valued nodes that nothing around them exceeds are merged.  A group
    fitting in a 2x2 block is a peak straddled symmetrically by the grid and is
    classified like any other maximum (at its centroid).  Larger groups are
    degenerate plateaus, reported as spurious with ``plateau=True``.
    """
    if grid_resolution < 16:
        raise ValueError("grid_resolution must be >= 16")
    axis = np.linspace(0.0, phi_max, grid_resolution)
    spacing = axis[1] - axis[0]
    if match_radius is None:
        match_radius = max(epsilon, 0.1 * math.sqrt(params.m), spacing * math.sqrt(0.5))
    snap = FieldSnapshot.freeze(t, pattern, log, params)
    vals = snap.grid(axis, axis)

    footprint = np.ones((3, 3), dtype=bool)
    nb_max = ndimage.maximum_filter(vals, footprint=footprint, mode="constant", cval=-np.inf)
    candidate = vals >= nb_max
    # count neighbours equal to the centre (excluding itself)
    ring = footprint.copy()
    ring[1, 1] = False
    ties = np.zeros(vals.shape, dtype=bool)
    padded = np.pad(vals, 1, constant_values=-np.inf)
    n = grid_resolution
    for di in range(3):
        for dk in range(3):
            if ring[di, dk]:
                ties |= padded[di:di + n, dk:dk + n] == vals

    found: list[Maximum] = []
    strict = candidate & ~ties
    for i, k in zip(*np.nonzero(strict)):
        pos = np.array([axis[i], axis[k]])
        found.append(_classify(pos, float(vals[i, k]), pattern, match_radius))

    flat = candidate & ties
    labels, nlab = ndimage.label(flat, structure=footprint)
    for lab in range(1, nlab + 1):
        comp = labels == lab
        level = vals[comp][0]
        rim = ndimage.binary_dilation(comp, structure=footprint) & ~comp
        if np.any(vals[rim] >= level):
            continue  # a shelf that continues into non-maximal nodes
        ii, kk = np.nonzero(comp)
        pos = np.array([axis[ii].mean(), axis[kk].mean()])
        if np.ptp(ii) <= 1 and np.ptp(kk) <= 1:
            found.append(_classify(pos, float(level), pattern, match_radius))
        else:
            found.append(Maximum(pos, float(level), "spurious", None, True))
    found.sort(key=lambda mx: (mx.position[0], mx.position[1]))
    return found


def _classify(pos: np.ndarray, value: float, pattern: SitePattern, radius: float) -> Maximum:
    dist = np.hypot(*(pattern.positions - pos).T)
    j = int(np.argmin(dist))
    if dist[j] <= radius:
        return Maximum(pos, value, "true-site", j)
    return Maximum(pos, value, "spurious", None)


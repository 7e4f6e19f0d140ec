"""Payload rules of the four swarm algorithms.

RW   - blind random walk, drops K only.
KM   - follows the marker field, drops K only.
KMA  - follows the fields, drops K and the attractant A.
KMAR - drops K, then A while the site's A-to-M ratio is below ``r_AM``,
       otherwise the repellent R.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chemfield import DepositLog, FieldParams, SitePattern, gamma_A
from .motion import Mode

log = logging.getLogger(__name__)


class AlgorithmKind(enum.IntEnum):
    RW = 0
    KM = 1
    KMA = 2
    KMAR = 3

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, token: str) -> "AlgorithmKind":
        try:
            return cls[token.strip()]
        except KeyError:
            raise ValueError(f"unknown algorithm {token!r}; expected one of RW, KM, KMA, KMAR") from None


@dataclass(frozen=True)
class ThresholdParams:
    r_KM: float = 1.0
    k: float = 1e6
    epsilon: float = 2e-5

    def __post_init__(self):
        if not (self.r_KM > 0 and self.k > 0 and self.epsilon > 0):
            raise ValueError("r_KM, k and epsilon must be > 0")

    def r_AM(self, P_A: float) -> float:
        """A-to-M switching threshold, always derived from the current A payload size."""
        return self.k * self.r_KM * P_A


class DropDecision(NamedTuple):
    drop_K: bool
    drop_A: bool
    drop_R: bool


def mode_for(alg: AlgorithmKind) -> Mode:
    return Mode.EXPLORE if alg == AlgorithmKind.RW else Mode.FOLLOW


def detect_site(position, pattern: SitePattern, epsilon: float) -> int | None:
    """Index of the site within ``epsilon`` (inclusive) of ``position``, if any."""
    p = np.asarray(position, dtype=np.float64)
    for j, y in enumerate(pattern.positions):
        dx = y[0] - p[0]
        dy = y[1] - p[1]
        if dx * dx + dy * dy <= epsilon * epsilon:
            return j
    return None


def kmar_ratio(site: int, t: int, pattern: SitePattern, deposits: DepositLog,
               field: FieldParams) -> float:
    pm = pattern.demands[site]
    if pm == 0:
        log.warning("site %d has zero marker signal; treating as saturated", site)
        return math.inf
    return gamma_A(t, pattern.positions[site], pattern, deposits, field) / pm


def decide_drops(
    alg: AlgorithmKind,
    site: int,
    t: int,
    pattern: SitePattern,
    deposits: DepositLog,
    field: FieldParams,
    thresholds: ThresholdParams,
) -> DropDecision:
    if alg in (AlgorithmKind.RW, AlgorithmKind.KM):
        return DropDecision(True, False, False)
    if alg == AlgorithmKind.KMA:
        return DropDecision(True, True, False)
    q = kmar_ratio(site, t, pattern, deposits, field)
    if q < thresholds.r_AM(field.P_A):
        return DropDecision(True, True, False)
    return DropDecision(True, False, True)

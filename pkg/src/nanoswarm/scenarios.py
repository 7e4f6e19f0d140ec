"""Benchmark site/demand arrangements and the reference parameter set."""

from __future__ import annotations

from typing import Any, NamedTuple

from .chemfield import SitePattern


class NamedArrangement(NamedTuple):
    key: str
    pattern: SitePattern
    description: str


_ARRANGEMENTS = {
    "a": (
        [(0.0015, 0.0025), (0.0035, 0.0025)],
        [25, 25],
        "two well spaced-out sites, equal demand",
    ),
    "b": (
        [(0.0015, 0.0025), (0.0035, 0.0025)],
        [15, 35],
        "two well spaced-out sites, unequal demand",
    ),
    "c": (
        [(0.0025, 0.0025), (0.001, 0.004), (0.001, 0.001), (0.004, 0.004), (0.004, 0.001)],
        [10, 10, 10, 10, 10],
        "five well spaced-out sites, equal demand",
    ),
    "d": (
        [(0.0008, 0.0027), (0.0012, 0.0023), (0.0008, 0.0023), (0.0012, 0.0027), (0.004, 0.0025)],
        [10, 10, 10, 10, 10],
        "four clustered sites plus one far away, equal demand",
    ),
    "e": (
        [(0.0025, 0.0025), (0.001, 0.002), (0.004, 0.003)],
        [46, 2, 2],
        "one dominant site and two small outliers",
    ),
}

ARRANGEMENT_KEYS = tuple(_ARRANGEMENTS)


def named_arrangement(key: str) -> NamedArrangement:
    try:
        sites, demands, text = _ARRANGEMENTS[key]
    except KeyError:
        raise ValueError(f"unknown arrangement {key!r}; expected one of {', '.join(_ARRANGEMENTS)}") from None
    return NamedArrangement(key, SitePattern(sites, demands), text)


def arrangement(key: str) -> SitePattern:
    return named_arrangement(key).pattern


# Flat parameter names match the experiment config keys (see ``config``).
# b, P_A, P_R, D_A, D_R and k default to the settings shared by the algorithm
# comparison experiment; the overlays below reproduce each sweep.
REFERENCE_DEFAULTS: dict[str, Any] = {
    "n": 55,
    "phi_max": 0.005,
    "alpha": 2e-5,
    "epsilon": 2e-5,
    "m": 1e-6,
    "b": 6e-11,
    "P_A": 10.0,
    "D_A": 1e-9,
    "P_R": 50.0,
    "D_R": 1e-9,
    "r_KM": 1.0,
    "k": 1e6,
    "T_star": 200000,
    "trials": 20,
    "seed": 0,
    "delta": 30000,
    "D_thresh": 3e-7,
    "delta_prime": 500,
    "grad_floor": 1e-12,
    "max_boundary_retries": 1000,
    "noise_law": "std",
}

# k = r_AM / (r_KM * P_A); r_AM = 1e7 with P_A = 10 gives k = 1e6.
EXPERIMENT_OVERLAYS: dict[str, dict[str, Any]] = {
    "km_bias": {"alg": "KM"},
    "kma_bias": {"alg": "KMA", "P_A": 10.0, "D_A": 1e-9},
    "kma_payload": {"alg": "KMA", "b": 5e-11, "D_A": 1e-9},
    "kmar_threshold": {"alg": "KMAR", "b": 4e-11, "P_A": 10.0, "P_R": 50.0,
                       "D_A": 1e-9, "D_R": 1e-10},
    "kmar_bias": {"alg": "KMAR", "k": 1e6, "P_A": 10.0, "P_R": 50.0, "D_A": 1e-9, "D_R": 1e-9},
    "kmar_repellent": {"alg": "KMAR", "b": 6e-11, "k": 1e6, "P_A": 10.0,
                       "D_A": 1e-9, "D_R": 1e-9},
    "comparison": {"P_A": 10.0, "P_R": 50.0, "D_A": 1e-9, "D_R": 1e-9, "k": 1e6},
}


def reference_defaults(experiment: str | None = None) -> dict[str, Any]:
    """Reference parameters, optionally with one experiment's overlay applied."""
    values = dict(REFERENCE_DEFAULTS)
    if experiment is not None:
        try:
            values.update(EXPERIMENT_OVERLAYS[experiment])
        except KeyError:
            raise ValueError(f"unknown experiment overlay {experiment!r}") from None
    return values

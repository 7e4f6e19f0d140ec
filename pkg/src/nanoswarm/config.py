"""Experiment files: a flat ``key = value`` document, one parameter per line.

Example::

    name = km_bias_a
    alg = KM
    arrangement = a
    trials = 20
    sweep.b = 3.5e-11, 4e-11, 5e-11, 6e-11

Inline site patterns replace ``arrangement``::

    sites = 0.0015 0.0025; 0.0035 0.0025
    demands = 25, 25

Blank lines and ``#`` comments are ignored.  Every key not given takes its
reference value from ``scenarios.REFERENCE_DEFAULTS``.
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .engine import SimConfig
from .scenarios import REFERENCE_DEFAULTS

INT_KEYS = {"n", "T_star", "trials", "seed", "delta", "delta_prime", "max_boundary_retries"}
FLOAT_KEYS = {"phi_max", "alpha", "epsilon", "m", "b", "P_A", "D_A", "P_R", "D_R",
              "r_KM", "k", "D_thresh", "grad_floor"}
TEXT_KEYS = {"name", "alg", "arrangement", "out_dir", "noise_law"}
LIST_KEYS = {"sites", "demands"}
SWEEPABLE = INT_KEYS | FLOAT_KEYS | {"alg", "arrangement", "noise_law"}
KNOWN_KEYS = INT_KEYS | FLOAT_KEYS | TEXT_KEYS | LIST_KEYS

MAX_RUNS = 10_000
_SECTION = "experiment"


class ConfigError(ValueError):
    def __init__(self, key: str | None, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


@dataclass
class ExperimentSpec:
    name: str
    base: dict[str, Any]
    sweeps: list[tuple[str, list[Any]]] = field(default_factory=list)
    out_dir: Path | None = None

    def points(self) -> list[dict[str, Any]]:
        """Parameter overrides for every point of the sweep product (one empty point if no sweep)."""
        if not self.sweeps:
            return [{}]
        keys = [k for k, _ in self.sweeps]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in self.sweeps))]

    def config_for(self, point: dict[str, Any], seed: int | None = None) -> SimConfig:
        values = {**self.base, **point}
        if seed is not None:
            values["seed"] = seed
        return SimConfig.from_values(values)


def _parse_value(key: str, raw: str) -> Any:
    raw = raw.strip()
    if key in INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            pass
        try:
            as_float = float(raw)
        except ValueError:
            raise ConfigError(key, f"expected an integer, got {raw!r}") from None
        if not as_float.is_integer():
            raise ConfigError(key, f"expected an integer, got {raw!r}")
        return int(as_float)
    if key in FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if key == "sites":
        try:
            pts = [tuple(float(c) for c in p.replace(",", " ").split())
                   for p in raw.split(";") if p.strip()]
        except ValueError:
            raise ConfigError(key, f"expected 'x y; x y; ...', got {raw!r}") from None
        if not pts or any(len(p) != 2 for p in pts):
            raise ConfigError(key, "each site needs exactly two coordinates")
        return pts
    if key == "demands":
        try:
            return [float(d) for d in raw.replace(";", ",").split(",") if d.strip()]
        except ValueError:
            raise ConfigError(key, f"expected comma-separated numbers, got {raw!r}") from None
    if not raw:
        raise ConfigError(key, "empty value")
    return raw


def parse_config(text: str, *, default_name: str = "experiment") -> ExperimentSpec:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str  # keys are case-sensitive (P_A vs p_a)
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(None, f"malformed config: {exc}") from None

    base: dict[str, Any] = {}
    sweeps: list[tuple[str, list[Any]]] = []
    for key, raw in parser.items(_SECTION):
        if key.startswith("sweep."):
            target = key[len("sweep."):]
            if target not in SWEEPABLE:
                raise ConfigError(key, f"cannot sweep unknown or non-scalar parameter {target!r}")
            values = [_parse_value(target, v) for v in raw.split(",") if v.strip()]
            if not values:
                raise ConfigError(key, "sweep needs at least one value")
            sweeps.append((target, values))
        elif key in KNOWN_KEYS:
            base[key] = _parse_value(key, raw)
        else:
            raise ConfigError(key, "unknown key")

    if ("sites" in base) != ("demands" in base):
        raise ConfigError("sites" if "demands" in base else "demands",
                          "inline patterns need both sites and demands")
    name = base.pop("name", default_name)
    out_dir = base.pop("out_dir", None)
    spec = ExperimentSpec(name=name, base=base, sweeps=sweeps,
                          out_dir=Path(out_dir) if out_dir else None)

    n_runs = 1
    for _, vals in sweeps:
        n_runs *= len(vals)
    if n_runs > MAX_RUNS:
        raise ConfigError("sweep", f"{n_runs} runs exceeds the cap of {MAX_RUNS}")
    for point in spec.points():
        try:
            spec.config_for(point)
        except ConfigError:
            raise
        except (ValueError, KeyError) as exc:
            where = ", ".join(f"{k}={v}" for k, v in point.items())
            raise ConfigError(_guess_key(str(exc)), f"{exc}" + (f" (at {where})" if where else "")) from None
    return spec


def load_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), default_name=path.stem)


def _guess_key(message: str) -> str | None:
    for key in sorted(KNOWN_KEYS | set(REFERENCE_DEFAULTS), key=len, reverse=True):
        if key in message:
            return key
    return None

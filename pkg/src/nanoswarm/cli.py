"""Batch front-end: ``nanoswarm run <config>`` and ``nanoswarm diagnose <config>``.

``run`` writes, per sweep point ``i``, ``<name>_run<i>_series.csv`` (one row per
trial and sampled step) and ``<name>_run<i>_plot.csv`` (cross-trial mean and
population standard deviation), plus one ``<name>_summary.csv`` covering all
points.  Exit codes: 0 success, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .chemfield import Maximum, find_spurious_maxima
from .config import ConfigError, ExperimentSpec, load_config
from .engine import SimConfig, TrialResult, run_trial
from .metrics import s_avg, s_std, t_fin

log = logging.getLogger(__name__)

SUMMARY_HEADER = ["name", "alg", "arrangement", "params", "T_fin", "S_at_Tfin",
                  "S_at_Tstar", "trials", "wall_s"]
PLOT_HEADER = ["t", "S_avg", "S_std"]
UNDEFINED = "undefined"


@dataclass
class SummaryRow:
    name: str
    alg: str
    arrangement: str
    params: str
    T_fin: int | None
    S_at_Tfin: float | None
    S_at_Tstar: float | None
    trials: int
    wall_s: float
    error: str = ""

    def cells(self, with_error: bool) -> list[Any]:
        row = [self.name, self.alg, self.arrangement, self.params,
               UNDEFINED if self.T_fin is None else self.T_fin,
               _num(self.S_at_Tfin), _num(self.S_at_Tstar), self.trials, _num(self.wall_s)]
        return row + [self.error] if with_error else row


def _num(x: float | None) -> str:
    return UNDEFINED if x is None else repr(float(x))


def _point_label(point: dict[str, Any]) -> str:
    return ";".join(f"{k}={v}" for k, v in point.items())


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_series_csv(path: Path, results: Sequence[TrialResult], config: SimConfig) -> None:
    c = config.pattern.c
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["trial", "t", "S"] + [f"K_{j}" for j in range(c)])
        for i, res in enumerate(results):
            S = res.success(config.pattern, config.thresholds.r_KM).values
            for t, s, K in zip(res.times, S, res.K_series):
                w.writerow([i, int(t), repr(float(s))] + [int(k) for k in K])


def write_plot_csv(path: Path, times: np.ndarray, avg: np.ndarray, std: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(PLOT_HEADER)
        for t, a, s in zip(times, avg, std):
            w.writerow([int(t), repr(float(a)), repr(float(s))])


def write_summary_csv(path: Path, rows: Sequence[SummaryRow]) -> None:
    with_error = any(r.error for r in rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_HEADER + (["error"] if with_error else []))
        for r in rows:
            w.writerow(r.cells(with_error))


def run(spec: ExperimentSpec, out_dir: str | Path | None = None, *, threads: int = 1,
        seed: int | None = None) -> list[SummaryRow]:
    """Run every sweep point and write all CSVs; returns the summary rows.

    Trials of every point share one worker pool.  Each trial's randomness
    depends only on its seed, so the files do not depend on ``threads``.
    """
    out = Path(out_dir or spec.out_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    probe = out / f".{spec.name}.write-test"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc

    points = spec.points()
    configs = [spec.config_for(p, seed=seed) for p in points]

    def job(idx_seed):
        idx, s = idx_seed
        t0 = time.perf_counter()
        try:
            return run_trial(configs[idx], s), time.perf_counter() - t0
        except Exception as exc:  # recorded per run; other runs continue
            log.exception("run %d, seed %d failed", idx, s)
            return exc, time.perf_counter() - t0

    jobs = [(i, cfg.base_seed + k) for i, cfg in enumerate(configs) for k in range(cfg.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(job, jobs))
    else:
        outcomes = [job(j) for j in jobs]

    rows: list[SummaryRow] = []
    pos = 0
    for i, (point, cfg) in enumerate(zip(points, configs)):
        chunk = outcomes[pos:pos + cfg.trials]
        pos += cfg.trials
        wall = sum(dt for _, dt in chunk)
        row = SummaryRow(spec.name, str(cfg.alg), cfg.arrangement, _point_label(point),
                         None, None, None, cfg.trials, wall)
        failures = [r for r, _ in chunk if isinstance(r, Exception)]
        if failures:
            row.error = f"{type(failures[0]).__name__}: {failures[0]}"
            rows.append(row)
            continue
        results = [r for r, _ in chunk]
        series = [r.success(cfg.pattern, cfg.thresholds.r_KM) for r in results]
        avg = s_avg(series)
        write_series_csv(out / f"{spec.name}_run{i:03d}_series.csv", results, cfg)
        write_plot_csv(out / f"{spec.name}_run{i:03d}_plot.csv", avg.times, avg.values, s_std(series))
        row.T_fin = t_fin(avg, cfg.metrics)
        row.S_at_Tfin = None if row.T_fin is None else avg.at(row.T_fin)
        row.S_at_Tstar = avg.at(cfg.T_star)
        rows.append(row)

    write_summary_csv(out / f"{spec.name}_summary.csv", rows)
    return rows


@dataclass
class DiagnosisReport:
    label: str
    n_sites: int
    maxima: list[Maximum]

    @property
    def n_true_site(self) -> int:
        return sum(m.classification == "true-site" for m in self.maxima)

    @property
    def n_spurious(self) -> int:
        return sum(m.classification == "spurious" for m in self.maxima)

    @property
    def warnings(self) -> list[str]:
        out = []
        if self.n_spurious:
            out.append(f"{self.n_spurious} spurious maxima in the marker field")
        distinct = len({m.site for m in self.maxima if m.site is not None})
        if distinct < self.n_sites:
            out.append(f"only {distinct} of {self.n_sites} sites have their own maximum")
        return out


def diagnose(spec: ExperimentSpec, grid_resolution: int = 256) -> list[DiagnosisReport]:
    """Marker-field (t=0, no deposits) maxima for every distinct sweep point."""
    reports, seen = [], set()
    for point in spec.points():
        cfg = spec.config_for(point)
        key = (cfg.pattern.positions.tobytes(), cfg.field.m, cfg.motion.phi_max,
               cfg.thresholds.epsilon)
        if key in seen:
            continue
        seen.add(key)
        maxima = find_spurious_maxima(0, cfg.pattern, None, cfg.field, grid_resolution,
                                      phi_max=cfg.motion.phi_max,
                                      epsilon=cfg.thresholds.epsilon)
        label = f"arrangement={cfg.arrangement} m={cfg.field.m!r}"
        reports.append(DiagnosisReport(label, cfg.pattern.c, maxima))
    return reports


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nanoswarm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment (and its sweep) and write CSVs")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides out_dir)")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--seed", type=int, help="base seed (overrides the config)")
    d = sub.add_parser("diagnose", help="report true-site and spurious maxima of the marker field")
    d.add_argument("config")
    d.add_argument("--grid", type=int, default=256, help="grid nodes per axis")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_config(args.config)
        if args.command == "run":
            if args.threads < 1:
                raise ConfigError("--threads", "must be >= 1")
            if args.seed is not None:
                spec.config_for({}, seed=args.seed)  # range check
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            rows = run(spec, args.out, threads=args.threads, seed=args.seed)
            for row in rows:
                tf = UNDEFINED if row.T_fin is None else row.T_fin
                print(f"{row.alg} {row.arrangement} {row.params or '-'}: T_fin={tf} "
                      f"S(T_fin)={_num(row.S_at_Tfin)} S(T*)={_num(row.S_at_Tstar)}"
                      + (f" ERROR {row.error}" if row.error else ""))
            return 2 if any(r.error for r in rows) else 0
        for rep in diagnose(spec, args.grid):
            print(f"{rep.label}: true-site maxima {rep.n_true_site}, spurious {rep.n_spurious}")
            for w in rep.warnings:
                print(f"warning: {w}", file=sys.stderr)
        return 0
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

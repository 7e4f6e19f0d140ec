"""Trial orchestration: initialise a swarm, advance it step by step, collect drops.

Each timestep ``t`` has two phases.  Every live agent first moves against the
fields as they stood at the end of step ``t - 1``.  Then, in ascending agent
id, agents that landed within ``epsilon`` of a site drop their payloads and
terminate.  Payloads are stamped ``t``, so they never influence other agents
until step ``t + 1``.

Randomness: a trial seed spawns one substream pair per agent (see
``motion.AgentStreams``).  The compiled loop consumes pre-drawn blocks of each
stream, so a trial's output depends only on ``(config, seed)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple

import numpy as np
from numba import njit

from .chemfield import DepositLog, FieldParams, FieldSnapshot, SitePattern, _diff_value, _tot_grad
from .metrics import MetricParams, SuccessSeries, success_series
from .motion import AgentState, AgentStreams, Mode, MotionParams, _follow_turn, _norm, _rotate
from .protocol import AlgorithmKind, DropDecision, ThresholdParams, mode_for
from .scenarios import REFERENCE_DEFAULTS, arrangement

log = logging.getLogger(__name__)

# kernel exit codes
_REFILL, _ALL_TERMINATED = 1, 2


@dataclass(frozen=True)
class SimConfig:
    n: int
    pattern: SitePattern
    field: FieldParams
    motion: MotionParams
    thresholds: ThresholdParams
    alg: AlgorithmKind
    T_star: int
    metrics: MetricParams = MetricParams()
    trials: int = 20
    base_seed: int = 0
    arrangement: str = "custom"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.T_star < 1:
            raise ValueError("T_star must be >= 1")
        if self.T_star % self.metrics.delta_prime:
            raise ValueError(f"delta_prime={self.metrics.delta_prime} must divide T_star={self.T_star}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.pattern.validate_domain(self.motion.phi_max, self.thresholds.epsilon)

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(0, self.T_star + 1, self.metrics.delta_prime, dtype=np.int64)

    @classmethod
    def from_values(cls, values: Mapping[str, Any]) -> "SimConfig":
        """Build from flat parameter names (the config-file keys), reference defaults filling gaps."""
        v = {**REFERENCE_DEFAULTS, **values}
        if "sites" in v or "demands" in v:
            pattern = SitePattern(v["sites"], v["demands"])
            label = v.get("arrangement") or "custom"
        else:
            label = v.get("arrangement", "a")
            pattern = arrangement(label)
        alg = v.get("alg", "KM")
        return cls(
            n=int(v["n"]),
            pattern=pattern,
            field=FieldParams(m=float(v["m"]), P_A=float(v["P_A"]), D_A=float(v["D_A"]),
                              P_R=float(v["P_R"]), D_R=float(v["D_R"])),
            motion=MotionParams(alpha=float(v["alpha"]), b=float(v["b"]),
                                phi_max=float(v["phi_max"]), grad_floor=float(v["grad_floor"]),
                                max_boundary_retries=int(v["max_boundary_retries"]),
                                noise_law=str(v["noise_law"])),
            thresholds=ThresholdParams(r_KM=float(v["r_KM"]), k=float(v["k"]),
                                       epsilon=float(v["epsilon"])),
            alg=alg if isinstance(alg, AlgorithmKind) else AlgorithmKind.parse(alg),
            T_star=int(v["T_star"]),
            metrics=MetricParams(delta=int(v["delta"]), D_thresh=float(v["D_thresh"]),
                                 delta_prime=int(v["delta_prime"])),
            trials=int(v["trials"]),
            base_seed=int(v["seed"]),
            arrangement=label,
        )


class Event(NamedTuple):
    t: int
    agent: int
    site: int
    decision: DropDecision


@dataclass
class TrialResult:
    seed: int
    times: np.ndarray
    K_series: np.ndarray  # (len(times), c) K counts after each sampled step
    events: list[Event]
    n_unterminated: int
    final_positions: np.ndarray

    @property
    def K_final(self) -> np.ndarray:
        return self.K_series[-1]

    def drop_counts(self, c: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-site totals of K, A and R payloads, recomputed from the event log."""
        K, A, R = (np.zeros(c, dtype=np.int64) for _ in range(3))
        for ev in self.events:
            K[ev.site] += ev.decision.drop_K
            A[ev.site] += ev.decision.drop_A
            R[ev.site] += ev.decision.drop_R
        return K, A, R

    def success(self, pattern: SitePattern, r_KM: float) -> SuccessSeries:
        return success_series(self.times, self.K_series, pattern, r_KM)


@dataclass
class TrialState:
    """Mutable state of one trial; arrays are laid out for the compiled stepper."""

    config: SimConfig
    seed: int
    streams: list[AgentStreams]
    pos: np.ndarray
    orient: np.ndarray
    terminated: np.ndarray
    term_site: np.ndarray
    a_site: np.ndarray
    a_time: np.ndarray
    r_site: np.ndarray
    r_time: np.ndarray
    K: np.ndarray
    ev: np.ndarray  # (n, 5): t, agent, site, drop_A, drop_R
    counts: np.ndarray  # na, nr, nev, n_active
    series: np.ndarray
    t: int = 0
    ubuf: np.ndarray | None = field(default=None, repr=False)
    zbuf: np.ndarray | None = field(default=None, repr=False)
    uptr: np.ndarray | None = field(default=None, repr=False)
    zptr: np.ndarray | None = field(default=None, repr=False)

    # -- views for callers -------------------------------------------------

    def agents(self) -> list[AgentState]:
        mode = mode_for(self.config.alg)
        return [
            AgentState(i, self.pos[i].copy(), self.orient[i].copy(), mode,
                       bool(self.terminated[i]),
                       int(self.term_site[i]) if self.terminated[i] else None)
            for i in range(self.config.n)
        ]

    def deposit_log(self) -> DepositLog:
        na, nr = self.counts[0], self.counts[1]
        return DepositLog.from_arrays(self.config.pattern.c, self.a_site[:na], self.a_time[:na],
                                      self.r_site[:nr], self.r_time[:nr], self.K)

    def events(self) -> list[Event]:
        return [Event(int(t), int(i), int(j), DropDecision(True, bool(a), bool(r)))
                for t, i, j, a, r in self.ev[: self.counts[2]]]

    def snapshot(self, t: int) -> FieldSnapshot:
        """Fields as agents moving at step ``t`` see them."""
        na, nr = self.counts[0], self.counts[1]
        cfg = self.config
        return FieldSnapshot(int(t), cfg.pattern.positions, cfg.pattern.demands, cfg.field.m,
                             self.a_site[:na], self.a_time[:na], cfg.field.P_A, cfg.field.D_A,
                             self.r_site[:nr], self.r_time[:nr], cfg.field.P_R, cfg.field.D_R)

    @property
    def n_active(self) -> int:
        return int(self.counts[3])

    # -- random stream buffers ---------------------------------------------

    def _ensure_buffers(self) -> None:
        if self.ubuf is not None:
            return
        n = self.config.n
        width = max(1024, self.config.motion.max_boundary_retries + 1)
        self.ubuf = np.empty((n, width))
        self.zbuf = np.empty((n, width))
        self.uptr = np.full(n, width, dtype=np.int64)
        self.zptr = np.full(n, width, dtype=np.int64)
        self._refill(force=np.ones(n, dtype=bool))

    def _refill(self, force: np.ndarray | None = None) -> None:
        """Top up every live agent's buffers that fell below half, plus any forced ones."""
        width = self.ubuf.shape[1]
        for buf, ptr, pick in ((self.ubuf, self.uptr, 0), (self.zbuf, self.zptr, 1)):
            low = (ptr > width // 2) & (self.terminated == 0)
            if force is not None:
                low |= force
            for i in np.nonzero(low)[0]:
                used = ptr[i]
                keep = width - used
                buf[i, :keep] = buf[i, used:]
                gen = self.streams[i][pick]
                buf[i, keep:] = gen.random(used) if pick == 0 else gen.standard_normal(used)
                ptr[i] = 0


def _spawn(seed: int, n: int) -> tuple[np.random.Generator, list[AgentStreams]]:
    root = np.random.SeedSequence(seed)
    init_seq, *agent_seqs = root.spawn(n + 1)
    return np.random.default_rng(init_seq), [AgentStreams.spawn(s) for s in agent_seqs]


def init_trial(config: SimConfig, seed: int) -> TrialState:
    """Place ``n`` agents uniformly at random; empty drop history."""
    n, c = config.n, config.pattern.c
    init_rng, streams = _spawn(seed, n)
    pos = init_rng.uniform(0.0, config.motion.phi_max, size=(n, 2))
    orient = np.tile([1.0, 0.0], (n, 1))
    series = np.zeros((len(config.sample_times), c), dtype=np.int64)
    return TrialState(
        config=config,
        seed=seed,
        streams=streams,
        pos=pos,
        orient=orient,
        terminated=np.zeros(n, dtype=np.uint8),
        term_site=np.full(n, -1, dtype=np.int64),
        a_site=np.zeros(n, dtype=np.int64),
        a_time=np.zeros(n, dtype=np.int64),
        r_site=np.zeros(n, dtype=np.int64),
        r_time=np.zeros(n, dtype=np.int64),
        K=np.zeros(c, dtype=np.int64),
        ev=np.zeros((n, 5), dtype=np.int64),
        counts=np.array([0, 0, 0, n], dtype=np.int64),
        series=series,
    )


@njit(cache=True, nogil=True)
def _advance(t_first, t_last, alg, follow,
             pos, orient, terminated, term_site,
             sites, pm, m, P_A, D_A, P_R, D_R,
             a_site, a_time, r_site, r_time, K, ev, counts,
             ubuf, uptr, zbuf, zptr,
             alpha, b, sd_law, phi_max, grad_floor, max_retries, epsilon, r_AM,
             series, dprime, newpos, saved_u, saved_z):
    """Run steps ``t_first..t_last``.  Returns ``(last completed step, status, agent)``."""
    n = pos.shape[0]
    c = sites.shape[0]
    width = ubuf.shape[1]
    pi = math.pi
    eps2 = epsilon * epsilon
    for t in range(t_first, t_last + 1):
        if counts[3] == 0:
            return t - 1, 2, -1
        for i in range(n):
            # low-water mark; a step needing more than this rolls back and refills
            if terminated[i] == 0 and (width - uptr[i] < 64 or width - zptr[i] < 64):
                return t - 1, 1, i
        for i in range(n):
            saved_u[i] = uptr[i]
            saved_z[i] = zptr[i]

        # phase 1: move every live agent against the frozen fields
        for i in range(n):
            if terminated[i]:
                continue
            x0 = pos[i, 0]
            x1 = pos[i, 1]
            gx = 0.0
            gy = 0.0
            norm = 0.0
            use_follow = False
            if follow:
                gx, gy = _tot_grad(x0, x1, t, sites, pm, m,
                                   a_site, a_time, counts[0], P_A, D_A,
                                   r_site, r_time, counts[1], P_R, D_R)
                norm = _norm(gx, gy)
                use_follow = norm > grad_floor
            sigma = 0.0
            if use_follow:
                sigma = 1.0 / (b * norm) if sd_law else 1.0 / math.sqrt(b * norm)
            newpos[i, 0] = x0
            newpos[i, 1] = x1
            for _ in range(max_retries):
                if use_follow:
                    if zptr[i] >= width:
                        for k in range(n):
                            uptr[k] = saved_u[k]
                            zptr[k] = saved_z[k]
                        return t - 1, 1, i
                    hx, hy = _follow_turn(gx, gy, norm, sigma, zbuf[i, zptr[i]])
                    zptr[i] += 1
                else:
                    if uptr[i] >= width:
                        for k in range(n):
                            uptr[k] = saved_u[k]
                            zptr[k] = saved_z[k]
                        return t - 1, 1, i
                    beta = -pi + (pi - -pi) * ubuf[i, uptr[i]]
                    uptr[i] += 1
                    hx, hy = _rotate(1.0, 0.0, beta)
                cx = x0 + alpha * hx
                cy = x1 + alpha * hy
                if 0.0 <= cx <= phi_max and 0.0 <= cy <= phi_max:
                    newpos[i, 0] = cx
                    newpos[i, 1] = cy
                    orient[i, 0] = hx
                    orient[i, 1] = hy
                    break

        # phase 2: commit moves, detect arrivals, drop payloads (ascending id)
        for i in range(n):
            if terminated[i]:
                continue
            pos[i, 0] = newpos[i, 0]
            pos[i, 1] = newpos[i, 1]
            for j in range(c):
                dx = sites[j, 0] - pos[i, 0]
                dy = sites[j, 1] - pos[i, 1]
                if dx * dx + dy * dy <= eps2:
                    drop_a = False
                    drop_r = False
                    if alg == 2:
                        drop_a = True
                    elif alg == 3:
                        if pm[j] == 0.0:
                            q = math.inf
                        else:
                            q = _diff_value(sites[j, 0], sites[j, 1], t, sites,
                                            a_site, a_time, counts[0], P_A, D_A) / pm[j]
                        if q < r_AM:
                            drop_a = True
                        else:
                            drop_r = True
                    K[j] += 1
                    if drop_a:
                        a_site[counts[0]] = j
                        a_time[counts[0]] = t
                        counts[0] += 1
                    if drop_r:
                        r_site[counts[1]] = j
                        r_time[counts[1]] = t
                        counts[1] += 1
                    e = counts[2]
                    ev[e, 0] = t
                    ev[e, 1] = i
                    ev[e, 2] = j
                    ev[e, 3] = 1 if drop_a else 0
                    ev[e, 4] = 1 if drop_r else 0
                    counts[2] += 1
                    counts[3] -= 1
                    terminated[i] = 1
                    term_site[i] = j
                    break
        if t % dprime == 0:
            for j in range(c):
                series[t // dprime, j] = K[j]
    return t_last, 0, -1


def _call_advance(state: TrialState, t_first: int, t_last: int):
    cfg = state.config
    fp, mp = cfg.field, cfg.motion
    n = cfg.n
    scratch = getattr(state, "_scratch", None)
    if scratch is None:
        scratch = (np.empty((n, 2)), np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64))
        state._scratch = scratch
    return _advance(
        t_first, t_last, int(cfg.alg), mode_for(cfg.alg) == Mode.FOLLOW,
        state.pos, state.orient, state.terminated, state.term_site,
        cfg.pattern.positions, cfg.pattern.demands, fp.m, fp.P_A, fp.D_A, fp.P_R, fp.D_R,
        state.a_site, state.a_time, state.r_site, state.r_time, state.K, state.ev, state.counts,
        state.ubuf, state.uptr, state.zbuf, state.zptr,
        mp.alpha, mp.b, mp.noise_law == "std", mp.phi_max, mp.grad_floor, mp.max_boundary_retries,
        cfg.thresholds.epsilon, cfg.thresholds.r_AM(fp.P_A),
        state.series, cfg.metrics.delta_prime, *scratch,
    )


def _advance_to(state: TrialState, t_last: int) -> bool:
    """Run until ``t_last`` or until every agent has terminated.  True if all terminated."""
    if state.config.n == 0 or state.n_active == 0:
        return True
    state._ensure_buffers()
    while state.t < t_last:
        t_done, status, who = _call_advance(state, state.t + 1, t_last)
        state.t = int(t_done)
        if status == _ALL_TERMINATED:
            return True
        if status == _REFILL:
            force = np.zeros(state.config.n, dtype=bool)
            force[who] = True
            state._refill(force)
    return state.n_active == 0


def run_timestep(state: TrialState, t: int) -> TrialState:
    """Advance ``state`` through step ``t`` (which must be the next step)."""
    if t != state.t + 1:
        raise ValueError(f"next step is {state.t + 1}, not {t}")
    if t > state.config.T_star:
        raise ValueError(f"t={t} is past T_star={state.config.T_star}")
    if not _advance_to(state, t):
        return state
    # nobody left to move: the step still happens, it just changes nothing
    state.t = t
    if t % state.config.metrics.delta_prime == 0:
        state.series[t // state.config.metrics.delta_prime] = state.K
    return state


def run_trial(config: SimConfig, seed: int) -> TrialResult:
    state = init_trial(config, seed)
    _advance_to(state, config.T_star)
    if state.t < config.T_star:
        # early exit: everything is frozen, so later samples repeat the last counts
        first_unsampled = state.t // config.metrics.delta_prime + 1
        state.series[first_unsampled:] = state.K
    n_left = state.n_active
    if n_left:
        log.debug("trial seed=%d: %d agents never reached a site", seed, n_left)
    return TrialResult(
        seed=seed,
        times=config.sample_times,
        K_series=state.series,
        events=state.events(),
        n_unterminated=n_left,
        final_positions=state.pos.copy(),
    )


def run_experiment(config: SimConfig, threads: int = 1) -> list[TrialResult]:
    """All ``config.trials`` trials, seeded ``base_seed + i``, returned in trial order."""
    seeds = [config.base_seed + i for i in range(config.trials)]
    if threads <= 1:
        return [run_trial(config, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: run_trial(config, s), seeds))

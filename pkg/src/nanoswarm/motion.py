"""Agent locomotion: uniform-heading Explore steps and noisy gradient-following Follow steps.

This module is the readable per-agent reference.  The trial engine runs the
same rules inside a compiled loop (``engine._advance``); both draw from
the same per-agent random streams, so they produce identical trajectories.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from numba import njit

from .chemfield import FieldSnapshot

log = logging.getLogger(__name__)


class Mode(enum.IntEnum):
    EXPLORE = 0
    FOLLOW = 1


NOISE_LAWS = ("std", "variance")


@dataclass(frozen=True)
class MotionParams:
    """Step geometry and gradient-following noise.

    ``noise_law`` fixes how the orientation bias ``b`` sets the spread of the
    heading noise around the gradient: ``"std"`` uses a standard deviation of
    ``1/(b|grad|)``, ``"variance"`` a variance of ``1/(b|grad|)``.  The two agree
    at ``b|grad| = 1``.  ``"std"`` is the default because it reproduces the
    reference treatment times; ``"variance"`` makes drift far stronger at the
    reference ``b`` values.
    """

    alpha: float = 2e-5
    b: float = 6e-11
    phi_max: float = 0.005
    grad_floor: float = 1e-12
    max_boundary_retries: int = 1000
    noise_law: str = "std"

    def __post_init__(self):
        if not (self.alpha > 0 and self.b > 0):
            raise ValueError("alpha and b must be > 0")
        if not self.phi_max > self.alpha:
            raise ValueError("phi_max must exceed alpha")
        if self.grad_floor < 0:
            raise ValueError("grad_floor must be >= 0")
        if self.max_boundary_retries < 1:
            raise ValueError("max_boundary_retries must be >= 1")
        if self.noise_law not in NOISE_LAWS:
            raise ValueError(f"noise_law must be one of {NOISE_LAWS}, got {self.noise_law!r}")


@dataclass(frozen=True)
class AgentState:
    id: int
    position: np.ndarray
    orientation: np.ndarray
    mode: Mode
    terminated: bool = False
    terminal_site: int | None = None


class AgentStreams(NamedTuple):
    """An agent's two independent random substreams.

    ``explore`` feeds uniform headings, ``follow`` feeds the Gaussian noise
    angle.  Keeping them apart lets the engine pre-draw each in blocks.
    """

    explore: np.random.Generator
    follow: np.random.Generator

    @classmethod
    def spawn(cls, seq: np.random.SeedSequence) -> "AgentStreams":
        e, f = seq.spawn(2)
        return cls(np.random.default_rng(e), np.random.default_rng(f))


def wrap_angle(beta: float) -> float:
    """Map an angle into ``[-pi, pi)``."""
    return ((beta + math.pi) % (2.0 * math.pi)) - math.pi


@njit(cache=True, nogil=True)
def _rotate(vx, vy, beta):
    # compiled so the reference path and the engine share one cos/sin implementation
    cb = math.cos(beta)
    sb = math.sin(beta)
    return cb * vx - sb * vy, sb * vx + cb * vy


@njit(cache=True, nogil=True)
def _norm(gx, gy):
    return math.hypot(gx, gy)


@njit(cache=True, nogil=True)
def _follow_turn(gx, gy, norm, sigma, z):
    """Unit vector at wrapped angle ``sigma*z`` from the gradient ``(gx, gy)``."""
    beta = sigma * z
    beta = ((beta + math.pi) % (2.0 * math.pi)) - math.pi
    hx, hy = _rotate(gx, gy, beta)
    return hx / norm, hy / norm


def rotate(v: np.ndarray, beta: float) -> np.ndarray:
    return np.array(_rotate(float(v[0]), float(v[1]), float(beta)))


def sample_explore_heading(rng: np.random.Generator) -> np.ndarray:
    beta = rng.uniform(-math.pi, math.pi)
    return rotate(np.array([1.0, 0.0]), beta)


def noise_sigma(b: float, grad_norm: float, noise_law: str = "std") -> float:
    """Standard deviation of the (unwrapped) heading noise angle."""
    if noise_law == "std":
        return 1.0 / (b * grad_norm)
    return 1.0 / math.sqrt(b * grad_norm)


def sample_follow_heading(mu: np.ndarray, b: float, rng: np.random.Generator,
                          noise_law: str = "std") -> np.ndarray:
    """Unit heading rotated from ``mu`` by a wrapped-normal angle (see ``noise_sigma``)."""
    mu = np.asarray(mu, dtype=np.float64)
    norm = _norm(mu[0], mu[1])
    if not norm > 0:
        raise ValueError("follow heading needs a nonzero gradient")
    sigma = noise_sigma(b, norm, noise_law)
    return np.array(_follow_turn(mu[0], mu[1], norm, sigma, rng.standard_normal()))


def _inside(p: np.ndarray, phi_max: float) -> bool:
    return 0.0 <= p[0] <= phi_max and 0.0 <= p[1] <= phi_max


def step_agent(
    agent: AgentState,
    field: FieldSnapshot | None,
    params: MotionParams,
    rng: AgentStreams | np.random.Generator,
) -> AgentState:
    """Advance one agent by one timestep.

    Follow-mode agents on a gradient weaker than ``grad_floor`` take an Explore
    step instead.  Out-of-bounds candidates are redrawn from the same start
    position; after ``max_boundary_retries`` failures the agent stays put.
    """
    if agent.terminated:
        raise ValueError(f"agent {agent.id} is terminated and cannot move")
    if isinstance(rng, np.random.Generator):
        rng = AgentStreams(rng, rng)

    mu = None
    if agent.mode == Mode.FOLLOW and field is not None:
        g = field.grad(agent.position)
        if _norm(g[0], g[1]) > params.grad_floor:
            mu = g

    for _ in range(params.max_boundary_retries):
        if mu is None:
            heading = sample_explore_heading(rng.explore)
        else:
            heading = sample_follow_heading(mu, params.b, rng.follow, params.noise_law)
        candidate = agent.position + params.alpha * heading
        if _inside(candidate, params.phi_max):
            return replace(agent, position=candidate, orientation=heading)

    log.warning("agent %d exhausted %d boundary retries; holding position",
                agent.id, params.max_boundary_retries)
    return agent

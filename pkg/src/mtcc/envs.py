"""CheetahLite: a 1-D locomotion task with tunable body parameters.

A point mass is pushed by a bounded force (action 0) while a posture control
(action 1) scales the drag it experiences. Reward is forward velocity minus a
quadratic control cost. Seven named variants exist: ``Base`` and a 25% smaller
or larger mass, drag or force.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

OBS_DIM = 2
ACT_DIM = 2

BASE = dict(
    mass=1.0,
    drag=0.5,
    f_max=2.0,
    posture_gain=0.5,
    ctrl_cost=0.05,
    dt=0.05,
    horizon=200,
)

_SCALED = {"Mass": "mass", "Drag": "drag", "Force": "f_max"}

VARIANT_NAMES = (
    "Base",
    "SmallMass",
    "BigMass",
    "SmallDrag",
    "BigDrag",
    "SmallForce",
    "BigForce",
)
# the six morphological variants used for multi-task experiments
SIX_VARIANTS = VARIANT_NAMES[1:]


class EpisodeDone(RuntimeError):
    pass


@dataclass(frozen=True)
class MorphologySpec:
    name: str
    mass: float
    drag: float
    f_max: float
    posture_gain: float
    ctrl_cost: float
    dt: float
    horizon: int

    def __post_init__(self):
        for f in ("mass", "drag", "f_max", "dt"):
            if not getattr(self, f) > 0:
                raise ValueError(f"{f} must be positive")
        if not 0 <= self.posture_gain < 1:
            raise ValueError("posture_gain must lie in [0, 1)")
        if self.ctrl_cost < 0:
            raise ValueError("ctrl_cost must be non-negative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def speed_bound(self) -> float:
        """Largest reachable |v| from rest under clamped actions."""
        return self.f_max / (self.mass * self.drag * (1 - self.posture_gain))


def make_variant(name: str) -> MorphologySpec:
    if name not in VARIANT_NAMES:
        raise KeyError(f"unknown variant {name!r}; valid names: {', '.join(VARIANT_NAMES)}")
    params = dict(BASE)
    for prefix, scale in (("Small", 0.75), ("Big", 1.25)):
        if name.startswith(prefix):
            key = _SCALED[name[len(prefix):]]
            params[key] = params[key] * scale
    return MorphologySpec(name=name, **params)


@dataclass(frozen=True)
class EnvState:
    x: float = 0.0
    v: float = 0.0
    t: int = 0


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool


def observe(state: EnvState, spec: MorphologySpec) -> np.ndarray:
    return np.array([state.v, state.t / spec.horizon])


def reset(spec: MorphologySpec) -> tuple[EnvState, np.ndarray]:
    state = EnvState()
    return state, observe(state, spec)


def dynamics(v, a1, a2, spec: MorphologySpec):
    """Velocity update and reward for (already clamped) actions; works
    elementwise on arrays as well as scalars."""
    c_eff = spec.drag * (1.0 + spec.posture_gain * a2)
    v_next = v + spec.dt * (spec.f_max * a1 / spec.mass - c_eff * v)
    reward = v_next - spec.ctrl_cost * (a1 * a1 + a2 * a2)
    return v_next, reward


def step(state: EnvState, action, spec: MorphologySpec) -> tuple[EnvState, StepResult]:
    if state.t >= spec.horizon:
        raise EpisodeDone(f"episode already finished after {spec.horizon} steps")
    a1 = min(max(float(action[0]), -1.0), 1.0)
    a2 = min(max(float(action[1]), -1.0), 1.0)
    v, reward = dynamics(state.v, a1, a2, spec)
    new = EnvState(x=state.x + spec.dt * v, v=v, t=state.t + 1)
    done = new.t == spec.horizon
    return new, StepResult(observe(new, spec), float(reward), done)


class EnvCursor:
    """A live episode that restarts itself when it ends."""

    def __init__(self, spec: MorphologySpec):
        self.spec = spec
        self.state, self.obs = reset(spec)
        self.episode_return = 0.0
        self.finished_returns: list[float] = []

    def step(self, action) -> StepResult:
        self.state, res = step(self.state, action, self.spec)
        self.episode_return += res.reward
        if res.done:
            self.finished_returns.append(self.episode_return)
            self.episode_return = 0.0
            self.state, self.obs = reset(self.spec)
        else:
            self.obs = res.observation
        return res

    @property
    def steps_to_go(self) -> int:
        return self.spec.horizon - self.state.t


def constant_action_return(spec: MorphologySpec, a1: float, a2: float) -> float:
    state, _ = reset(spec)
    total = 0.0
    done = False
    while not done:
        state, res = step(state, (a1, a2), spec)
        total += res.reward
        done = res.done
    return total


def best_constant_action(spec: MorphologySpec, n_grid: int = 21) -> tuple[float, tuple[float, float]]:
    """Grid search over constant actions in [-1, 1]^2. Returns (return, action)."""
    grid = np.round(np.linspace(-1.0, 1.0, n_grid), 12)
    best = (-np.inf, (0.0, 0.0))
    for a1 in grid:
        for a2 in grid:
            r = constant_action_return(spec, float(a1), float(a2))
            if r > best[0]:
                best = (r, (float(a1), float(a2)))
    return best


def with_params(spec: MorphologySpec, **changes) -> MorphologySpec:
    return dataclasses.replace(spec, **changes)

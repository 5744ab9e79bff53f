"""Rollout evaluation and learning-curve files."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import MorphologySpec, dynamics, make_variant
from .policy import ActorNetwork

N_ROLLOUTS = 20
CURVE_HEADER = ["env", "steps", "mean_return", "std_return", "wall_clock_s"]


@dataclass
class EvalReport:
    env_name: str
    n_rollouts: int
    mean_return: float
    std_return: float
    per_rollout_returns: list[float] = field(default_factory=list)
    std_defined: bool = True

    @classmethod
    def from_returns(cls, env_name: str, returns) -> EvalReport:
        r = np.asarray(returns, dtype=np.float64)
        n = len(r)
        if n > 1 and np.all(r == r[0]):
            # summation rounding would otherwise leave ~1e-13 of spurious spread
            mean, std = float(r[0]), 0.0
        else:
            mean = float(np.mean(r))
            std = float(np.std(r, ddof=1)) if n > 1 else 0.0
        return cls(env_name, n, mean, std, r.tolist(), n > 1)


def rollout_returns(
    actor: ActorNetwork,
    spec: MorphologySpec,
    head_id: int,
    n_rollouts: int,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> np.ndarray:
    """Cumulative reward of ``n_rollouts`` full episodes, stepped in lockstep."""
    v = np.zeros(n_rollouts)
    totals = np.zeros(n_rollouts)
    obs = np.zeros((n_rollouts, 2))
    for t in range(spec.horizon):
        obs[:, 0] = v
        obs[:, 1] = t / spec.horizon
        params, _ = actor.policy(obs, head_id)
        if deterministic:
            action = params.mean
        else:
            z = rng.standard_normal(params.mean.shape)
            action = params.mean + np.exp(0.5 * params.log_var) * z
        action = np.clip(action, -1.0, 1.0)
        v, reward = dynamics(v, action[:, 0], action[:, 1], spec)
        totals += reward
    return totals


def evaluate(
    actor: ActorNetwork,
    env_name: str,
    head_id: int = 0,
    n_rollouts: int = N_ROLLOUTS,
    seed: int | np.random.Generator = 0,
    deterministic: bool = False,
) -> EvalReport:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    returns = rollout_returns(actor, make_variant(env_name), head_id, n_rollouts, rng, deterministic)
    return EvalReport.from_returns(env_name, returns)


@dataclass
class CurveRow:
    env_name: str
    env_steps: int
    mean_return: float
    std_return: float
    wall_clock_s: float = 0.0


def write_curve(rows: list[CurveRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in rows:
            w.writerow([r.env_name, r.env_steps, repr(float(r.mean_return)),
                        repr(float(r.std_return)), repr(float(r.wall_clock_s))])
    return path


def read_curve(path) -> list[CurveRow]:
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CURVE_HEADER:
            raise ValueError(f"unexpected curve header {header}")
        return [CurveRow(e, int(s), float(m), float(sd), float(w)) for e, s, m, sd, w in reader]


def format_reports(reports: list[EvalReport]) -> str:
    width = max([len("env")] + [len(r.env_name) for r in reports])
    lines = [f"{'env':<{width}}  {'n':>3}  mean +- std"]
    for r in reports:
        flag = "" if r.std_defined else "  (std undefined, n=1)"
        lines.append(f"{r.env_name:<{width}}  {r.n_rollouts:>3}  {r.mean_return:.2f} +- {r.std_return:.2f}{flag}")
    return "\n".join(lines)

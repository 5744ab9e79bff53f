"""Synchronous advantage actor-critic with t_max-step rollout segments."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .checkpoint import Checkpoint
from .envs import ACT_DIM, OBS_DIM, EnvCursor, make_variant
from .evaluation import CurveRow, evaluate
from .nn import NonFiniteError, RmsPropState, rmsprop_step
from .policy import (
    ActorNetwork,
    CriticNetwork,
    entropy,
    log_prob,
    log_prob_grads,
    make_actor,
    make_critic,
    sample_action,
)


@dataclass
class TrainConfig:
    lr: float = 0.0007
    gamma: float = 0.99
    t_max: int = 5
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    total_env_steps: int = 200_000
    eval_every: int = 10_000
    seed: int = 0
    n_eval_rollouts: int = 20
    eval_deterministic: bool = False
    rms_decay: float = 0.99
    rms_eps: float = 1e-5
    max_grad_norm: float | None = None
    hidden: int = 64

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.lr <= 0 or self.entropy_coef < 0 or self.value_coef < 0:
            raise ValueError("lr must be positive; coefficients non-negative")
        if self.total_env_steps < 0 or self.eval_every < 1 or self.n_eval_rollouts < 1:
            raise ValueError("bad step budget / evaluation settings")

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)


@dataclass
class RolloutSegment:
    observations: np.ndarray  # (k, obs_dim)
    actions: np.ndarray  # (k, act_dim)
    rewards: np.ndarray  # (k,)
    values: np.ndarray  # (k,)
    done: bool
    bootstrap_value: float
    head_id: int = 0

    def __len__(self):
        return len(self.rewards)


def seed_streams(seed: int, n: int = 3) -> list[np.random.Generator]:
    """Independent generators for init / acting / evaluation."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def collect_segment(
    cursor: EnvCursor,
    actor: ActorNetwork,
    critic: CriticNetwork,
    head_id: int,
    t_max: int,
    rng: np.random.Generator,
) -> RolloutSegment:
    """Step the cursor up to ``t_max`` times with the current policy.

    Stops early at episode end, in which case the cursor has already been
    reset and the bootstrap value is zero.
    """
    obs, acts, rews = [], [], []
    done = False
    for _ in range(t_max):
        params, _ = actor.policy(cursor.obs, head_id)
        action = sample_action(params, rng)
        obs.append(cursor.obs)
        acts.append(action)
        res = cursor.step(action)
        rews.append(res.reward)
        if res.done:
            done = True
            break
    observations = np.array(obs)
    # the critic is fixed during collection, so one batched pass gives V(s_t)
    # and the bootstrap V(s_{t+k}) together
    batch = observations if done else np.vstack([observations, cursor.obs])
    values, _ = critic.value(batch, head_id)
    bootstrap = 0.0 if done else float(values[-1])
    return RolloutSegment(
        observations=observations,
        actions=np.array(acts),
        rewards=np.array(rews, dtype=np.float64),
        values=np.array(values[: len(obs)]),
        done=done,
        bootstrap_value=bootstrap,
        head_id=head_id,
    )


def compute_advantages_returns(segment: RolloutSegment, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """n-step returns bootstrapped from the segment end, and advantages
    ``return_t - V(s_t)``."""
    k = len(segment)
    returns = np.empty(k)
    acc = segment.bootstrap_value
    for t in range(k - 1, -1, -1):
        acc = segment.rewards[t] + gamma * acc
        returns[t] = acc
    return returns - segment.values, returns


@dataclass
class LossStats:
    total: float
    policy: float
    value: float
    entropy: float


def a2c_loss_and_grads(
    actor: ActorNetwork, critic: CriticNetwork, segment: RolloutSegment, config: TrainConfig
) -> tuple[LossStats, list, list]:
    """Summed A2C loss over the segment and its gradients.

    Advantages come from the values recorded at collection time and are
    constants here; the value loss uses a fresh critic pass.
    """
    adv, returns = compute_advantages_returns(segment, config.gamma)
    h = segment.head_id
    params, a_cache = actor.policy(segment.observations, h)
    lp = log_prob(params, segment.actions)
    ent = entropy(params)
    values, c_cache = critic.value(segment.observations, h)

    policy_loss = float(-np.sum(lp * adv))
    ent_sum = float(np.sum(ent))
    err = values - returns
    value_loss = float(np.sum(err * err))
    total = policy_loss - config.entropy_coef * ent_sum + config.value_coef * value_loss
    if not np.isfinite(total):
        raise NonFiniteError(
            f"non-finite A2C loss (policy={policy_loss}, value={value_loss}) on head {h}; "
            f"rewards={segment.rewards.tolist()} values={segment.values.tolist()}"
        )

    g_mean, g_lv = log_prob_grads(params, segment.actions)
    d_mean = -adv[:, None] * g_mean
    d_lv = -adv[:, None] * g_lv - 0.5 * config.entropy_coef
    actor_grads = actor.backward_params(a_cache, d_mean, d_lv)
    critic_grads = critic.backward_value(c_cache, 2.0 * config.value_coef * err)
    return LossStats(total, policy_loss, value_loss, ent_sum), actor_grads, critic_grads


def _apply_mask(grads: list, frozen: frozenset[int]) -> list:
    if not frozen:
        return grads
    return [None if i in frozen else g for i, g in enumerate(grads)]


def a2c_update(
    actor: ActorNetwork,
    critic: CriticNetwork,
    segment: RolloutSegment,
    config: TrainConfig,
    actor_opt: RmsPropState,
    critic_opt: RmsPropState,
    actor_frozen: frozenset[int] = frozenset(),
    critic_frozen: frozenset[int] = frozenset(),
) -> LossStats:
    stats, ga, gc = a2c_loss_and_grads(actor, critic, segment, config)
    rmsprop_step(actor.parameters(), _apply_mask(ga, actor_frozen), actor_opt, config.lr, config.max_grad_norm)
    rmsprop_step(critic.parameters(), _apply_mask(gc, critic_frozen), critic_opt, config.lr, config.max_grad_norm)
    return stats


class A2CLearner:
    """Actor, critic, their optimizers and the acting RNG, bundled for the
    training loops (single-task, multi-task and fine-tuning)."""

    def __init__(
        self,
        actor: ActorNetwork,
        critic: CriticNetwork,
        config: TrainConfig,
        act_rng: np.random.Generator,
        actor_frozen: frozenset[int] = frozenset(),
        critic_frozen: frozenset[int] = frozenset(),
    ):
        self.actor = actor
        self.critic = critic
        self.config = config
        self.rng = act_rng
        self.actor_opt = RmsPropState.for_params(actor.parameters(), config.rms_decay, config.rms_eps)
        self.critic_opt = RmsPropState.for_params(critic.parameters(), config.rms_decay, config.rms_eps)
        self.actor_frozen = actor_frozen
        self.critic_frozen = critic_frozen
        self.updates = 0

    def run(self, cursor: EnvCursor, head_id: int, n_steps: int) -> int:
        """Train on exactly ``n_steps`` environment steps; returns steps used."""
        used = 0
        while used < n_steps:
            seg = collect_segment(
                cursor, self.actor, self.critic, head_id,
                min(self.config.t_max, n_steps - used), self.rng,
            )
            a2c_update(
                self.actor, self.critic, seg, self.config, self.actor_opt, self.critic_opt,
                self.actor_frozen, self.critic_frozen,
            )
            used += len(seg)
            self.updates += 1
        return used


def zero_clock() -> float:
    return 0.0


class CurveRecorder:
    """Evaluates at fixed step intervals and collects :class:`CurveRow`s.

    ``clock`` defaults to a constant so curve files are reproducible; pass
    ``time.perf_counter`` to record real timings.
    """

    def __init__(self, config: TrainConfig, eval_rng: np.random.Generator,
                 clock: Callable[[], float] | None = None):
        self.config = config
        self.rng = eval_rng
        self.clock = clock or zero_clock
        self.t0 = self.clock()
        self.rows: list[CurveRow] = []

    def record(self, actor: ActorNetwork, env_name: str, head_id: int, steps: int) -> CurveRow:
        rep = evaluate(actor, env_name, head_id, self.config.n_eval_rollouts, self.rng,
                       self.config.eval_deterministic)
        row = CurveRow(env_name, steps, rep.mean_return, rep.std_return, self.clock() - self.t0)
        self.rows.append(row)
        return row


def eval_points(total: int, every: int) -> list[int]:
    pts = list(range(every, total + 1, every))
    if total > 0 and (not pts or pts[-1] != total):
        pts.append(total)
    return pts


def train_single(
    env_name: str,
    config: TrainConfig | None = None,
    clock: Callable[[], float] | None = None,
) -> tuple[Checkpoint, list[CurveRow]]:
    """Train a fresh single-head actor and critic on one variant."""
    config = config or TrainConfig()
    init_rng, act_rng, eval_rng = seed_streams(config.seed)
    actor = make_actor(OBS_DIM, ACT_DIM, 1, init_rng, config.hidden)
    critic = make_critic(OBS_DIM, 1, init_rng, "single", config.hidden)
    learner = A2CLearner(actor, critic, config, act_rng)
    cursor = EnvCursor(make_variant(env_name))
    recorder = CurveRecorder(config, eval_rng, clock)
    done = 0
    for target in eval_points(config.total_env_steps, config.eval_every):
        done += learner.run(cursor, 0, target - done)
        recorder.record(actor, env_name, 0, done)
    ckpt = Checkpoint(
        actor=actor, critic=critic, kind="single", env_names=[env_name],
        config=dataclasses.asdict(config), seed=config.seed,
    )
    return ckpt, recorder.rows

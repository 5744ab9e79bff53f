"""Vanilla multi-task A2C, fine-tuning transfer, and cross-environment evaluation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .a2c import A2CLearner, CurveRecorder, TrainConfig, eval_points, seed_streams
from .checkpoint import Checkpoint, copy_checkpoint
from .envs import ACT_DIM, OBS_DIM, EnvCursor, make_variant
from .evaluation import N_ROLLOUTS, CurveRow, EvalReport, evaluate
from .policy import MultiHeadNet, make_actor, make_critic


@dataclass
class MultiTaskSchedule:
    env_names: list[str]
    steps_per_visit: int
    total_steps_per_env: int

    def __post_init__(self):
        if self.steps_per_visit < 1 or self.total_steps_per_env < 0:
            raise ValueError("steps_per_visit must be >= 1 and budget non-negative")

    def visits(self) -> Iterator[tuple[int, int]]:
        """Yield ``(env_index, n_steps)`` round-robin until every env has
        consumed its budget; the final visit may be short."""
        consumed = [0] * len(self.env_names)
        while any(c < self.total_steps_per_env for c in consumed):
            for i in range(len(self.env_names)):
                n = min(self.steps_per_visit, self.total_steps_per_env - consumed[i])
                if n > 0:
                    consumed[i] += n
                    yield i, n


def train_vanilla_multitask(
    env_names: list[str],
    config: TrainConfig | None = None,
    steps_per_visit: int | None = None,
    clock: Callable[[], float] | None = None,
) -> tuple[Checkpoint, list[CurveRow]]:
    """A2C on an n-head actor and critic, cycling environments.

    ``config.total_env_steps`` is the budget *per environment*. Visit ``i``
    trains actor head ``i`` and critic head ``i`` along with the shared trunks.
    """
    config = config or TrainConfig()
    if len(env_names) < 2:
        raise ValueError("vanilla multi-task needs at least two environments")
    steps_per_visit = steps_per_visit or config.t_max
    if steps_per_visit % config.t_max:
        raise ValueError("steps_per_visit must be a multiple of t_max")
    schedule = MultiTaskSchedule(list(env_names), steps_per_visit, config.total_env_steps)
    n = len(env_names)
    init_rng, act_rng, eval_rng = seed_streams(config.seed)
    actor = make_actor(OBS_DIM, ACT_DIM, n, init_rng, config.hidden)
    critic = make_critic(OBS_DIM, n, init_rng, "multitask", config.hidden)
    learner = A2CLearner(actor, critic, config, act_rng)
    cursors = [EnvCursor(make_variant(e)) for e in env_names]
    recorder = CurveRecorder(config, eval_rng, clock)
    consumed = [0] * n
    pending = [eval_points(config.total_env_steps, config.eval_every) for _ in env_names]
    for i, steps in schedule.visits():
        consumed[i] += learner.run(cursors[i], i, steps)
        while pending[i] and consumed[i] >= pending[i][0]:
            pending[i].pop(0)
            recorder.record(actor, env_names[i], i, consumed[i])
    ckpt = Checkpoint(
        actor=actor, critic=critic, kind="multitask", env_names=list(env_names),
        config=dataclasses.asdict(config), seed=config.seed,
        extra={"steps_per_env": dict(zip(env_names, consumed))},
    )
    return ckpt, recorder.rows


@dataclass
class FreezeMask:
    """Indices into ``parameters()`` of the actor / critic that stay fixed."""

    actor_frozen: frozenset[int]
    critic_frozen: frozenset[int]

    @classmethod
    def last_layer_only(cls, actor: MultiHeadNet, critic: MultiHeadNet) -> FreezeMask:
        return cls(_all_but_last(actor), _all_but_last(critic))

    @classmethod
    def none(cls) -> FreezeMask:
        return cls(frozenset(), frozenset())


def _all_but_last(net: MultiHeadNet) -> frozenset[int]:
    trainable = set()
    for h in range(net.n_heads):
        s = net.head_slice(h)
        trainable.update((s.stop - 2, s.stop - 1))  # final layer's weight and bias
    return frozenset(set(range(len(net.parameters()))) - trainable)


def transfer_and_finetune(
    source: Checkpoint,
    target_env: str,
    config: TrainConfig | None = None,
    full_network: bool = False,
    clock: Callable[[], float] | None = None,
) -> tuple[Checkpoint, list[CurveRow]]:
    """Copy a single-task actor/critic and continue A2C on ``target_env``.

    Unless ``full_network`` is set, only the final layer of each network is
    trained. Optimizer state starts fresh.
    """
    config = config or TrainConfig()
    if source.critic is None:
        raise ValueError("fine-tuning needs a checkpoint with a critic")
    if source.actor.n_heads != 1 or source.critic.n_heads != 1:
        raise ValueError("fine-tuning expects a single-task checkpoint")
    if source.actor.in_dim != OBS_DIM or source.actor.action_dim != ACT_DIM:
        raise ValueError(
            f"architecture mismatch: checkpoint is {source.actor.in_dim}->{source.actor.action_dim}, "
            f"environment is {OBS_DIM}->{ACT_DIM}"
        )
    target = copy_checkpoint(source)
    actor, critic = target.actor, target.critic
    mask = FreezeMask.none() if full_network else FreezeMask.last_layer_only(actor, critic)
    _, act_rng, eval_rng = seed_streams(config.seed)
    learner = A2CLearner(actor, critic, config, act_rng, mask.actor_frozen, mask.critic_frozen)
    cursor = EnvCursor(make_variant(target_env))
    recorder = CurveRecorder(config, eval_rng, clock)
    done = 0
    for point in eval_points(config.total_env_steps, config.eval_every):
        done += learner.run(cursor, 0, point - done)
        recorder.record(actor, target_env, 0, done)
    ckpt = Checkpoint(
        actor=actor, critic=critic, kind="finetune", env_names=[target_env],
        config=dataclasses.asdict(config), seed=config.seed,
        extra={
            "source_envs": list(source.env_names),
            "full_network": full_network,
            "frozen_actor": sorted(mask.actor_frozen),
            "frozen_critic": sorted(mask.critic_frozen),
        },
    )
    return ckpt, recorder.rows


def head_for(ckpt: Checkpoint, env_name: str, position: int) -> int:
    if ckpt.n_heads == 1:
        return 0
    if env_name in ckpt.env_names:
        return ckpt.env_names.index(env_name)
    if position < ckpt.n_heads:
        return position
    raise IndexError(f"no head for {env_name!r} in a {ckpt.n_heads}-head checkpoint")


def evaluate_matrix(
    ckpt: Checkpoint,
    env_names: list[str],
    n_rollouts: int = N_ROLLOUTS,
    seed: int = 0,
    deterministic: bool = False,
) -> list[EvalReport]:
    """One report per environment, each from its own seeded RNG stream.

    Multi-head checkpoints use the head trained on that environment (by name,
    else by position); single-head checkpoints use head 0 everywhere.
    """
    streams = np.random.SeedSequence(seed).spawn(len(env_names))
    return [
        evaluate(ckpt.actor, env, head_for(ckpt, env, i), n_rollouts,
                 np.random.default_rng(streams[i]), deterministic)
        for i, env in enumerate(env_names)
    ]

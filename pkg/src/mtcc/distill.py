"""Policy distillation from frozen Gaussian teachers into student heads."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .a2c import CurveRecorder, eval_points, seed_streams
from .checkpoint import Checkpoint
from .envs import ACT_DIM, OBS_DIM, EnvCursor, make_variant
from .evaluation import CurveRow
from .nn import NonFiniteError, RmsPropState, rmsprop_step
from .policy import (
    ActorNetwork,
    GaussianParams,
    kl_diag_gaussian,
    kl_student_grads,
    make_actor,
    sample_action,
)

# window (in updates) used to summarise the start and end of a KL history
KL_WINDOW = 20


@dataclass
class DistillConfig:
    p_student: float = 0.5
    t_max: int = 5
    lr: float = 0.0007
    total_env_steps: int = 50_000
    seed: int = 0
    batch_segments: int = 1
    eval_every: int = 10_000
    n_eval_rollouts: int = 20
    eval_deterministic: bool = False
    rms_decay: float = 0.99
    rms_eps: float = 1e-5
    max_grad_norm: float | None = None
    hidden: int = 64

    def __post_init__(self):
        if not 0.0 <= self.p_student <= 1.0:
            raise ValueError("p_student must lie in [0, 1]")
        if self.t_max < 1 or self.batch_segments < 1:
            raise ValueError("t_max and batch_segments must be >= 1")
        if self.lr <= 0 or self.total_env_steps < 0 or self.eval_every < 1:
            raise ValueError("bad lr / budget / evaluation interval")

    @property
    def p_teacher(self) -> float:
        return 1.0 - self.p_student

    def replace(self, **changes) -> DistillConfig:
        return dataclasses.replace(self, **changes)


@dataclass
class DistillBatch:
    observations: np.ndarray  # (n, obs_dim)
    teacher_params: GaussianParams  # batched (n, d)
    env_id: int = 0
    behaviour: tuple[str, ...] = ()  # "student" / "teacher", one per segment

    def __len__(self):
        return len(self.observations)


def collect_distill_batch(
    cursor: EnvCursor,
    teacher: ActorNetwork,
    student: ActorNetwork,
    head_id: int,
    config: DistillConfig,
    rng: np.random.Generator,
    max_steps: int | None = None,
) -> DistillBatch:
    """Roll out ``batch_segments`` segments, each driven by the student with
    probability ``p_student`` and by the teacher otherwise. Targets are the
    teacher's Gaussian at every visited observation."""
    budget = config.t_max * config.batch_segments if max_steps is None else max_steps
    obs: list[np.ndarray] = []
    behaviour = []
    while len(obs) < budget:
        use_student = rng.random() < config.p_student
        behaviour.append("student" if use_student else "teacher")
        net, head = (student, head_id) if use_student else (teacher, 0)
        for _ in range(min(config.t_max, budget - len(obs))):
            params, _ = net.policy(cursor.obs, head)
            obs.append(cursor.obs)
            if cursor.step(sample_action(params, rng)).done:
                break
    observations = np.array(obs)
    targets, _ = teacher.policy(observations, 0)
    return DistillBatch(observations, targets, head_id, tuple(behaviour))


def distill_loss_and_grads(student: ActorNetwork, batch: DistillBatch) -> tuple[float, list]:
    params, cache = student.policy(batch.observations, batch.env_id)
    kl = kl_diag_gaussian(batch.teacher_params, params)
    loss = float(np.mean(kl))
    if not np.isfinite(loss):
        raise NonFiniteError(f"non-finite distillation loss on head {batch.env_id}")
    n = len(batch)
    d_mean, d_lv = kl_student_grads(batch.teacher_params, params)
    grads = student.backward_params(cache, d_mean / n, d_lv / n)
    return loss, grads


def distill_update(
    student: ActorNetwork,
    batch: DistillBatch,
    opt: RmsPropState,
    lr: float,
    max_grad_norm: float | None = None,
) -> float:
    """One RMSprop step on the student trunk and head ``batch.env_id``.
    Returns the batch-mean KL before the step."""
    loss, grads = distill_loss_and_grads(student, batch)
    rmsprop_step(student.parameters(), grads, opt, lr, max_grad_norm)
    return loss


def _kl_summary(histories: dict[str, list[float]]) -> dict[str, dict[str, float]]:
    out = {}
    for env, h in histories.items():
        if h:
            out[env] = {
                "initial": float(np.mean(h[:KL_WINDOW])),
                "final": float(np.mean(h[-KL_WINDOW:])),
                "updates": len(h),
            }
    return out


def _run_distillation(
    env_names: list[str],
    teachers: list[ActorNetwork],
    student: ActorNetwork,
    config: DistillConfig,
    clock: Callable[[], float] | None,
) -> tuple[dict[str, list[float]], list[CurveRow]]:
    _, act_rng, eval_rng = seed_streams(config.seed)
    opt = RmsPropState.for_params(student.parameters(), config.rms_decay, config.rms_eps)
    cursors = [EnvCursor(make_variant(e)) for e in env_names]
    recorder = CurveRecorder(config, eval_rng, clock)  # type: ignore[arg-type]
    history: dict[str, list[float]] = {e: [] for e in env_names}
    consumed = [0] * len(env_names)
    pending = [eval_points(config.total_env_steps, config.eval_every) for _ in env_names]
    per_visit = config.t_max * config.batch_segments
    while any(c < config.total_env_steps for c in consumed):
        for i, env in enumerate(env_names):
            left = config.total_env_steps - consumed[i]
            if left <= 0:
                continue
            batch = collect_distill_batch(
                cursors[i], teachers[i], student, i, config, act_rng, min(per_visit, left)
            )
            history[env].append(distill_update(student, batch, opt, config.lr, config.max_grad_norm))
            consumed[i] += len(batch)
            while pending[i] and consumed[i] >= pending[i][0]:
                pending[i].pop(0)
                recorder.record(student, env, i, consumed[i])
    return history, recorder.rows


def train_distill(
    env_name: str,
    teacher: Checkpoint,
    config: DistillConfig | None = None,
    clock: Callable[[], float] | None = None,
) -> tuple[Checkpoint, list[CurveRow]]:
    """Single-environment distillation with student/teacher behaviour mixing."""
    config = config or DistillConfig()
    init_rng = seed_streams(config.seed)[0]
    student = make_actor(OBS_DIM, ACT_DIM, 1, init_rng, config.hidden)
    history, rows = _run_distillation([env_name], [teacher.actor], student, config, clock)
    ckpt = Checkpoint(
        actor=student, critic=None, kind="distill", env_names=[env_name],
        config=dataclasses.asdict(config), seed=config.seed,
        extra={"kl": _kl_summary(history)},
    )
    return ckpt, rows


def train_distill_multitask(
    env_names: list[str],
    teachers: list[Checkpoint],
    config: DistillConfig | None = None,
    clock: Callable[[], float] | None = None,
) -> tuple[Checkpoint, list[CurveRow]]:
    """Distil one teacher per environment into the matching head of a shared
    student actor. Rollouts always come from the student; no critic is built."""
    config = (config or DistillConfig()).replace(p_student=1.0)
    if len(teachers) != len(env_names):
        raise ValueError(f"{len(teachers)} teacher checkpoints for {len(env_names)} environments")
    if not env_names:
        raise ValueError("need at least one environment")
    for env, t in zip(env_names, teachers):
        if t.actor.in_dim != OBS_DIM or t.actor.action_dim != ACT_DIM:
            raise ValueError(f"teacher for {env} has an incompatible architecture")
    init_rng = seed_streams(config.seed)[0]
    student = make_actor(OBS_DIM, ACT_DIM, len(env_names), init_rng, config.hidden)
    history, rows = _run_distillation(
        list(env_names), [t.actor for t in teachers], student, config, clock
    )
    ckpt = Checkpoint(
        actor=student, critic=None, kind="distill_multitask", env_names=list(env_names),
        config=dataclasses.asdict(config), seed=config.seed,
        extra={"kl": _kl_summary(history)},
    )
    return ckpt, rows

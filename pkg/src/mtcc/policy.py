"""Diagonal Gaussian policies, multi-head actor/critic networks.

Actor heads emit ``mean || log_var`` for each action dimension. The log
variance is clamped to ``[LOG_VAR_MIN, LOG_VAR_MAX]`` before use; the clamp
passes no gradient outside that range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ForwardCache, Mlp, ShapeError, make_mlp, mlp_backward, mlp_forward

LOG_2PI = float(np.log(2 * np.pi))
LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 4.0
HIDDEN = 64


@dataclass
class GaussianParams:
    """Mean and log-variance, shape ``(d,)`` or batched ``(n, d)``."""

    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if self.mean.shape != self.log_var.shape:
            raise ShapeError(f"mean {self.mean.shape} vs log_var {self.log_var.shape}")

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def __getitem__(self, i) -> GaussianParams:
        return GaussianParams(self.mean[i], self.log_var[i])


def sample_action(params: GaussianParams, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(params.mean.shape)
    return params.mean + np.exp(0.5 * params.log_var) * z


def log_prob(params: GaussianParams, action) -> np.ndarray | float:
    diff = np.asarray(action, dtype=np.float64) - params.mean
    terms = diff * diff * np.exp(-params.log_var) + params.log_var + LOG_2PI
    return -0.5 * np.sum(terms, axis=-1)


def log_prob_grads(params: GaussianParams, action) -> tuple[np.ndarray, np.ndarray]:
    """d log_prob / d(mean, log_var)."""
    diff = np.asarray(action, dtype=np.float64) - params.mean
    inv_var = np.exp(-params.log_var)
    return diff * inv_var, 0.5 * (diff * diff * inv_var - 1.0)


def entropy(params: GaussianParams) -> np.ndarray | float:
    return 0.5 * np.sum(LOG_2PI + 1.0 + params.log_var, axis=-1)


def entropy_grads(params: GaussianParams) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros_like(params.mean), np.full_like(params.log_var, 0.5)


def _check_pair(teacher: GaussianParams, student: GaussianParams):
    if teacher.mean.shape != student.mean.shape:
        raise ShapeError(
            f"teacher shape {teacher.mean.shape} != student shape {student.mean.shape}"
        )


def kl_diag_gaussian(teacher: GaussianParams, student: GaussianParams) -> np.ndarray | float:
    """Distillation divergence between a teacher and student Gaussian.

    Computes
    ``1/2 [sum(lv_T - lv_S) - d + sum exp(lv_S - lv_T)] + 1/2 sum (mu_T - mu_S)^2 exp(-lv_T)``,
    which in the usual argument order is KL(student || teacher): the
    expectation is taken under the student.
    """
    _check_pair(teacher, student)
    d = teacher.dim
    dlv = teacher.log_var - student.log_var
    dmu = teacher.mean - student.mean
    cov_part = 0.5 * (np.sum(dlv, axis=-1) - d + np.sum(np.exp(-dlv), axis=-1))
    mean_part = 0.5 * np.sum(dmu * dmu * np.exp(-teacher.log_var), axis=-1)
    return cov_part + mean_part


def kl_student_grads(
    teacher: GaussianParams, student: GaussianParams
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`kl_diag_gaussian` w.r.t. the student's mean and log_var."""
    _check_pair(teacher, student)
    d_mean = (student.mean - teacher.mean) * np.exp(-teacher.log_var)
    d_log_var = 0.5 * (np.exp(student.log_var - teacher.log_var) - 1.0)
    return d_mean, d_log_var


@dataclass
class HeadCache:
    head_id: int
    trunk: ForwardCache
    head: ForwardCache
    raw_log_var: np.ndarray | None = None


class MultiHeadNet:
    """A shared trunk feeding one of several per-environment heads.

    ``parameters()`` lists the trunk first, then every head in order; gradient
    lists use the same layout with ``None`` for heads that were not used.
    """

    def __init__(self, trunk: Mlp, heads: list[Mlp]):
        if not heads:
            raise ValueError("need at least one head")
        for i, h in enumerate(heads):
            if h.in_dim != trunk.out_dim:
                raise ShapeError(f"head {i} expects {h.in_dim} inputs, trunk gives {trunk.out_dim}")
            if h.out_dim != heads[0].out_dim:
                raise ShapeError(f"head {i} output dim differs from head 0")
        self.trunk = trunk
        self.heads = heads

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    @property
    def in_dim(self) -> int:
        return self.trunk.in_dim

    @property
    def out_dim(self) -> int:
        return self.heads[0].out_dim

    def parameters(self) -> list[np.ndarray]:
        params = self.trunk.parameters()
        for h in self.heads:
            params.extend(h.parameters())
        return params

    def head_slice(self, head_id: int) -> slice:
        start = len(self.trunk.parameters())
        for h in self.heads[:head_id]:
            start += len(h.parameters())
        return slice(start, start + len(self.heads[head_id].parameters()))

    def trunk_slice(self) -> slice:
        return slice(0, len(self.trunk.parameters()))

    def _check_head(self, head_id: int):
        if not 0 <= head_id < self.n_heads:
            raise IndexError(f"head_id {head_id} out of range for {self.n_heads} heads")

    def forward(self, x, head_id: int = 0) -> tuple[np.ndarray, HeadCache]:
        self._check_head(head_id)
        feats, tc = mlp_forward(self.trunk, x)
        out, hc = mlp_forward(self.heads[head_id], feats)
        return out, HeadCache(head_id, tc, hc)

    def backward(self, cache: HeadCache, grad_out) -> list[np.ndarray | None]:
        head_grads, g_feats = mlp_backward(self.heads[cache.head_id], cache.head, grad_out)
        trunk_grads, _ = mlp_backward(self.trunk, cache.trunk, g_feats)
        grads: list = [None] * len(self.parameters())
        grads[self.trunk_slice()] = trunk_grads
        grads[self.head_slice(cache.head_id)] = head_grads
        return grads


def add_grads(a: list, b: list) -> list:
    out = []
    for x, y in zip(a, b):
        if x is None:
            out.append(y)
        elif y is None:
            out.append(x)
        else:
            out.append(x + y)
    return out


class ActorNetwork(MultiHeadNet):
    def __init__(self, trunk: Mlp, heads: list[Mlp], action_dim: int):
        super().__init__(trunk, heads)
        if self.out_dim != 2 * action_dim:
            raise ShapeError(f"heads emit {self.out_dim} values, need {2 * action_dim}")
        self.action_dim = action_dim

    def policy(self, obs, head_id: int = 0) -> tuple[GaussianParams, HeadCache]:
        out, cache = self.forward(obs, head_id)
        d = self.action_dim
        raw = out[..., d:]
        params = GaussianParams(out[..., :d], np.clip(raw, LOG_VAR_MIN, LOG_VAR_MAX))
        cache.raw_log_var = raw
        return params, cache

    def backward_params(self, cache: HeadCache, d_mean, d_log_var) -> list:
        raw = cache.raw_log_var
        inside = (raw >= LOG_VAR_MIN) & (raw <= LOG_VAR_MAX)
        g = np.concatenate([d_mean, np.where(inside, d_log_var, 0.0)], axis=-1)
        return self.backward(cache, g)


def policy_forward(actor: ActorNetwork, obs, head_id: int = 0) -> GaussianParams:
    return actor.policy(obs, head_id)[0]


class CriticNetwork(MultiHeadNet):
    """Value network; ``layout`` is ``"single"`` (two shared hidden layers and
    a linear head) or ``"multitask"`` (one shared hidden layer, each head its own
    hidden layer plus linear output)."""

    def __init__(self, trunk: Mlp, heads: list[Mlp], layout: str = "single"):
        super().__init__(trunk, heads)
        if self.out_dim != 1:
            raise ShapeError("critic heads must output a scalar")
        self.layout = layout

    def value(self, obs, head_id: int = 0) -> tuple[np.ndarray, HeadCache]:
        out, cache = self.forward(obs, head_id)
        return out[..., 0], cache

    def backward_value(self, cache: HeadCache, d_value) -> list:
        return self.backward(cache, np.asarray(d_value, dtype=np.float64)[..., None])


def make_actor(
    obs_dim: int, action_dim: int, n_heads: int, rng: np.random.Generator, hidden: int = HIDDEN
) -> ActorNetwork:
    trunk = make_mlp([obs_dim, hidden, hidden], rng, final_activation="tanh")
    heads = [make_mlp([hidden, 2 * action_dim], rng) for _ in range(n_heads)]
    return ActorNetwork(trunk, heads, action_dim)


def make_critic(
    obs_dim: int,
    n_heads: int,
    rng: np.random.Generator,
    layout: str | None = None,
    hidden: int = HIDDEN,
) -> CriticNetwork:
    if layout is None:
        layout = "single" if n_heads == 1 else "multitask"
    if layout == "single":
        trunk = make_mlp([obs_dim, hidden, hidden], rng, final_activation="tanh")
        heads = [make_mlp([hidden, 1], rng) for _ in range(n_heads)]
    elif layout == "multitask":
        trunk = make_mlp([obs_dim, hidden], rng, final_activation="tanh")
        heads = [make_mlp([hidden, hidden, 1], rng) for _ in range(n_heads)]
    else:
        raise ValueError(f"unknown critic layout {layout!r}")
    return CriticNetwork(trunk, heads, layout)

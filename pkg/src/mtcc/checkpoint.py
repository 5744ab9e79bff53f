"""Self-describing JSON checkpoints.

Floats are written with Python's shortest round-trip repr, so a
save -> load -> save cycle reproduces the file byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .nn import DenseLayer, Mlp
from .policy import ActorNetwork, CriticNetwork, MultiHeadNet

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class MalformedCheckpoint(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class ArchitectureError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    actor: ActorNetwork
    critic: CriticNetwork | None = None
    kind: str = "single"
    env_names: list[str] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def n_heads(self) -> int:
        return self.actor.n_heads


def _describe(mlp: Mlp) -> list:
    return [[l.in_dim, l.out_dim, l.activation] for l in mlp.layers]


def _net_arch(net: MultiHeadNet) -> dict:
    return {"trunk": _describe(net.trunk), "heads": [_describe(h) for h in net.heads]}


def _net_params(prefix: str, net: MultiHeadNet) -> dict[str, list]:
    out = {}
    parts = [("trunk", net.trunk)] + [(f"head{i}", h) for i, h in enumerate(net.heads)]
    for part, mlp in parts:
        for j, layer in enumerate(mlp.layers):
            out[f"{prefix}.{part}.{j}.weight"] = layer.weights.tolist()
            out[f"{prefix}.{part}.{j}.bias"] = layer.bias.tolist()
    return out


def to_dict(ckpt: Checkpoint) -> dict:
    arch: dict[str, Any] = {
        "obs_dim": ckpt.actor.in_dim,
        "action_dim": ckpt.actor.action_dim,
        "n_heads": ckpt.actor.n_heads,
        "actor": _net_arch(ckpt.actor),
        "critic": None,
    }
    params = _net_params("actor", ckpt.actor)
    if ckpt.critic is not None:
        arch["critic"] = dict(_net_arch(ckpt.critic), layout=ckpt.critic.layout)
        params.update(_net_params("critic", ckpt.critic))
    return {
        "format_version": ckpt.format_version,
        "kind": ckpt.kind,
        "env_names": list(ckpt.env_names),
        "seed": ckpt.seed,
        "config": ckpt.config,
        "extra": ckpt.extra,
        "architecture": arch,
        "parameters": params,
    }


def dumps(ckpt: Checkpoint) -> str:
    return json.dumps(to_dict(ckpt), sort_keys=True, indent=1, allow_nan=False) + "\n"


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(ckpt))
    return path


def _build_mlp(desc, params: dict, key: str) -> Mlp:
    layers = []
    for j, entry in enumerate(desc):
        try:
            in_dim, out_dim, act = entry
            w = np.array(params[f"{key}.{j}.weight"], dtype=np.float64)
            b = np.array(params[f"{key}.{j}.bias"], dtype=np.float64)
        except KeyError as e:
            raise ArchitectureError(f"missing parameter {e.args[0]}") from None
        except (TypeError, ValueError) as e:
            raise MalformedCheckpoint(f"bad entry for {key}.{j}: {e}") from None
        if w.shape != (out_dim, in_dim) or b.shape != (out_dim,):
            raise ArchitectureError(
                f"{key}.{j}: tensors {w.shape}/{b.shape} disagree with declared ({out_dim}, {in_dim})"
            )
        layers.append(DenseLayer(w, b, act))
    try:
        return Mlp(layers)
    except ValueError as e:
        raise ArchitectureError(f"{key}: {e}") from None


def _build_net(prefix: str, arch: dict, params: dict):
    trunk = _build_mlp(arch["trunk"], params, f"{prefix}.trunk")
    heads = [_build_mlp(h, params, f"{prefix}.head{i}") for i, h in enumerate(arch["heads"])]
    return trunk, heads


def from_dict(data: dict) -> Checkpoint:
    if not isinstance(data, dict):
        raise MalformedCheckpoint("top level must be an object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format_version {version!r}, expected {FORMAT_VERSION}")
    try:
        arch = data["architecture"]
        params = data["parameters"]
        trunk, heads = _build_net("actor", arch["actor"], params)
        try:
            actor = ActorNetwork(trunk, heads, arch["action_dim"])
        except ValueError as e:
            raise ArchitectureError(f"actor: {e}") from None
        critic = None
        if arch.get("critic") is not None:
            ctrunk, cheads = _build_net("critic", arch["critic"], params)
            try:
                critic = CriticNetwork(ctrunk, cheads, arch["critic"]["layout"])
            except ValueError as e:
                raise ArchitectureError(f"critic: {e}") from None
        if actor.in_dim != arch["obs_dim"] or actor.n_heads != arch["n_heads"]:
            raise ArchitectureError("actor disagrees with obs_dim / n_heads")
        return Checkpoint(
            actor=actor,
            critic=critic,
            kind=data["kind"],
            env_names=list(data["env_names"]),
            config=data["config"],
            seed=data["seed"],
            extra=data.get("extra", {}),
            format_version=version,
        )
    except KeyError as e:
        raise MalformedCheckpoint(f"missing field {e.args[0]!r}") from None


def load_checkpoint(path) -> Checkpoint:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedCheckpoint(f"{path}: not valid JSON ({e})") from None
    return from_dict(data)


def copy_checkpoint(ckpt: Checkpoint) -> Checkpoint:
    return from_dict(json.loads(dumps(ckpt)))

"""Multi-task actor-critic learning for continuous control, in plain numpy."""

from .a2c import TrainConfig, train_single
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .distill import DistillConfig, train_distill, train_distill_multitask
from .envs import SIX_VARIANTS, VARIANT_NAMES, make_variant
from .evaluation import EvalReport, evaluate
from .trainers import evaluate_matrix, train_vanilla_multitask, transfer_and_finetune

__all__ = [
    "Checkpoint",
    "DistillConfig",
    "EvalReport",
    "SIX_VARIANTS",
    "TrainConfig",
    "VARIANT_NAMES",
    "evaluate",
    "evaluate_matrix",
    "load_checkpoint",
    "make_variant",
    "save_checkpoint",
    "train_distill",
    "train_distill_multitask",
    "train_single",
    "train_vanilla_multitask",
    "transfer_and_finetune",
]

"""Adversarial training with loss-ranked mini-batch data selection.

Thin re-export of the compiled core. See the project README for the
training modes, selection policies and file formats.
"""

from ._core import (
    AccuracySource,
    AdvselError,
    AttackConfig,
    Dataset,
    EpochMetrics,
    Gradients,
    Model,
    Rng,
    SelectionKind,
    SelectionPolicy,
    SelectionResult,
    TrainConfig,
    TrainMode,
    __version__,
    error_signal,
    error_signal_literal,
    evaluate,
    fgsm,
    finite_diff_param_grad,
    load_csv,
    load_idx,
    loss_and_input_grad,
    min_adversarial_eps,
    param_grad,
    pgd,
    run_training,
    select_random,
    select_top,
    selection_count,
    sgd_step,
    split,
    synth_gaussians,
    update_pup,
)

__all__ = [
    "AccuracySource",
    "AdvselError",
    "AttackConfig",
    "Dataset",
    "EpochMetrics",
    "Gradients",
    "Model",
    "Rng",
    "SelectionKind",
    "SelectionPolicy",
    "SelectionResult",
    "TrainConfig",
    "TrainMode",
    "__version__",
    "error_signal",
    "error_signal_literal",
    "evaluate",
    "fgsm",
    "finite_diff_param_grad",
    "load_csv",
    "load_idx",
    "loss_and_input_grad",
    "min_adversarial_eps",
    "param_grad",
    "pgd",
    "run_training",
    "select_random",
    "select_top",
    "selection_count",
    "sgd_step",
    "split",
    "synth_gaussians",
    "update_pup",
]

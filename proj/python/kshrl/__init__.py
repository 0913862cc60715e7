"""Kernel-weighted sparse additive Q-function estimation from batch data."""

from ._core import (
    BasisSpec,
    BatchDataset,
    FitMethod,
    FittedModel,
    Hyperparameters,
    InputError,
    KernelFamily,
    KernelSpec,
    LossKind,
    NumericalError,
    SolverConfig,
    StepRule,
    cross_validate,
    eval_basis,
    fit,
    load_model,
    mc_q,
    policy_iterate,
    read_csv,
    regret,
    reward,
    run,
    save_model,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")]

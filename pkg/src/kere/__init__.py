"""Kernel expectile regression (KERE) fitted by majorization-minimization."""

__version__ = "0.1.0"

from .loss import (  # noqa: E402
    ExpectileLevel,
    ScalarDistribution,
    conjugate_value,
    lipschitz_constant,
    loss_grad,
    loss_value,
    population_expectile,
)
from .kernel import GramBundle, KernelSpec, build_bundle, eigendecompose, gram_matrix, kernel_eval  # noqa: E402
from .solver import (  # noqa: E402
    Coefficients,
    FitDiagnostics,
    KuInverseFactory,
    build_ku_inverse,
    dual_objective,
    fit,
    mm_step,
    objective,
    optimality_certificate,
    rate_bound,
)
from .path import PathConfig, PathResult, fit_path, lambda_sequence  # noqa: E402
from .select import CVConfig, CVResult, cross_validate, kfold_split  # noqa: E402
from .model import Model, fit_model, predict  # noqa: E402

__all__ = [
    "ExpectileLevel", "ScalarDistribution", "conjugate_value", "lipschitz_constant",
    "loss_grad", "loss_value", "population_expectile",
    "GramBundle", "KernelSpec", "build_bundle", "eigendecompose", "gram_matrix", "kernel_eval",
    "Coefficients", "FitDiagnostics", "KuInverseFactory", "build_ku_inverse", "dual_objective",
    "fit", "mm_step", "objective", "optimality_certificate", "rate_bound",
    "PathConfig", "PathResult", "fit_path", "lambda_sequence",
    "CVConfig", "CVResult", "cross_validate", "kfold_split",
    "Model", "fit_model", "predict",
]

"""Descending lambda grids and warm-started solution paths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import GramBundle
from .loss import as_level
from .solver import Coefficients, FitDiagnostics, KuInverseFactory, _require_decomposed, fit, rate_bound


@dataclass
class PathConfig:
    """Lambda grid and per-fit stopping rule.

    Leaving ``lambda_max`` unset triggers the doubling probe of
    :func:`default_lambda_max`; an unset ``lambda_min`` becomes
    ``lambda_min_ratio * lambda_max``.
    """

    lambda_max: float | None = None
    lambda_min: float | None = None
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    tol: float | None = None
    max_iter: int = 100

    def __post_init__(self):
        if self.n_lambda < 2:
            raise ValueError("a lambda path needs at least 2 points")
        if self.lambda_max is not None and self.lambda_min is not None:
            if not 0 < self.lambda_min < self.lambda_max:
                raise ValueError("need 0 < lambda_min < lambda_max")
        if not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")

    def resolved(self, lambda_max: float) -> "PathConfig":
        lmin = self.lambda_min if self.lambda_min is not None else self.lambda_min_ratio * lambda_max
        return PathConfig(lambda_max, lmin, self.n_lambda, self.lambda_min_ratio, self.tol, self.max_iter)


@dataclass
class PathResult:
    lambdas: np.ndarray
    coefs: list[Coefficients] = field(default_factory=list)
    diagnostics: list[FitDiagnostics] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)

    @property
    def converged(self) -> np.ndarray:
        return np.array([d.converged for d in self.diagnostics])

    @property
    def total_iterations(self) -> int:
        return sum(d.iterations for d in self.diagnostics)

    def alpha_matrix(self) -> np.ndarray:
        """n x M matrix of coefficient vectors, one column per lambda."""
        return np.column_stack([c.alpha for c in self.coefs])

    def intercepts(self) -> np.ndarray:
        return np.array([c.alpha0 for c in self.coefs])

    def rows(self) -> list[dict]:
        return [{"lambda": float(lam), "alpha0": c.alpha0, "objective": obj,
                 "iterations": d.iterations, "converged": d.converged, "rate_bound": d.rate_bound}
                for lam, c, d, obj in zip(self.lambdas, self.coefs, self.diagnostics, self.objectives)]


def lambda_sequence(config: PathConfig) -> np.ndarray:
    if config.lambda_max is None or config.lambda_min is None:
        raise ValueError("lambda_sequence needs both endpoints; resolve the config first")
    seq = np.geomspace(config.lambda_max, config.lambda_min, config.n_lambda)
    seq[0], seq[-1] = config.lambda_max, config.lambda_min
    return seq


def default_lambda_max(bundle: GramBundle, y, level, factory=None, threshold: float = 1e-4,
                       probe_iter: int = 30) -> float:
    """Smallest lambda of the doubling grid ||y||^2/n * 2^k with max|alpha| <= threshold.

    Each candidate is probed by a short warm-started fit.
    """
    y = np.asarray(y, dtype=float)
    level = as_level(level)
    factory = factory or KuInverseFactory(bundle, level)
    lam = float(y @ y) / y.size
    if lam <= 0:
        lam = 1.0
    coef = None
    for _ in range(200):
        coef, _ = fit(factory.bundle, y, level, lam, init=coef, max_iter=probe_iter,
                      factory=factory, with_rate=False)
        if np.max(np.abs(coef.alpha), initial=0.0) <= threshold:
            return lam
        lam *= 2.0
    raise RuntimeError("lambda_max probe did not terminate")


def fit_path(bundle: GramBundle, y, level, config: PathConfig | None = None, factory=None,
             with_rate: bool = False, lambdas=None) -> PathResult:
    """Fit along a descending lambda grid, warm-starting each fit at the previous one.

    The first fit starts at zero. One factory serves every lambda, so only the
    lambda-dependent pieces of K_u^{-1} are recomputed. Non-converged points are
    kept and flagged in their diagnostics.
    """
    level = as_level(level)
    bundle = _require_decomposed(bundle)
    y = np.asarray(y, dtype=float)
    config = config or PathConfig()
    factory = factory or KuInverseFactory(bundle, level)
    if lambdas is None:
        lmax = config.lambda_max
        if lmax is None:
            lmax = default_lambda_max(bundle, y, level, factory)
        lambdas = lambda_sequence(config.resolved(lmax))
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be strictly descending")

    result = PathResult(lambdas=lambdas)
    coef = Coefficients.zeros(bundle.n)
    for lam in lambdas:
        coef, diag = fit(bundle, y, level, lam, init=coef, tol=config.tol,
                         max_iter=config.max_iter, factory=factory, with_rate=False)
        if with_rate:
            diag.rate_bound = rate_bound(bundle, level, lam, strict=False)
        result.coefs.append(coef)
        result.diagnostics.append(diag)
        result.objectives.append(diag.objective_trace[-1])
    return result

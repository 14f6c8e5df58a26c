"""k-fold cross-validation over the (sigma2, lambda) grid."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelSpec, Standardizer, build_bundle, cross_kernel, median_sq_distance
from .loss import ExpectileLevel, as_level, loss_value
from .path import PathConfig, default_lambda_max, fit_path, lambda_sequence
from .solver import KuInverseFactory

SIGMA2_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass
class CVConfig:
    level: ExpectileLevel | float
    folds: int = 5
    sigma2_grid: tuple[float, ...] | None = None
    path_config: PathConfig = field(default_factory=PathConfig)
    seed: int = 0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    standardize: bool | None = None

    def __post_init__(self):
        self.level = as_level(self.level)
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.sigma2_grid is not None:
            self.sigma2_grid = tuple(float(s) for s in self.sigma2_grid)
            if not self.sigma2_grid or min(self.sigma2_grid) <= 0:
                raise ValueError("sigma2 grid must be non-empty and positive")

    @property
    def use_standardize(self) -> bool:
        return self.kernel.family == "rbf" if self.standardize is None else self.standardize


@dataclass
class CVResult:
    cv_loss: np.ndarray
    cv_se: np.ndarray
    sigma2_grid: np.ndarray
    lambdas: np.ndarray
    best_sigma2: float
    best_lambda: float
    best_index: tuple[int, int]
    folds: np.ndarray
    seed: int
    valid: np.ndarray

    def fold_sizes(self) -> list[int]:
        return np.bincount(self.folds).tolist()

    def grid_rows(self) -> list[dict]:
        rows = []
        for i, s2 in enumerate(self.sigma2_grid):
            for j, lam in enumerate(self.lambdas):
                rows.append({"sigma2": float(s2), "lambda": float(lam),
                             "cv_loss": float(self.cv_loss[i, j]), "cv_se": float(self.cv_se[i, j]),
                             "valid": bool(self.valid[i, j])})
        return rows


def kfold_split(n: int, k: int, seed) -> np.ndarray:
    """Random fold labels in 0..k-1 with sizes differing by at most one."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % k
    return labels


def default_sigma2_grid(Xs) -> tuple[float, ...]:
    med = median_sq_distance(Xs)
    return tuple(q * med for q in SIGMA2_MULTIPLIERS)


def _n_jobs() -> int:
    try:
        return max(1, int(os.environ.get("KERE_THREADS", "1")))
    except ValueError:
        return 1


def _select(cv_loss, valid, lambdas, sigma2_grid):
    # min loss; ties -> largest lambda, then smallest sigma2
    masked = np.where(valid, cv_loss, np.inf)
    best = masked.min()
    if not np.isfinite(best):
        raise RuntimeError("every (sigma2, lambda) cell failed to converge")
    tied = np.argwhere(masked <= best + 1e-12 * (1.0 + abs(best)))
    order = sorted(tied.tolist(), key=lambda ij: (-lambdas[ij[1]], sigma2_grid[ij[0]]))
    return tuple(order[0])


def _fold_cell(Xs, y, train, hold, spec, level, lambdas, path_config, cache, key):
    bundle = cache.get(key) if cache is not None else None
    if bundle is None:
        bundle = build_bundle(spec, Xs[train])
        if cache is not None:
            cache[key] = bundle
    path = fit_path(bundle, y[train], level, path_config, lambdas=lambdas)
    Kx = cross_kernel(spec, Xs[hold], Xs[train])
    pred = Kx @ path.alpha_matrix() + path.intercepts()[None, :]
    held = loss_value(y[hold][:, None] - pred, level).mean(axis=0)
    return held, path.converged


def _full_bundle(Xs, spec, config, cache):
    key = ("full", float(spec.sigma2), config.use_standardize)
    bundle = cache.get(key) if cache is not None else None
    if bundle is None:
        bundle = build_bundle(spec, Xs)
        if cache is not None:
            cache[key] = bundle
    return bundle


def cross_validate(X, y, config: CVConfig, cache: dict | None = None,
                   lambdas=None) -> CVResult:
    """Two-dimensional k-fold CV of the held-out expectile loss.

    For every sigma2 and every fold a Gram bundle is built once on the training
    part and a warm-started lambda path is fitted; the held-out loss is the mean
    of phi over the fold. ``cache`` (keyed by fold and sigma2) lets callers reuse
    bundles across expectile levels. Cells where any fold failed to converge are
    excluded from selection.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    n = y.size
    level = config.level
    labels = kfold_split(n, config.folds, config.seed)
    Xs = Standardizer.fit(X).transform(X) if config.use_standardize else X
    if config.kernel.family == "rbf":
        grid = np.asarray(config.sigma2_grid or default_sigma2_grid(Xs), dtype=float)
    else:
        grid = np.asarray([config.kernel.sigma2])

    pc = config.path_config
    if lambdas is None:
        lmax = pc.lambda_max
        if lmax is None:
            spec = config.kernel.with_sigma2(grid[len(grid) // 2])
            lmax = default_lambda_max(_full_bundle(Xs, spec, config, cache), y, level)
        lambdas = lambda_sequence(pc.resolved(lmax))
    lambdas = np.asarray(lambdas, dtype=float)

    tasks = []
    for i, s2 in enumerate(grid):
        spec = config.kernel.with_sigma2(s2)
        for f in range(config.folds):
            hold = labels == f
            tasks.append((i, f, spec, ~hold, hold))

    jobs = _n_jobs()
    if jobs > 1:
        from joblib import Parallel, delayed
        outs = Parallel(n_jobs=jobs)(
            delayed(_fold_cell)(Xs, y, tr, ho, spec, level, lambdas, pc, None, None)
            for _, _, spec, tr, ho in tasks)
    else:
        outs = [_fold_cell(Xs, y, tr, ho, spec, level, lambdas, pc, cache,
                           (config.seed, config.folds, f, float(spec.sigma2), config.use_standardize))
                for _, f, spec, tr, ho in tasks]

    losses = np.zeros((grid.size, config.folds, lambdas.size))
    valid = np.ones((grid.size, lambdas.size), dtype=bool)
    for (i, f, *_), (held, conv) in zip(tasks, outs):
        losses[i, f] = held
        valid[i] &= conv
    cv_loss = losses.mean(axis=1)
    cv_se = losses.std(axis=1, ddof=1) / np.sqrt(config.folds)
    bi, bj = _select(cv_loss, valid, lambdas, grid)
    return CVResult(cv_loss=cv_loss, cv_se=cv_se, sigma2_grid=grid, lambdas=lambdas,
                    best_sigma2=float(grid[bi]), best_lambda=float(lambdas[bj]),
                    best_index=(bi, bj), folds=labels, seed=config.seed, valid=valid)


def fit_selected(X, y, result: CVResult, config: CVConfig, cache: dict | None = None):
    """Refit on all of (X, y) at the selected cell and return a :class:`~kere.model.Model`.

    The refit walks the warm-started path down to the chosen lambda.
    """
    from .model import Model

    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    std = Standardizer.fit(X) if config.use_standardize else None
    Xs = std.transform(X) if std else X
    spec = config.kernel.with_sigma2(result.best_sigma2) if config.kernel.family == "rbf" else config.kernel
    bundle = _full_bundle(Xs, spec, config, cache)
    j = result.best_index[1]
    path = fit_path(bundle, y, config.level, config.path_config, lambdas=result.lambdas[: j + 1])
    coef, diag = path.coefs[-1], path.diagnostics[-1]
    return Model(kernel=spec, X=X, alpha0=coef.alpha0, alpha=coef.alpha, omega=config.level.omega,
                 lam=float(result.best_lambda), standardizer=std, diagnostics=diag.summary())

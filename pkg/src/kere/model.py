"""Fitted KERE models: prediction and JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .kernel import KernelSpec, Standardizer, build_bundle, cross_kernel
from .io import write_json
from .loss import as_level
from .solver import Coefficients, fit, optimality_certificate

FORMAT_VERSION = 1


@dataclass
class Model:
    """Representer expansion alpha0 + sum_i alpha_i K(x_i, x) plus what predict needs."""

    kernel: KernelSpec
    X: np.ndarray
    alpha0: float
    alpha: np.ndarray
    omega: float
    lam: float
    standardizer: Standardizer | None = None
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.size != self.X.shape[0]:
            raise ValueError("alpha length must equal the number of stored training rows")

    @property
    def coefficients(self) -> Coefficients:
        return Coefficients(self.alpha0, self.alpha)

    def _features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.X.shape[1] == 1 else X[None, :]
        if X.shape[1] != self.X.shape[1]:
            raise ValueError(f"model expects {self.X.shape[1]} features, got {X.shape[1]}")
        return self.standardizer.transform(X) if self.standardizer else X

    def predict(self, Xnew) -> np.ndarray:
        Kx = cross_kernel(self.kernel, self._features(Xnew), self._features(self.X))
        return self.alpha0 + Kx @ self.alpha

    def to_dict(self) -> dict:
        return {
            "format": "kere-model",
            "format_version": FORMAT_VERSION,
            "kere_version": __version__,
            "kernel": self.kernel.to_dict(),
            "standardizer": self.standardizer.to_dict() if self.standardizer else None,
            "omega": self.omega,
            "lambda": self.lam,
            "alpha0": self.alpha0,
            "alpha": self.alpha.tolist(),
            "X": self.X.tolist(),
            "diagnostics": self.diagnostics,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format") != "kere-model":
            raise ValueError("not a KERE model file")
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
        std = d.get("standardizer")
        return cls(kernel=KernelSpec.from_dict(d["kernel"]), X=np.asarray(d["X"], dtype=float),
                   alpha0=float(d["alpha0"]), alpha=np.asarray(d["alpha"], dtype=float),
                   omega=float(d["omega"]), lam=float(d["lambda"]),
                   standardizer=Standardizer.from_dict(std) if std else None,
                   diagnostics=d.get("diagnostics", {}), meta=d.get("meta", {}))

    def save(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "Model":
        return cls.from_dict(json.loads(Path(path).read_text()))


def predict(model: Model, Xnew) -> np.ndarray:
    return model.predict(Xnew)


def fit_model(X, y, omega, lam: float, kernel: KernelSpec | None = None,
              standardize: bool | None = None, tol: float | None = None,
              max_iter: int = 100, init: Coefficients | None = None) -> Model:
    """Fit KERE at one (omega, lambda) and wrap the result as a :class:`Model`.

    Features are standardized by default for the rbf kernel.
    """
    kernel = kernel or KernelSpec()
    level = as_level(omega)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if standardize is None:
        standardize = kernel.family == "rbf"
    std = Standardizer.fit(X) if standardize else None
    Xs = std.transform(X) if std else X
    bundle = build_bundle(kernel, Xs)
    coef, diag = fit(bundle, y, level, lam, init=init, tol=tol, max_iter=max_iter)
    summary = diag.summary()
    summary["certificate"] = optimality_certificate(coef, bundle, y, level, lam)
    return Model(kernel=kernel, X=X, alpha0=coef.alpha0, alpha=coef.alpha, omega=level.omega,
                 lam=float(lam), standardizer=std, diagnostics=summary)

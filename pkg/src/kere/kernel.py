"""Kernels, Gram matrices and their eigendecomposition."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import pdist

FAMILIES = ("rbf", "sigmoid", "polynomial", "linear")
_ALIASES = {"poly": "polynomial", "gaussian": "rbf"}

# relative eigenvalue clamp; see GramBundle
CLAMP = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    family: str = "rbf"
    sigma2: float = 1.0
    kappa: float = 1.0
    theta: float = 1.0
    degree: int = 2

    def __post_init__(self):
        fam = _ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "family", fam)
        if fam == "rbf" and not self.sigma2 > 0:
            raise ValueError("rbf kernel needs sigma2 > 0")
        if fam == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError("polynomial kernel needs an integer degree >= 1")

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.family == "rbf":
            out["sigma2"] = float(self.sigma2)
        elif self.family == "sigmoid":
            out.update(kappa=float(self.kappa), theta=float(self.theta))
        elif self.family == "polynomial":
            out.update(theta=float(self.theta), degree=int(self.degree))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)

    def with_sigma2(self, sigma2: float) -> "KernelSpec":
        return replace(self, sigma2=float(sigma2))


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if x.shape != xp.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {xp.shape}")
    if spec.family == "rbf":
        diff = x - xp
        return float(np.exp(-np.dot(diff, diff) / spec.sigma2))
    ip = float(np.dot(x, xp))
    if spec.family == "sigmoid":
        return float(np.tanh(spec.kappa * ip + spec.theta))
    if spec.family == "polynomial":
        return float((ip + spec.theta) ** spec.degree)
    return ip


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Matrix of K(a_i, b_j) for rows of A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} columns")
    if spec.family == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / spec.sigma2)
    ip = A @ B.T
    if spec.family == "sigmoid":
        return np.tanh(spec.kappa * ip + spec.theta)
    if spec.family == "polynomial":
        return (ip + spec.theta) ** spec.degree
    return ip


@dataclass
class GramBundle:
    """Gram matrix of the training inputs plus its (clamped) eigendecomposition.

    ``D`` is sorted descending; eigenvalues with |d| < 1e-8 * max(d), and all
    negative ones, are set to zero. ``D_raw`` keeps the small positive
    eigenvalues (negatives still zeroed) so that U diag(D_raw) U' matches ``K``
    to round-off; the MM step uses it. When clamping removes real negative
    mass (sigmoid kernels) ``K`` itself is replaced by its PSD projection so
    the fitting problem stays convex.
    """

    K: np.ndarray
    inputs: np.ndarray
    spec: KernelSpec
    U: np.ndarray | None = None
    D: np.ndarray | None = None
    D_raw: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def decomposed(self) -> bool:
        return self.U is not None

    @property
    def ones_proj(self) -> np.ndarray:
        """U^T 1, cached."""
        if "U1" not in self._cache:
            self._cache["U1"] = self.U.sum(axis=0)
        return self._cache["U1"]

    @property
    def row_sums(self) -> np.ndarray:
        """K 1, cached."""
        if "K1" not in self._cache:
            self._cache["K1"] = self.K.sum(axis=1)
        return self._cache["K1"]


def gram_matrix(spec: KernelSpec, X) -> GramBundle:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one input row")
    if spec.family == "rbf":
        sq = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        sq[iu] = pdist(X, "sqeuclidean")
        K = np.exp(-sq / spec.sigma2)
        K[iu[1], iu[0]] = K[iu]
        np.fill_diagonal(K, 1.0)
    else:
        K = cross_kernel(spec, X, X)
        iu = np.triu_indices(n, 1)
        K[iu[1], iu[0]] = K[iu]
    return GramBundle(K=K, inputs=X, spec=spec)


def eigendecompose(bundle: GramBundle) -> GramBundle:
    """Return a new bundle with U, D filled (descending, clamped)."""
    K = bundle.K
    if not np.all(np.isfinite(K)):
        raise ValueError("Gram matrix has non-finite entries")
    d, U = np.linalg.eigh(K)
    d = d[::-1].copy()
    U = U[:, ::-1].copy()
    top = max(d[0], 0.0)
    d_raw = np.maximum(d, 0.0)
    neg_mass = -d[d < -CLAMP * top].sum() if top > 0 else -d[d < 0].sum()
    d[d < CLAMP * top] = 0.0
    if top == 0.0:
        d[:] = 0.0
    if neg_mass > 0:
        warnings.warn(
            f"Gram matrix is indefinite; clamped negative eigenvalue mass {neg_mass:.3g} "
            f"({bundle.spec.family} kernel); fitting uses its PSD projection",
            RuntimeWarning, stacklevel=2)
        K = (U * d) @ U.T
        K = 0.5 * (K + K.T)
        d_raw = d.copy()
    return GramBundle(K=K, inputs=bundle.inputs, spec=bundle.spec, U=U, D=d, D_raw=d_raw)


def build_bundle(spec: KernelSpec, X) -> GramBundle:
    return eigendecompose(gram_matrix(spec, X))


@dataclass(frozen=True)
class Standardizer:
    """Per-column centering and scaling; constant columns keep scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        return cls(X.mean(axis=0), sd)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.mean.size:
            raise ValueError(f"expected {self.mean.size} columns, got {X.shape[1]}")
        return (X - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


def median_sq_distance(X) -> float:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X, "sqeuclidean")))
    return med if med > 0 else 1.0

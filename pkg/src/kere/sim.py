"""Simulation designs, true expectile surfaces and error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .loss import ScalarDistribution, as_level, loss_value, population_expectile

N_TERMS = 20

SIM1_ERRORS = ("mixed_normal", "laplace")
SIM2_ERRORS = ("normal", "t4", "mixed_normal")


def error_distribution(design: str, family: str, seed=None) -> ScalarDistribution:
    """Noise law for a design ("sim1" or "sim2") and error family."""
    if design == "sim1":
        if family == "mixed_normal":
            return ScalarDistribution.mixture([0.5, 0.5], [0.0, 1.0], [0.5, 0.25], seed=seed)
        if family == "laplace":
            return ScalarDistribution.laplace(0.0, 1.0, seed=seed)
        raise ValueError(f"sim1 error family must be one of {SIM1_ERRORS}, got {family!r}")
    if design == "sim2":
        if family == "normal":
            return ScalarDistribution.normal(0.0, 1.0, seed=seed)
        if family == "t4":
            return ScalarDistribution.student_t(4.0, seed=seed)
        if family == "mixed_normal":
            return ScalarDistribution.mixture([0.9, 0.1], [0.0, 1.0], [1.0, 2.0], seed=seed)
        if family == "degenerate":
            return ScalarDistribution.degenerate(0.0, seed=seed)
        raise ValueError(f"sim2 error family must be one of {SIM2_ERRORS}, got {family!r}")
    raise ValueError(f"unknown design {design!r}")


@lru_cache(maxsize=None)
def error_expectile(design: str, family: str, omega: float) -> float:
    return population_expectile(error_distribution(design, family), omega)


def _streams(seed, k):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _child_seed(rng) -> int:
    return int(rng.integers(0, 2**63 - 1))


# ---------------------------------------------------------------------------
# Simulation I: y = sin(0.7 x) + x^2/20 + (|x| + 1)/5 * eps, x ~ U[-8, 8]

@dataclass(frozen=True)
class Sim1Spec:
    n: int
    error_family: str = "mixed_normal"
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.error_family not in SIM1_ERRORS:
            raise ValueError(f"sim1 error family must be one of {SIM1_ERRORS}")

    def to_dict(self) -> dict:
        return {"design": "sim1", "n": self.n, "error_family": self.error_family, "seed": self.seed}


def sim1_mean(x):
    x = np.asarray(x, dtype=float)
    return np.sin(0.7 * x) + x * x / 20.0


def sim1_scale(x):
    return (np.abs(np.asarray(x, dtype=float)) + 1.0) / 5.0


def sim1_inputs(n, rng) -> np.ndarray:
    return rng.uniform(-8.0, 8.0, n)


def sim1_generate(spec: Sim1Spec) -> tuple[np.ndarray, np.ndarray]:
    xs, es = _streams(spec.seed, 2)
    x = sim1_inputs(spec.n, xs)
    eps = error_distribution("sim1", spec.error_family, seed=_child_seed(es)).sample(spec.n)
    y = sim1_mean(x) + sim1_scale(x) * eps
    return x[:, None], y


# ---------------------------------------------------------------------------
# random function generator

@dataclass
class RandomFunction:
    """f(x) = sum_l a_l exp(-(x_l - mu_l)' V_l (x_l - mu_l) / 2), V_l = U_l D_l U_l'."""

    p: int
    weights: np.ndarray
    subsets: list[np.ndarray]
    centers: list[np.ndarray]
    rotations: list[np.ndarray]
    scales: list[np.ndarray]  # diagonal of D_l
    seed: int | None = None

    def term(self, l: int, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        z = (X[:, self.subsets[l]] - self.centers[l]) @ self.rotations[l]
        return np.exp(-0.5 * (z * z) @ self.scales[l])

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise ValueError(f"random function expects {self.p} inputs, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for l, a in enumerate(self.weights):
            out += a * self.term(l, X)
        return out


def _haar_orthogonal(k, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))


def random_function(p: int, seed) -> RandomFunction:
    """Draw a 20-term random Gaussian-bump function on R^p.

    Subset sizes are min(floor(1.5 + r), p) with r exponential of mean 2
    (rate 0.5); sqrt of each eigenvalue of V_l is uniform on [0.1, 2].
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, N_TERMS)
    subsets, centers, rotations, scales = [], [], [], []
    for _ in range(N_TERMS):
        r = rng.exponential(2.0)
        pl = min(int(math.floor(1.5 + r)), p)
        subsets.append(np.sort(rng.choice(p, size=pl, replace=False)))
        centers.append(rng.standard_normal(pl))
        rotations.append(_haar_orthogonal(pl, rng))
        scales.append(rng.uniform(0.1, 2.0, pl) ** 2)
    return RandomFunction(p, weights, subsets, centers, rotations, scales, seed)


# ---------------------------------------------------------------------------
# Simulation II: y = f1(x) + |f2(x)| eps, x ~ N(0, I_p)

@dataclass
class Sim2Spec:
    n: int
    p: int = 10
    heteroscedastic: bool = False
    error_family: str = "normal"
    seed: int = 0
    f1: RandomFunction | None = field(default=None, repr=False)
    f2: RandomFunction | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if self.error_family not in SIM2_ERRORS + ("degenerate",):
            raise ValueError(f"sim2 error family must be one of {SIM2_ERRORS}")
        # f1 and f2 come from their own streams, so homoscedastic and
        # heteroscedastic specs with one seed share f1, X and eps
        fs, gs = np.random.SeedSequence([self.seed, 1]).spawn(2)
        if self.f1 is None:
            self.f1 = random_function(self.p, fs)
        if self.heteroscedastic and self.f2 is None:
            self.f2 = random_function(self.p, gs)

    def scale(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.abs(self.f2(X)) if self.heteroscedastic else np.ones(X.shape[0])

    def to_dict(self) -> dict:
        return {"design": "sim2", "n": self.n, "p": self.p, "heteroscedastic": self.heteroscedastic,
                "error_family": self.error_family, "seed": self.seed}


def sim2_inputs(n, p, rng) -> np.ndarray:
    return rng.standard_normal((n, p))


def sim2_generate(spec: Sim2Spec) -> tuple[np.ndarray, np.ndarray]:
    xs, es = _streams(spec.seed, 2)
    X = sim2_inputs(spec.n, spec.p, xs)
    eps = error_distribution("sim2", spec.error_family, seed=_child_seed(es)).sample(spec.n)
    y = spec.f1(X) + spec.scale(X) * eps
    return X, y


def true_expectile(spec: Sim1Spec | Sim2Spec, x, level) -> np.ndarray:
    """Conditional omega-expectile of y at the rows of x."""
    omega = as_level(level).omega
    if isinstance(spec, Sim1Spec):
        b = error_expectile("sim1", spec.error_family, omega)
        x = np.asarray(x, dtype=float).reshape(-1)
        return sim1_mean(x) + sim1_scale(x) * b
    b = error_expectile("sim2", spec.error_family, omega)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    return spec.f1(X) + spec.scale(X) * b


def mad(predicted, truth) -> float:
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    return float(np.mean(np.abs(truth - predicted)))


def prediction_error(y, fitted, level) -> float:
    y = np.asarray(y, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if y.shape != fitted.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {fitted.shape}")
    return float(np.mean(loss_value(y - fitted, level)))

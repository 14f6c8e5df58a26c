"""Asymmetric squared (expectile) loss and population expectiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, special, stats


@dataclass(frozen=True)
class ExpectileLevel:
    omega: float

    def __post_init__(self):
        if not (0.0 < float(self.omega) < 1.0) or math.isnan(self.omega):
            raise ValueError(f"expectile level must lie in (0, 1), got {self.omega!r}")

    @property
    def upper(self) -> float:
        """max(1 - omega, omega)"""
        return max(1.0 - self.omega, self.omega)

    @property
    def lower(self) -> float:
        return min(1.0 - self.omega, self.omega)


def as_level(level) -> ExpectileLevel:
    if isinstance(level, ExpectileLevel):
        return level
    return ExpectileLevel(float(level))


def _weights(t, omega):
    return np.where(t <= 0, 1.0 - omega, omega)


def loss_value(t, level):
    """(1 - omega) t^2 for t <= 0, omega t^2 for t > 0. Vectorized."""
    omega = as_level(level).omega
    t = np.asarray(t, dtype=float)
    out = _weights(t, omega) * t * t
    return out if out.ndim else float(out)


def loss_grad(t, level):
    omega = as_level(level).omega
    t = np.asarray(t, dtype=float)
    out = 2.0 * _weights(t, omega) * t
    return out if out.ndim else float(out)


def lipschitz_constant(level) -> float:
    return 2.0 * as_level(level).upper


def conjugate_value(t, level):
    """Convex conjugate: t^2 / (4 (1 - omega)) for t <= 0, t^2 / (4 omega) otherwise."""
    omega = as_level(level).omega
    t = np.asarray(t, dtype=float)
    out = t * t / (4.0 * _weights(t, omega))
    return out if out.ndim else float(out)


def conjugate_grad(t, level):
    # inverse function of loss_grad
    omega = as_level(level).omega
    t = np.asarray(t, dtype=float)
    out = t / (2.0 * _weights(t, omega))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# scalar distributions

_FAMILIES = ("normal", "mixture", "t", "laplace", "uniform", "discrete", "degenerate", "scipy")


@dataclass
class ScalarDistribution:
    """A seeded real-valued law with an optional analytic descriptor.

    ``family`` selects the analytic route used by :func:`population_expectile`:

    - ``normal``: loc, scale
    - ``mixture``: weights, locs, scales (mixture of normals)
    - ``t``: df, loc, scale (Student t)
    - ``laplace``: loc, scale
    - ``uniform``: low, high
    - ``discrete``: values, probs
    - ``degenerate``: value
    - ``scipy``: a frozen ``scipy.stats`` continuous law under ``frozen``;
      expectations are computed by adaptive quadrature.

    Draws come from ``numpy.random.default_rng(seed)``; the t and Laplace
    samplers use the inverse CDF of the uniform stream.
    """

    family: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        self._rng = np.random.default_rng(self.seed)

    # -- constructors -----------------------------------------------------
    @classmethod
    def normal(cls, loc=0.0, scale=1.0, seed=None):
        return cls("normal", {"loc": loc, "scale": scale}, seed)

    @classmethod
    def mixture(cls, weights, locs, scales, seed=None):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        return cls("mixture", {"weights": list(w), "locs": list(map(float, locs)),
                               "scales": list(map(float, scales))}, seed)

    @classmethod
    def student_t(cls, df, loc=0.0, scale=1.0, seed=None):
        if df <= 2:
            raise ValueError("Student t needs df > 2 for a finite second moment")
        return cls("t", {"df": df, "loc": loc, "scale": scale}, seed)

    @classmethod
    def laplace(cls, loc=0.0, scale=1.0, seed=None):
        return cls("laplace", {"loc": loc, "scale": scale}, seed)

    @classmethod
    def uniform(cls, low=0.0, high=1.0, seed=None):
        return cls("uniform", {"low": low, "high": high}, seed)

    @classmethod
    def discrete(cls, values, probs=None, seed=None):
        v = np.asarray(values, dtype=float)
        p = np.full(v.size, 1.0 / v.size) if probs is None else np.asarray(probs, dtype=float)
        return cls("discrete", {"values": v, "probs": p}, seed)

    @classmethod
    def degenerate(cls, value=0.0, seed=None):
        return cls("degenerate", {"value": value}, seed)

    @classmethod
    def from_scipy(cls, frozen, seed=None):
        return cls("scipy", {"frozen": frozen}, seed)

    def describe(self) -> dict:
        """JSON-friendly descriptor (no sampler state)."""
        if self.family == "scipy":
            return {"family": "scipy", "name": self.params["frozen"].dist.name}
        return {"family": self.family,
                **{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}}

    # -- moments ----------------------------------------------------------
    def mean(self) -> float:
        p = self.params
        f = self.family
        if f in ("normal", "laplace", "t"):
            return float(p["loc"])
        if f == "mixture":
            return float(np.dot(p["weights"], p["locs"]))
        if f == "uniform":
            return 0.5 * (p["low"] + p["high"])
        if f == "discrete":
            return float(np.dot(p["probs"], p["values"]))
        if f == "degenerate":
            return float(p["value"])
        return float(p["frozen"].mean())

    def std(self) -> float:
        p = self.params
        f = self.family
        if f == "normal":
            return float(p["scale"])
        if f == "laplace":
            return math.sqrt(2.0) * p["scale"]
        if f == "t":
            return p["scale"] * math.sqrt(p["df"] / (p["df"] - 2.0))
        if f == "mixture":
            w, m, s = (np.asarray(p[k]) for k in ("weights", "locs", "scales"))
            mu = np.dot(w, m)
            return float(math.sqrt(np.dot(w, s**2 + (m - mu) ** 2)))
        if f == "uniform":
            return (p["high"] - p["low"]) / math.sqrt(12.0)
        if f == "discrete":
            v, q = np.asarray(p["values"]), np.asarray(p["probs"])
            return float(math.sqrt(np.dot(q, (v - np.dot(q, v)) ** 2)))
        if f == "degenerate":
            return 0.0
        return float(p["frozen"].std())

    def upper_partial_moment(self, b: float) -> float:
        """E[(Y - b)_+]."""
        p = self.params
        f = self.family
        if f == "normal":
            return _normal_upm(p["loc"], p["scale"], b)
        if f == "mixture":
            return float(sum(w * _normal_upm(m, s, b)
                             for w, m, s in zip(p["weights"], p["locs"], p["scales"])))
        if f == "t":
            nu, loc, sc = p["df"], p["loc"], p["scale"]
            z = (b - loc) / sc
            # int_z^inf t f(t) dt = (nu + z^2)/(nu - 1) f(z)
            return float(sc * ((nu + z * z) / (nu - 1.0) * stats.t.pdf(z, nu)
                               - z * stats.t.sf(z, nu)))
        if f == "laplace":
            loc, sc = p["loc"], p["scale"]
            if b >= loc:
                return 0.5 * sc * math.exp(-(b - loc) / sc)
            return (loc - b) + 0.5 * sc * math.exp(-(loc - b) / sc)
        if f == "uniform":
            lo, hi = p["low"], p["high"]
            if b <= lo:
                return 0.5 * (lo + hi) - b
            if b >= hi:
                return 0.0
            return (hi - b) ** 2 / (2.0 * (hi - lo))
        if f == "discrete":
            v, q = np.asarray(p["values"]), np.asarray(p["probs"])
            return float(np.dot(q, np.maximum(v - b, 0.0)))
        if f == "degenerate":
            return max(p["value"] - b, 0.0)
        frozen = p["frozen"]
        val, _ = integrate.quad(lambda y: (y - b) * frozen.pdf(y), b, np.inf,
                                epsabs=1e-9, limit=200)
        return float(val)

    # -- sampling ---------------------------------------------------------
    def sample(self, size) -> np.ndarray:
        rng = self._rng
        p = self.params
        f = self.family
        if f == "normal":
            return p["loc"] + p["scale"] * rng.standard_normal(size)
        if f == "mixture":
            u = rng.random(size)
            comp = np.searchsorted(np.cumsum(p["weights"]), u, side="right")
            comp = np.minimum(comp, len(p["weights"]) - 1)
            z = rng.standard_normal(size)
            return np.asarray(p["locs"])[comp] + np.asarray(p["scales"])[comp] * z
        if f == "t":
            u = rng.random(size)
            return p["loc"] + p["scale"] * stats.t.ppf(u, p["df"])
        if f == "laplace":
            u = rng.random(size) - 0.5
            return p["loc"] - p["scale"] * np.sign(u) * np.log1p(-2.0 * np.abs(u))
        if f == "uniform":
            return rng.uniform(p["low"], p["high"], size)
        if f == "discrete":
            return rng.choice(np.asarray(p["values"]), size=size, p=p["probs"])
        if f == "degenerate":
            return np.full(size, float(p["value"]))
        return p["frozen"].ppf(rng.random(size))


def _normal_upm(loc, scale, b):
    z = (loc - b) / scale
    return float((loc - b) * special.ndtr(z) + scale * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi))


def expectile_condition(dist: ScalarDistribution, b: float, level) -> float:
    """omega E(Y-b)_+ - (1-omega) E(b-Y)_+ ; decreasing in b, zero at the expectile."""
    omega = as_level(level).omega
    upper = dist.upper_partial_moment(b)
    lower = upper - (dist.mean() - b)
    return omega * upper - (1.0 - omega) * lower


def population_expectile(dist: ScalarDistribution, level, tol: float = 1e-10) -> float:
    """omega-expectile of ``dist`` by bisection on the first-order condition.

    The bracket starts at mean +/- 10 sd and doubles until the condition changes
    sign; bisection stops once the condition is within ``tol`` of zero (or the
    bracket collapses to machine precision).
    """
    level = as_level(level)
    mu = dist.mean()
    sd = dist.std()
    half = 10.0 * sd if sd > 0 else 1.0
    lo, hi = mu - half, mu + half
    h_lo = expectile_condition(dist, lo, level)
    h_hi = expectile_condition(dist, hi, level)
    for _ in range(60):
        if h_lo >= 0 >= h_hi:
            break
        half *= 2.0
        lo, hi = mu - half, mu + half
        h_lo = expectile_condition(dist, lo, level)
        h_hi = expectile_condition(dist, hi, level)
    else:
        raise ValueError(f"could not bracket the expectile of {dist.describe()}")
    if h_lo == 0:
        return lo
    if h_hi == 0:
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        h = expectile_condition(dist, mid, level)
        if abs(h) <= tol or mid in (lo, hi):
            return mid
        if h > 0:
            lo = mid
        else:
            hi = mid


def sample_expectile(values, level) -> float:
    """Empirical omega-expectile (minimizer of the mean sample loss)."""
    values = np.asarray(values, dtype=float)
    dist = ScalarDistribution.discrete(values)
    return population_expectile(dist, level, tol=1e-13 * (1.0 + np.abs(values).max()))

"""Majorization-minimization solver for kernel expectile regression.

The fixed-lambda problem is

    F(a0, a) = sum_i phi(y_i - a0 - (K a)_i) + lam * a' K a

and each MM step minimizes the quadratic majorizer built from the Lipschitz
bound on phi'. The curvature matrix of the majorizer is

    K_u = lam K_0 + max(1-w, w) sum_i K_i K_i'

whose inverse is assembled from a block partition, a Sherman-Morrison update
and the eigendecomposition K = U D U' (see :class:`KuInverseFactory`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .kernel import GramBundle, eigendecompose
from .loss import ExpectileLevel, as_level, conjugate_value, loss_grad, loss_value

SM_FLOOR = 1e-12


@dataclass
class Coefficients:
    alpha0: float
    alpha: np.ndarray

    def __post_init__(self):
        self.alpha0 = float(self.alpha0)
        self.alpha = np.asarray(self.alpha, dtype=float)

    @classmethod
    def zeros(cls, n: int) -> "Coefficients":
        return cls(0.0, np.zeros(n))

    @property
    def augmented(self) -> np.ndarray:
        return np.concatenate(([self.alpha0], self.alpha))

    @classmethod
    def from_augmented(cls, vec) -> "Coefficients":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[0], vec[1:].copy())

    def copy(self) -> "Coefficients":
        return Coefficients(self.alpha0, self.alpha.copy())


@dataclass
class FitDiagnostics:
    objective_trace: list[float] = field(default_factory=list)
    contraction_ratios: list[float] = field(default_factory=list)
    rate_bound: float | None = None
    iterations: int = 0
    stationarity_residual: float = math.inf
    converged: bool = False
    tol: float = 0.0

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "objective": self.objective_trace[-1] if self.objective_trace else None,
            "stationarity_residual": self.stationarity_residual,
            "rate_bound": self.rate_bound,
            "tol": self.tol,
        }


def _require_decomposed(bundle: GramBundle) -> GramBundle:
    return bundle if bundle.decomposed else eigendecompose(bundle)


def residuals(coef: Coefficients, bundle: GramBundle, y) -> np.ndarray:
    return np.asarray(y, dtype=float) - coef.alpha0 - bundle.K @ coef.alpha


def objective(coef: Coefficients, bundle: GramBundle, y, level, lam: float) -> float:
    y = np.asarray(y, dtype=float)
    if y.shape != coef.alpha.shape or coef.alpha.size != bundle.n:
        raise ValueError("length mismatch between y, alpha and the Gram matrix")
    f = bundle.K @ coef.alpha
    r = y - coef.alpha0 - f
    return float(np.sum(loss_value(r, level)) + lam * np.dot(coef.alpha, f))


class KuInverseFactory:
    """Serves K_u^{-1}(lam) for one (Gram bundle, omega) pair.

    Everything that does not depend on lambda (U, D, K1, 1'K1, U'1) is computed
    once; per-lambda pieces are cached in read-only arrays so a factory may be
    shared by fits at different lambdas.

    Two views are offered. :meth:`dense` materializes the (n+1)x(n+1) inverse
    through the block partition, Sherman-Morrison and
    A_lam^{-1} = U (D^2 + c D)^+ U' with c = lam / max(1-w, w).
    :meth:`step` applies the same inverse to an MM gradient, whose alpha block
    always has the form K v; the K factor cancels against A_lam = K (K + cI),
    leaving only (K + cI)^{-1} = U (D + c)^{-1} U', which stays bounded as
    eigenvalues approach zero.
    """

    def __init__(self, bundle: GramBundle, level):
        self.bundle = _require_decomposed(bundle)
        self.level = as_level(level)
        self.m = self.level.upper
        b = self.bundle
        self.n = b.n
        self.U = b.U
        self.d = b.D
        self.U1 = b.ones_proj
        self.K1 = b.row_sums
        self.oneK1 = float(self.K1.sum())
        self._terms: dict[float, dict] = {}
        self._dense: dict[float, np.ndarray] = {}

    def _c(self, lam: float) -> float:
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam!r}")
        return lam / self.m

    def terms(self, lam: float) -> dict:
        lam = float(lam)
        t = self._terms.get(lam)
        if t is None:
            c = self._c(lam)
            s = 1.0 / (self.bundle.D_raw + c)
            sU1 = s * self.U1
            S1 = self.U @ sU1
            t = {"c": c, "s": s, "S1": S1, "oneS1": float(np.dot(self.U1, sU1))}
            for v in t.values():
                if isinstance(v, np.ndarray):
                    v.flags.writeable = False
            self._terms[lam] = t
        return t

    def a_inverse(self, lam: float) -> np.ndarray:
        """(KK + cK)^{-1} via the eigendecomposition; pseudo-inverse on null(K)."""
        c = self._c(lam)
        d = self.d
        inv = np.zeros_like(d)
        pos = d > 0
        inv[pos] = 1.0 / (d[pos] * (d[pos] + c))
        return (self.U * inv) @ self.U.T

    def dense(self, lam: float) -> np.ndarray:
        lam = float(lam)
        if lam in self._dense:
            return self._dense[lam]
        n, m, c = self.n, self.m, self._c(lam)
        u = self.K1
        Ainv = self.a_inverse(lam)
        Au = Ainv @ u
        # B = -(1/n) u u', so g = trace(B A^{-1}) = -(u' A^{-1} u) / n
        g = -float(u @ Au) / n
        if abs(1.0 + g) >= SM_FLOOR:
            Qinv = Ainv + np.outer(Au, Au) / (n * (1.0 + g))
        else:
            K = self.bundle.K
            Q = K @ K + c * K - np.outer(u, u) / n
            Qinv = np.linalg.pinv(0.5 * (Q + Q.T))
        L = np.vstack([-u[None, :] / n, np.eye(n)])
        out = L @ Qinv @ L.T
        out[0, 0] += 1.0 / n
        out /= m
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite entries in K_u^{-1}")
        out.flags.writeable = False
        self._dense[lam] = out
        return out

    def ku(self, lam: float) -> np.ndarray:
        """Direct assembly of K_u(lam)."""
        return assemble_ku(self.bundle.K, self.level, lam)

    def step(self, lam: float, alpha: np.ndarray, v: np.ndarray) -> tuple[float, np.ndarray]:
        """Solve K_u (d0, d) = (sum(v) + lam*sum(alpha), K v) for the MM step.

        ``v`` is phi'(r)/2 - lam * alpha, so the right-hand side is the MM
        gradient term -lam K_0 alpha + 1/2 sum_i phi'(r_i) K_i.
        """
        t = self.terms(lam)
        c, s, S1, oneS1 = t["c"], t["s"], t["S1"], t["oneS1"]
        Sv = self.U @ (s * (self.U.T @ v))
        d0 = (lam * alpha.sum() + c * Sv.sum()) / (self.m * c * oneS1)
        d = Sv / self.m - d0 * S1
        return d0, d


def assemble_ku(K, level, lam: float) -> np.ndarray:
    level = as_level(level)
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    out = np.empty((n + 1, n + 1))
    out[0, 0] = n
    out[0, 1:] = out[1:, 0] = K.sum(axis=1)
    out[1:, 1:] = K @ K + (lam / level.upper) * K
    return level.upper * out


def assemble_kl(K, level, lam: float) -> np.ndarray:
    level = as_level(level)
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    ss = np.empty((n + 1, n + 1))
    ss[0, 0] = n
    ss[0, 1:] = ss[1:, 0] = K.sum(axis=1)
    ss[1:, 1:] = K @ K
    out = level.lower * ss
    out[1:, 1:] += lam * K
    return out


def build_ku_inverse(bundle: GramBundle, level, lam: float) -> np.ndarray:
    return KuInverseFactory(bundle, level).dense(lam)


def mm_step(coef: Coefficients, resid, factory, bundle: GramBundle, level, lam: float) -> Coefficients:
    """One update alpha + K_u^{-1}(-lam K_0 alpha + 1/2 sum phi'(r_i) K_i)."""
    v = 0.5 * loss_grad(np.asarray(resid, dtype=float), level) - lam * coef.alpha
    d0, d = factory.step(lam, coef.alpha, v)
    new = Coefficients(coef.alpha0 + d0, coef.alpha + d)
    if not (math.isfinite(new.alpha0) and np.all(np.isfinite(new.alpha))):
        raise FloatingPointError("non-finite MM update")
    return new


def _certificate(alpha, grad, lam, yscale) -> float:
    viol = np.max(np.abs(2.0 * lam * alpha - grad), initial=0.0)
    viol = max(viol, 2.0 * lam * abs(alpha.sum()))
    return float(viol / yscale)


def optimality_certificate(coef: Coefficients, bundle: GramBundle, y, level, lam: float) -> float:
    """Max violation of the stationarity conditions 2 lam a_i = phi'(r_i), sum a_i = 0.

    Scaled by 1 + max|y|; zero exactly at the global minimizer.
    """
    y = np.asarray(y, dtype=float)
    r = residuals(coef, bundle, y)
    yscale = 1.0 + (np.max(np.abs(y)) if y.size else 0.0)
    return _certificate(coef.alpha, loss_grad(r, level), lam, yscale)


def default_tol(y) -> float:
    y = np.asarray(y, dtype=float)
    return 1e-8 * (1.0 + (np.max(np.abs(y)) if y.size else 0.0))


def fit(bundle: GramBundle, y, level, lam: float, init: Coefficients | None = None,
        tol: float | None = None, max_iter: int = 100, factory=None,
        with_rate: bool = True) -> tuple[Coefficients, FitDiagnostics]:
    """Run MM updates until the iterate moves by at most ``tol`` and is stationary.

    Stops when max|alpha^(k+1) - alpha^(k)| <= tol (intercept included) and the
    optimality certificate is <= tol, or after ``max_iter`` updates; in the
    latter case ``diagnostics.converged`` is False. ``iterations`` counts the
    updates applied, so a start at the minimizer reports 0.
    """
    level = as_level(level)
    y = np.asarray(y, dtype=float)
    bundle = _require_decomposed(bundle)
    if y.size != bundle.n:
        raise ValueError(f"y has {y.size} entries, Gram matrix is {bundle.n}x{bundle.n}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol is None:
        tol = default_tol(y)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if factory is None:
        factory = KuInverseFactory(bundle, level)
    coef = Coefficients.zeros(bundle.n) if init is None else init.copy()
    K = bundle.K
    yscale = 1.0 + (np.max(np.abs(y)) if y.size else 0.0)

    alpha0, alpha = coef.alpha0, coef.alpha
    f = K @ alpha
    r = y - alpha0 - f
    diag = FitDiagnostics(tol=tol)
    diag.objective_trace.append(float(np.sum(loss_value(r, level)) + lam * np.dot(alpha, f)))
    for _ in range(max_iter + 1):
        grad = loss_grad(r, level)
        v = 0.5 * grad - lam * alpha
        cert = _certificate(alpha, grad, lam, yscale)
        d0, d = factory.step(lam, alpha, v)
        step = max(abs(d0), np.max(np.abs(d), initial=0.0))
        if not math.isfinite(step):
            raise FloatingPointError("non-finite MM update")
        diag.stationarity_residual = cert
        if step <= tol and cert <= tol:
            diag.converged = True
            break
        if diag.iterations == max_iter:
            break
        alpha0 = alpha0 + d0
        alpha = alpha + d
        f = K @ alpha
        r = y - alpha0 - f
        diag.objective_trace.append(float(np.sum(loss_value(r, level)) + lam * np.dot(alpha, f)))
        diag.iterations += 1

    diag.contraction_ratios = observed_ratios(diag.objective_trace)
    if with_rate:
        diag.rate_bound = rate_bound(bundle, level, lam, strict=False)
    return Coefficients(alpha0, alpha), diag


def observed_ratios(trace, f_hat: float | None = None, rel_gap: float = 1e-6) -> list[float]:
    """(F_{k+1} - F_hat)/(F_k - F_hat) while F_k - F_hat is above round-off."""
    trace = np.asarray(trace, dtype=float)
    if trace.size < 2:
        return []
    if f_hat is None:
        f_hat = trace[-1]
    floor = rel_gap * (1.0 + abs(f_hat))
    out = []
    for k in range(trace.size - 1):
        gap = trace[k] - f_hat
        if gap <= floor:
            break
        out.append(max(trace[k + 1] - f_hat, 0.0) / gap)
    return out


def _restricted_pair(bundle: GramBundle, level: ExpectileLevel, lam: float):
    """K_u and K_l expressed in the basis (intercept, eigenvectors with d > 0).

    Iterates only move F through these coordinates, so the rate bound is taken
    on this subspace; for a nonsingular K it equals the full-space value.
    """
    d = bundle.D
    pos = d > 0
    dp = d[pos]
    b = dp * bundle.ones_proj[pos]
    k = dp.size
    ss = np.empty((k + 1, k + 1))
    ss[0, 0] = bundle.n
    ss[0, 1:] = ss[1:, 0] = b
    ss[1:, 1:] = 0.0
    idx = np.arange(1, k + 1)
    ss[idx, idx] = dp * dp
    pen = np.zeros(k + 1)
    pen[1:] = lam * dp
    ku = level.upper * ss
    ku[np.arange(k + 1), np.arange(k + 1)] += pen
    kl = level.lower * ss
    kl[np.arange(k + 1), np.arange(k + 1)] += pen
    return ku, kl


def rate_bound(bundle: GramBundle, level, lam: float, strict: bool = True) -> float | None:
    """Gamma = 1 - smallest eigenvalue of K_u^{-1} K_l.

    Computed as a symmetric-definite generalized eigenproblem (equivalently on
    K_u^{-1/2} K_l K_u^{-1/2}). Requires K_l to be positive definite; when it is
    not, raises ``ValueError`` or, with ``strict=False``, returns None.
    """
    level = as_level(level)
    bundle = _require_decomposed(bundle)
    if level.lower == level.upper:
        return 0.0  # K_l = K_u exactly; skip the eigensolve and its round-off
    ku, kl = _restricted_pair(bundle, level, lam)
    scale = 1.0 / np.sqrt(np.diag(ku))
    ku = ku * scale[:, None] * scale[None, :]
    kl = kl * scale[:, None] * scale[None, :]
    kl_min = linalg.eigh(kl, eigvals_only=True, subset_by_index=[0, 0])[0]
    if not kl_min > 1e-10 * max(1.0, np.max(np.diag(kl))):
        if strict:
            raise ValueError("K_l is not positive definite; the rate bound is undefined")
        return None
    gmin = linalg.eigh(kl, ku, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(min(max(1.0 - gmin, 0.0), 1.0))


def rate_bound_nonsymmetric(K, level, lam: float) -> float:
    """Gamma from the eigenvalues of K_u^{-1} K_l directly (dense, full space)."""
    ku = assemble_ku(K, level, lam)
    kl = assemble_kl(K, level, lam)
    ev = np.linalg.eigvals(np.linalg.solve(ku, kl))
    return float(1.0 - ev.real.min())


def dual_objective(alpha, bundle: GramBundle, y, level, lam: float) -> float:
    """-y'a + a'Ka/2 + 2 lam sum phi*(a_i), defined on sum(a) = 0."""
    alpha = np.asarray(alpha, dtype=float)
    if abs(alpha.sum()) > 1e-8:
        raise ValueError(f"dual point violates sum(alpha) = 0 (sum = {alpha.sum():.3g})")
    y = np.asarray(y, dtype=float)
    return float(-y @ alpha + 0.5 * alpha @ (bundle.K @ alpha)
                 + 2.0 * lam * np.sum(conjugate_value(alpha, level)))


def alpha_bound(bundle: GramBundle, y, level, lam: float) -> np.ndarray:
    """Upper bound on |alpha_i| at the minimizer, entrywise."""
    level = as_level(level)
    y = np.asarray(y, dtype=float)
    q1 = level.upper / level.lower
    q2 = level.upper
    M = math.sqrt(max(np.max(np.diag(bundle.K)), 0.0))
    n = y.size
    inner = q1 * np.abs(y).sum() / n + M * (q1 + 1.0) * math.sqrt(q2 / lam) * np.linalg.norm(y)
    return q2 / lam * (inner + np.abs(y))

"""Desk-scale versions of the simulation studies: MAD tables and curve data."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernel import KernelSpec
from .path import PathConfig
from .select import CVConfig, cross_validate, fit_selected
from .sim import (Sim1Spec, Sim2Spec, mad, sim1_generate, sim1_inputs, sim2_generate,
                  sim2_inputs, true_expectile)

SEED_STRIDE = 1000
DEFAULT_LEVELS = (0.05, 0.2, 0.5, 0.8, 0.95)


def bench_path_config() -> PathConfig:
    # CV only ranks cells, so a coarser grid and a looser stopping rule are
    # enough; the lower end reaches small lambdas where Simulation I selects
    return PathConfig(n_lambda=20, lambda_min_ratio=1e-8, tol=1e-5, max_iter=1000)


@dataclass
class BenchConfig:
    design: str = "sim1"
    error_family: str = "mixed_normal"
    omegas: tuple[float, ...] = DEFAULT_LEVELS
    reps: int = 20
    n: int = 400
    n_test: int = 2000
    p: int = 10
    heteroscedastic: bool = False
    folds: int = 5
    seed: int = 0
    path_config: PathConfig = field(default_factory=bench_path_config)

    def __post_init__(self):
        if self.design not in ("sim1", "sim2"):
            raise ValueError(f"design must be sim1 or sim2, got {self.design!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        self.omegas = tuple(float(w) for w in self.omegas)

    def rep_seed(self, r: int) -> int:
        return self.seed + SEED_STRIDE * r

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omegas"] = list(self.omegas)
        return d


@dataclass
class RepResult:
    rep: int
    seed: int
    mads: dict[float, float]
    selected: dict[float, tuple[float, float]]
    seconds: float


def _spec(cfg: BenchConfig, seed: int):
    if cfg.design == "sim1":
        return Sim1Spec(cfg.n, cfg.error_family, seed)
    return Sim2Spec(cfg.n, cfg.p, cfg.heteroscedastic, cfg.error_family, seed)


def _data(spec):
    return sim1_generate(spec) if isinstance(spec, Sim1Spec) else sim2_generate(spec)


def draw_test_inputs(spec, n_test: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    if isinstance(spec, Sim1Spec):
        return sim1_inputs(n_test, rng)[:, None]
    return sim2_inputs(n_test, spec.p, rng)


def run_replication(cfg: BenchConfig, r: int, spec=None) -> RepResult:
    """One replication: simulate, cross-validate each level, refit, score MAD on fresh inputs.

    The CV fold seed is fresh per replication (derived from its data seed).
    """
    seed = cfg.rep_seed(r)
    spec = spec if spec is not None else _spec(cfg, seed)
    t0 = time.perf_counter()
    X, y = _data(spec)
    Xt = draw_test_inputs(spec, cfg.n_test, seed)
    cache: dict = {}
    mads, selected = {}, {}
    for w in cfg.omegas:
        cv_cfg = CVConfig(level=w, folds=cfg.folds, path_config=cfg.path_config,
                          seed=seed + 1, kernel=KernelSpec("rbf"))
        res = cross_validate(X, y, cv_cfg, cache=cache)
        model = fit_selected(X, y, res, cv_cfg, cache=cache)
        mads[w] = mad(model.predict(Xt), true_expectile(spec, Xt, w))
        selected[w] = (res.best_sigma2, res.best_lambda)
    return RepResult(r, seed, mads, selected, time.perf_counter() - t0)


def run_bench(cfg: BenchConfig, progress=None) -> list[RepResult]:
    out = []
    for r in range(cfg.reps):
        out.append(run_replication(cfg, r))
        if progress:
            progress(out[-1])
    return out


def mad_table(cfg: BenchConfig, reps: list[RepResult]) -> list[dict]:
    """Mean MAD and its standard error per level."""
    rows = []
    for w in cfg.omegas:
        v = np.array([rr.mads[w] for rr in reps])
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        rows.append({"design": cfg.design, "error_family": cfg.error_family,
                     "heteroscedastic": cfg.heteroscedastic, "omega": w,
                     "mean_mad": float(v.mean()), "se": se, "reps": int(v.size)})
    return rows


def rep_rows(cfg: BenchConfig, reps: list[RepResult]) -> list[dict]:
    return [{"rep": rr.rep, "seed": rr.seed, "omega": w, "mad": rr.mads[w],
             "sigma2": rr.selected[w][0], "lambda": rr.selected[w][1]}
            for rr in reps for w in cfg.omegas]


def timing_rows(reps: list[RepResult]) -> list[dict]:
    return [{"rep": rr.rep, "seconds": rr.seconds} for rr in reps]


def sim1_curves(cfg: BenchConfig, n_grid: int = 201) -> list[dict]:
    """Tidy (x, level, predicted, true) rows for the first replication's fits."""
    if cfg.design != "sim1":
        raise ValueError("curves are defined for the one-dimensional design only")
    seed = cfg.rep_seed(0)
    spec = _spec(cfg, seed)
    X, y = _data(spec)
    grid = np.linspace(-8.0, 8.0, n_grid)
    cache: dict = {}
    rows = []
    for w in cfg.omegas:
        cv_cfg = CVConfig(level=w, folds=cfg.folds, path_config=cfg.path_config,
                          seed=seed + 1, kernel=KernelSpec("rbf"))
        res = cross_validate(X, y, cv_cfg, cache=cache)
        model = fit_selected(X, y, res, cv_cfg, cache=cache)
        pred = model.predict(grid[:, None])
        truth = true_expectile(spec, grid, w)
        rows.extend({"x": float(x), "level": w, "predicted": float(p), "true": float(t)}
                    for x, p, t in zip(grid, pred, truth))
    return rows

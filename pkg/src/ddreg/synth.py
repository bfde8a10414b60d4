"""Synthetic conditional density models and the replication benchmark."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .core import DEFAULT_D, Dataset, DDRError, EvaluationGrid

KINDS = ("homoskedastic", "heteroskedastic", "bimodal", "skewed")
DIMS = (2, 4, 6, 8, 10, 15, 20)
NOISE_SD = 0.1
GAMMA_SHAPE = 2.0
GAMMA_SCALE = 0.4


@dataclass(frozen=True)
class SyntheticModel:
    kind: str
    p: int = 2
    n: int = 200

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DDRError("invalid model", f"unknown model kind {self.kind!r}; choose from {KINDS}")
        if self.p < 2:
            raise DDRError("invalid model", "models need at least 2 covariates")
        if self.n < 2:
            raise DDRError("invalid model", "n must be at least 2")


def _outcome(kind: str, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    n = X.shape[0]
    if kind == "homoskedastic":
        return x1 + NOISE_SD * rng.standard_normal(n)
    if kind == "heteroskedastic":
        return x1 + NOISE_SD * (np.abs(x2) + 0.5) * rng.standard_normal(n)
    if kind == "bimodal":
        centre = np.where(rng.random(n) < 0.5, x1, x2)
        return centre + NOISE_SD * rng.standard_normal(n)
    return x1 + rng.gamma(GAMMA_SHAPE, GAMMA_SCALE, n)


def sample(model: SyntheticModel, seed) -> Dataset:
    """Standard normal covariates and an outcome drawn from ``model``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((model.n, model.p))
    y = _outcome(model.kind, X, rng)
    return Dataset(X, y, covariate_names=tuple(f"x{j + 1}" for j in range(model.p)))


def sample_outcome(model: SyntheticModel, x, size: int, seed) -> np.ndarray:
    """Draws of the outcome at a fixed covariate vector."""
    rng = np.random.default_rng(seed)
    X = np.repeat(np.asarray(x, dtype=float)[None, :], size, axis=0)
    return _outcome(model.kind, X, rng)


def _normal_pdf(z, mu, sd):
    u = (z - mu) / sd
    return np.exp(-0.5 * u * u) / (math.sqrt(2.0 * math.pi) * sd)


def oracle_density(model: SyntheticModel, x, z):
    """Analytic conditional density of the outcome at ``z`` given ``x``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    x1, x2 = x[0], x[1]
    if model.kind == "homoskedastic":
        return _normal_pdf(z, x1, NOISE_SD)
    if model.kind == "heteroskedastic":
        return _normal_pdf(z, x1, NOISE_SD * (abs(x2) + 0.5))
    if model.kind == "bimodal":
        return 0.5 * _normal_pdf(z, x1, NOISE_SD) + 0.5 * _normal_pdf(z, x2, NOISE_SD)
    return stats.gamma.pdf(z - x1, GAMMA_SHAPE, scale=GAMMA_SCALE)


def smoothed_oracle_density(model: SyntheticModel, x, z, h: float):
    """Oracle convolved with a Gaussian of sd ``h``: the population regression target.

    Closed form for the Gaussian kinds only.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[0], x[1]
    if model.kind == "skewed":
        raise DDRError("unsupported", "no closed-form smoothing for the skewed model")
    widen = lambda sd: math.hypot(sd, h)  # noqa: E731
    if model.kind == "homoskedastic":
        return _normal_pdf(z, x1, widen(NOISE_SD))
    if model.kind == "heteroskedastic":
        return _normal_pdf(z, x1, widen(NOISE_SD * (abs(x2) + 0.5)))
    return 0.5 * _normal_pdf(z, x1, widen(NOISE_SD)) + 0.5 * _normal_pdf(z, x2, widen(NOISE_SD))


def gaussian_smoothing_bias(means, sd: float, h: float, grid: EvaluationGrid) -> float:
    """Squared-bias integral of a Gaussian conditional density smoothed by width ``h``.

    Averages ``int (N(z; mu, sd^2 + h^2) - N(z; mu, sd^2))^2 dz`` over ``means``,
    integrating by the trapezoidal rule on ``grid``.
    """
    z = grid.points
    smooth = math.hypot(sd, h)
    vals = [np.trapezoid((_normal_pdf(z, mu, smooth) - _normal_pdf(z, mu, sd)) ** 2, z) for mu in np.ravel(means)]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# benchmark harness


@dataclass(frozen=True)
class BenchmarkResult:
    kind: str
    p: int
    rep: int
    seed: int
    mise: float
    seconds: float
    error: str = ""


CSV_HEADER = ("kind", "p", "rep", "seed", "mise", "seconds", "error")


def replication_seed(master_seed: int, kind: str, p: int, rep: int) -> int:
    """Counter-based seed: depends only on the master seed and the (kind, p, rep) index."""
    ss = np.random.SeedSequence([int(master_seed), KINDS.index(kind), int(p), int(rep)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def fresh_covariates(seed: int, m: int, p: int) -> np.ndarray:
    return np.random.default_rng([seed, 1]).standard_normal((m, p))


def evaluate_replication(kind, p, rep, n=200, d=DEFAULT_D, hpgrid=None, seed=0, n_test=200,
                         method="ddr") -> BenchmarkResult:
    """Fit on one synthetic training set and score true MISE on fresh covariates.

    ``method="kde"`` scores the covariate-blind baseline (one unconditional
    KDE of the outcome reused for every covariate value).
    """
    from .ddr import ddr_fit, ddr_predict
    from .core import make_grid
    from .inference import kde_ucv
    from .loss import true_mise

    rseed = replication_seed(seed, kind, p, rep)
    model = SyntheticModel(kind, p, n)
    start = time.perf_counter()
    try:
        data = sample(model, rseed)
        Xt = fresh_covariates(rseed, n_test, p)
        if method == "ddr":
            fitted = ddr_fit(data, d=d, hpgrid=hpgrid)
            dens = ddr_predict(fitted, next(iter(fitted.arms)), Xt)
            grid = dens[0].grid
            rows = np.vstack([e.values for e in dens])
        elif method == "kde":
            grid = make_grid(data.y, d)
            rows = np.repeat(kde_ucv(data.y, grid).density.values[None, :], n_test, axis=0)
        else:
            raise DDRError("invalid method", f"unknown method {method!r}")
        mise = true_mise(rows, lambda z, x: oracle_density(model, x, z), Xt, grid)
        err = ""
    except Exception as exc:  # a failed replication must not abort the sweep
        mise, err = float("nan"), f"{type(exc).__name__}: {exc}"
    return BenchmarkResult(kind, p, rep, rseed, mise, time.perf_counter() - start, err)


def _tasks(kinds, dims, reps):
    return [(k, p, r) for k in kinds for p in dims for r in range(reps)]


def iter_benchmark(kinds=KINDS, dims=DIMS, reps=100, n=200, d=DEFAULT_D, hpgrid=None, seed=0,
                   n_test=200, n_jobs=1, method="ddr"):
    """Yield results as replications complete (order depends on scheduling)."""
    if reps < 1:
        raise DDRError("invalid benchmark", "reps must be at least 1")
    tasks = _tasks(kinds, dims, reps)
    kw = dict(n=n, d=d, hpgrid=hpgrid, seed=seed, n_test=n_test, method=method)
    if n_jobs <= 1:
        for k, p, r in tasks:
            yield evaluate_replication(k, p, r, **kw)
        return
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        futures = [pool.submit(evaluate_replication, k, p, r, **kw) for k, p, r in tasks]
        for fut in as_completed(futures):
            yield fut.result()


def run_benchmark(kinds=KINDS, dims=DIMS, reps=100, n=200, d=DEFAULT_D, hpgrid=None, seed=0,
                  n_test=200, n_jobs=1, method="ddr") -> list[BenchmarkResult]:
    """All replications, sorted by (kind, p, rep)."""
    results = list(iter_benchmark(kinds, dims, reps, n, d, hpgrid, seed, n_test, n_jobs, method))
    return sorted(results, key=lambda r: (KINDS.index(r.kind), r.p, r.rep))


def write_results_csv(results, path, timing: bool = False):
    """Write results; ``seconds`` is left blank unless ``timing`` so reruns are byte-identical."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in results:
            w.writerow([r.kind, r.p, r.rep, r.seed, format(r.mise, ".17g"),
                        format(r.seconds, ".6f") if timing else "", r.error])


def write_results_json(results, path, timing: bool = False):
    rows = []
    for r in results:
        row = asdict(r)
        row["mise"] = None if math.isnan(r.mise) else r.mise
        if not timing:
            row["seconds"] = None
        rows.append(row)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"results": rows}, fh, indent=1)
        fh.write("\n")

"""Synthetic benchmark: copula-generated classes vs a logistic baseline.

Two data-generating processes are provided.  Both draw class 1 from a
Frank copula (tau 0.5) and class 0 from a Gumbel copula (tau 0.9) on the
unit square and push coordinate 1 through normal quantiles with
class-specific means.  The continuous variant also maps coordinate 2
through a normal quantile; the mixed variant maps it through a Poisson
quantile and stores it as 1-based ordinal codes.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import expit, ndtri

from .bicop import Bicop, tau_to_param
from .classifier import evaluate_probs, fit_classifier, posterior
from .data import Dataset, Schema, VariableSpec
from .errors import DegenerateLabels
from .vine import FitConfig

#: Sub-stream identifiers for seed splitting (order must never change).
_STREAM_CLASS1 = 0
_STREAM_CLASS0 = 1


@dataclass(frozen=True)
class DgpConfig:
    """Benchmark generator settings; defaults follow the reference setup."""

    variant: str = "continuous"  # or "mixed"
    n_train: int = 700  # per class
    n_test: int = 300  # per class
    seed: int = 0
    tau_class1: float = 0.5
    tau_class0: float = 0.9
    mu1: float = -1.5
    mu0: float = 0.0
    mu_y: float = 0.0
    sigma: float = 1.0
    lam: float = 2.0

    def __post_init__(self):
        if self.variant not in ("continuous", "mixed"):
            raise ValueError("variant must be 'continuous' or 'mixed'")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("split sizes must be positive")


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream_id,)))


def simulate_dgp(cfg: DgpConfig) -> Dataset:
    """Draw ``n_train + n_test`` rows per class, deterministically per seed.

    Rows are ordered class 1 then class 0, each block train rows first, so
    :func:`split_train_test` can slice positionally.
    """
    n = cfg.n_train + cfg.n_test
    frank = Bicop("frank", 0, tau_to_param("frank", cfg.tau_class1))
    gumbel = Bicop("gumbel", 0, tau_to_param("gumbel", cfg.tau_class0))
    u1 = frank.sample(n, _stream(cfg.seed, _STREAM_CLASS1))
    u0 = gumbel.sample(n, _stream(cfg.seed, _STREAM_CLASS0))

    x1 = np.concatenate(
        [
            ndtri(u1[:, 0]) * cfg.sigma + cfg.mu1,
            ndtri(u0[:, 0]) * cfg.sigma + cfg.mu0,
        ]
    )
    if cfg.variant == "continuous":
        x2 = np.concatenate([ndtri(u1[:, 1]), ndtri(u0[:, 1])]) * cfg.sigma + cfg.mu_y
        spec2 = VariableSpec("x2", "continuous")
    else:
        counts = stats.poisson.ppf(np.concatenate([u1[:, 1], u0[:, 1]]), cfg.lam)
        x2 = counts + 1.0  # 1-based ordinal codes
        spec2 = VariableSpec("x2", "ordinal", levels=int(x2.max()))
    labels = np.concatenate([np.ones(n, dtype=int), np.zeros(n, dtype=int)])
    schema = Schema(variables=[VariableSpec("x1", "continuous"), spec2], label="y")
    return Dataset(schema, np.column_stack([x1, x2]), labels=labels)


def split_train_test(ds: Dataset, cfg: DgpConfig) -> tuple[Dataset, Dataset]:
    """Positional train/test split matching :func:`simulate_dgp` row order."""
    n = cfg.n_train + cfg.n_test
    train_idx = np.concatenate(
        [np.arange(0, cfg.n_train), np.arange(n, n + cfg.n_train)]
    )
    test_idx = np.concatenate(
        [np.arange(cfg.n_train, n), np.arange(n + cfg.n_train, 2 * n)]
    )
    return ds.subset(train_idx), ds.subset(test_idx)


# ---------------------------------------------------------------------------
# weighted logistic regression baseline
# ---------------------------------------------------------------------------


@dataclass
class LogisticModel:
    """Intercept-first coefficient vector of a weighted logistic fit."""

    coef: np.ndarray
    ridged: bool = False

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return expit(self.coef[0] + x @ self.coef[1:])


def class_weights(labels: np.ndarray) -> np.ndarray:
    """Per-row weights inversely proportional to class frequency, scaled to
    sum to the number of rows."""
    labels = np.asarray(labels)
    values, counts = np.unique(labels, return_counts=True)
    lookup = {v: 1.0 / c for v, c in zip(values, counts)}
    w = np.array([lookup[v] for v in labels], dtype=float)
    return w * (labels.size / w.sum())


def _irls(xd, y, w, ridge: float, max_iter: int, tol: float):
    beta = np.zeros(xd.shape[1])
    for _ in range(max_iter):
        p = expit(xd @ beta)
        wls = w * p * (1.0 - p)
        h = xd.T @ (wls[:, None] * xd)
        if ridge > 0.0:
            h = h + ridge * np.eye(h.shape[0])
        g = xd.T @ (w * (y - p)) - ridge * beta
        step = np.linalg.solve(h, g)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            return beta, True
    return beta, False


def fit_weighted_logistic(
    train: Dataset, max_iter: int = 100, tol: float = 1e-8
) -> LogisticModel:
    """Weighted maximum likelihood via iteratively reweighted least squares.

    Ordinal variables enter as their numeric codes.  If the plain fit does
    not converge (e.g. perfect separation), a small ridge penalty (1e-6) is
    applied and a warning emitted.
    """
    if train.labels is None or len(set(train.labels.tolist())) != 2:
        raise DegenerateLabels("weighted logistic needs two classes")
    y = (train.labels == max(train.labels)).astype(float)
    w = class_weights(train.labels)
    xd = np.column_stack([np.ones(train.n), train.x])
    try:
        beta, converged = _irls(xd, y, w, 0.0, max_iter, tol)
    except np.linalg.LinAlgError:
        converged = False
    if not converged:
        warnings.warn(
            "logistic fit did not converge; refitting with ridge penalty 1e-6"
        )
        beta, _ = _irls(xd, y, w, 1e-6, max_iter, tol)
        return LogisticModel(coef=beta, ridged=True)
    return LogisticModel(coef=beta)


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

_ORACLE_FAMILIES = {1: ("frank",), 0: ("gumbel",)}


def _metric_rows(seed, method, mode, split, metrics) -> list[dict]:
    rows = []

    def add(metric, value):
        if value is not None:
            rows.append(
                {
                    "seed": seed,
                    "method": method,
                    "mode": mode,
                    "split": split,
                    "metric": metric,
                    "value": float(value),
                }
            )

    add("nll_sum", metrics["nll_sum"])
    add("nll_mean", metrics["nll_mean"])
    for cls, v in metrics["nll_per_class"].items():
        add(f"nll_class{cls}", v)
    for cls, v in metrics["brier_per_class"].items():
        add(f"brier_class{cls}", v)
    add("auc", metrics["auc"])
    return rows


def _grid_points(train: Dataset, points: int) -> np.ndarray:
    x1 = train.x[:, 0]
    g1 = np.linspace(x1.min() - 0.5, x1.max() + 0.5, points)
    spec2 = train.schema.variables[1]
    if spec2.kind == "ordinal":
        g2 = np.arange(1, spec2.levels + 1, dtype=float)
    else:
        x2 = train.x[:, 1]
        g2 = np.linspace(x2.min() - 0.5, x2.max() + 0.5, points)
    m1, m2 = np.meshgrid(g1, g2, indexing="ij")
    return np.column_stack([m1.ravel(), m2.ravel()])


def benchmark_run(
    cfg: DgpConfig,
    seeds,
    fit_config: Optional[FitConfig] = None,
    modes: tuple = ("oracle", "mbic"),
    grid_points: int = 0,
) -> tuple[list[dict], list[dict]]:
    """Train both methods per seed on identical splits and score both splits.

    Returns ``(metric_rows, grid_rows)``: long-format metric records and,
    when ``grid_points`` > 0, class-1 probability grids (first seed only)
    for decision-boundary plots.
    """
    fit_config = fit_config or FitConfig()
    metric_rows: list[dict] = []
    grid_rows: list[dict] = []
    for seed in seeds:
        run_cfg = dataclasses.replace(cfg, seed=seed)
        full = simulate_dgp(run_cfg)
        train, test = split_train_test(full, run_cfg)
        classes = [0, 1]
        pos = classes.index(1)

        logit = fit_weighted_logistic(train)
        fitted = {("logistic", "plain"): None}
        for mode in modes:
            families = _ORACLE_FAMILIES if mode == "oracle" else None
            model = fit_classifier(train, fit_config, class_families=families)
            fitted[("copula", mode)] = model

        for (method, mode), model in fitted.items():
            for split_name, ds in (("train", train), ("test", test)):
                if method == "logistic":
                    p1 = logit.predict(ds.x)
                    probs = np.column_stack([1.0 - p1, p1])
                else:
                    probs = posterior(model, ds.x)
                metrics = evaluate_probs(probs, ds.labels, classes)
                metric_rows.extend(
                    _metric_rows(seed, method, mode, split_name, metrics)
                )
            if grid_points > 0 and seed == seeds[0]:
                pts = _grid_points(train, grid_points)
                if method == "logistic":
                    p1 = logit.predict(pts)
                else:
                    p1 = posterior(model, pts)[:, pos]
                for row, p in zip(pts, p1):
                    grid_rows.append(
                        {
                            "seed": seed,
                            "method": method,
                            "mode": mode,
                            "x1": float(row[0]),
                            "x2": float(row[1]),
                            "p_class1": float(p),
                        }
                    )
    return metric_rows, grid_rows

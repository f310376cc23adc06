"""Dependence diagnostics for fitted vines on mixed data.

Two visual checks back the simplifying assumption and pair-copula fits:
Spearman's rho of a continuous pair within each category of an ordinal
conditioner (with bootstrap bands), and a latent-Gaussian rendering of a
continuous-ordinal pair that preserves the polyserial correlation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import ndtri

from .latent import normal_scores, ordinal_thresholds, polyserial_rho
from .vine import VineModel, model_spearman

MIN_CATEGORY_ROWS = 3


def conditional_spearman(x, y, z) -> dict:
    """Spearman's rho of (x, y) within each category of the ordinal z.

    Categories with fewer than ``MIN_CATEGORY_ROWS`` rows are omitted, as
    are degenerate ones (a constant column leaves rho undefined).  Midranks
    handle ties.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    out = {}
    for cat in np.unique(z):
        mask = z == cat
        if int(mask.sum()) < MIN_CATEGORY_ROWS:
            continue
        xs, ys = x[mask], y[mask]
        if np.ptp(xs) == 0.0 or np.ptp(ys) == 0.0:
            continue
        out[int(cat)] = float(stats.spearmanr(xs, ys).statistic)
    return out


@dataclass
class ConditionalRhoResult:
    """Observed conditional Spearman with bootstrap band per category."""

    categories: list[int]
    observed: dict
    lower: dict
    upper: dict
    modeled: Optional[dict]
    level: float
    replicates: int

    def rows(self) -> list[dict]:
        out = []
        for cat in self.categories:
            out.append(
                {
                    "category": cat,
                    "observed": self.observed[cat],
                    "lower": self.lower[cat],
                    "upper": self.upper[cat],
                    "modeled": self.modeled.get(cat) if self.modeled else None,
                }
            )
        return out


def bootstrap_bands(
    x,
    y,
    z,
    replicates: int = 1000,
    level: float = 0.90,
    seed: int = 0,
) -> ConditionalRhoResult:
    """Percentile bootstrap band for the conditional Spearman per category.

    Rows are resampled with replacement; replicates where a category falls
    under the minimum size are skipped for that category.
    """
    if replicates < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    if not 0.0 < level < 1.0:
        raise ValueError("band level must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    n = x.size
    observed = conditional_spearman(x, y, z)
    cats = sorted(observed)
    rng = np.random.default_rng(seed)
    draws: dict = {cat: [] for cat in cats}
    for _ in range(replicates):
        idx = rng.integers(0, n, size=n)
        rep = conditional_spearman(x[idx], y[idx], z[idx])
        for cat in cats:
            if cat in rep:
                draws[cat].append(rep[cat])
    tail = (1.0 - level) / 2.0
    lower = {}
    upper = {}
    for cat in cats:
        vals = np.asarray(draws[cat], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            lower[cat] = upper[cat] = observed[cat]
            continue
        lower[cat] = float(np.quantile(vals, tail))
        upper[cat] = float(np.quantile(vals, 1.0 - tail))
    return ConditionalRhoResult(
        categories=cats,
        observed=observed,
        lower=lower,
        upper=upper,
        modeled=None,
        level=level,
        replicates=replicates,
    )


def model_conditional_spearman(
    model: VineModel,
    conditioned: tuple[int, int],
    categories,
    n_samples: int = 100_000,
    seed: int = 0,
) -> dict:
    """Model-implied Spearman's rho of a vine edge, repeated per category.

    A simplified vine uses one pair copula regardless of the conditioning
    value, so every category receives the same number.
    """
    a, b = sorted(conditioned)
    for tree in model.trees:
        for fe in tree:
            if fe.edge.conditioned == (a, b):
                rho = model_spearman(fe.bicop, n_samples, seed)
                return {int(cat): rho for cat in categories}
    raise KeyError(f"no fitted edge with conditioned pair ({a}, {b})")


def latent_normal_scores(x, codes, levels: int, seed: int = 0) -> tuple:
    """Latent-Gaussian score pair for a continuous-ordinal variable pair.

    The continuous side becomes normal scores; the ordinal side is drawn
    from the conditional normal given those scores (polyserial correlation,
    marginal thresholds), truncated to each observation's level interval.
    Returns ``(z_continuous, z_latent)``.
    """
    x = np.asarray(x, dtype=float)
    codes = np.asarray(codes, dtype=float)
    rho = polyserial_rho(x, codes, levels)
    thresholds = ordinal_thresholds(codes, levels)
    zx = normal_scores(x)
    lo = thresholds[(codes - 1).astype(int)]
    hi = thresholds[codes.astype(int)]
    mean = rho * zx
    sd = np.sqrt(1.0 - rho * rho)
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=x.size)
    # inverse-CDF sampling of the truncated normal on (a, b)
    fa = stats.norm.cdf(a)
    fb = stats.norm.cdf(b)
    p = np.clip(fa + u * (fb - fa), 1e-15, 1.0 - 1e-15)
    zk = mean + sd * ndtri(p)
    zk = np.clip(zk, np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf))
    return zx, zk

"""Latent Gaussian correlation estimates used for vine structure selection.

Continuous-continuous pairs use the Pearson correlation of normal scores,
continuous-ordinal pairs a two-step polyserial estimate and ordinal-ordinal
pairs a two-step polychoric estimate (thresholds from marginal proportions,
then one-dimensional likelihood maximization over the latent correlation).
The assembled matrix is repaired to positive definiteness by eigenvalue
clipping, and partial correlations are obtained with the standard
recursion.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, stats
from scipy.special import ndtr, ndtri

from .bvn import bvn_cdf
from .data import Dataset
from .errors import DegenerateMargin, NearSingular, TooFewObservations

#: Floor for cell probabilities inside latent likelihoods.
PROB_FLOOR = 1e-12

#: Eigenvalue floor used by the positive-definiteness repair.
EIG_FLOOR = 1e-6

_RHO_BOUNDS = (-0.999, 0.999)
MIN_OBS = 10


def normal_scores(x) -> np.ndarray:
    """Map a sample to normal scores ``ndtri(rank / (n + 1))`` (midranks)."""
    x = np.asarray(x, dtype=float)
    ranks = stats.rankdata(x, method="average")
    return ndtri(ranks / (x.size + 1.0))


def normal_scores_pearson(x, y) -> float:
    """Pearson correlation of the normal scores of two continuous samples."""
    x = np.asarray(x, float)
    if x.size < MIN_OBS:
        raise TooFewObservations(f"need at least {MIN_OBS} rows, got {x.size}")
    zx, zy = normal_scores(x), normal_scores(y)
    if zx.std() == 0.0 or zy.std() == 0.0:
        raise DegenerateMargin("constant column in correlation estimate")
    return float(np.corrcoef(zx, zy)[0, 1])


def ordinal_thresholds(codes, levels: int) -> np.ndarray:
    """Latent normal cut points from smoothed category proportions.

    Returns an array of length ``levels + 1`` including ``-inf`` and ``inf``.
    """
    codes = np.asarray(codes).astype(int)
    n = codes.size
    counts = np.bincount(codes, minlength=levels + 1)[1:]
    probs = (counts + 0.5) / (n + 0.5 * levels)
    cum = np.cumsum(probs)[:-1]
    return np.concatenate(([-np.inf], ndtri(cum), [np.inf]))


def polyserial_rho(x, codes, levels: int) -> float:
    """Two-step polyserial correlation of a continuous and an ordinal sample."""
    x = np.asarray(x, float)
    codes = np.asarray(codes).astype(int)
    if x.size < MIN_OBS:
        raise TooFewObservations(f"need at least {MIN_OBS} rows, got {x.size}")
    z = normal_scores(x)
    if z.std() == 0.0:
        raise DegenerateMargin("constant continuous column in polyserial estimate")
    thr = ordinal_thresholds(codes, levels)
    t_hi = thr[codes]
    t_lo = thr[codes - 1]

    def neg_ll(rho):
        s = math.sqrt(1.0 - rho * rho)
        p = ndtr((t_hi - rho * z) / s) - ndtr((t_lo - rho * z) / s)
        return -float(np.sum(np.log(np.maximum(p, PROB_FLOOR))))

    res = optimize.minimize_scalar(neg_ll, bounds=_RHO_BOUNDS, method="bounded")
    return float(res.x)


def polychoric_rho(codes1, levels1: int, codes2, levels2: int) -> float:
    """Two-step polychoric correlation of two ordinal samples."""
    codes1 = np.asarray(codes1).astype(int)
    codes2 = np.asarray(codes2).astype(int)
    if codes1.size < MIN_OBS:
        raise TooFewObservations(f"need at least {MIN_OBS} rows, got {codes1.size}")
    thr1 = ordinal_thresholds(codes1, levels1)
    thr2 = ordinal_thresholds(codes2, levels2)
    counts = np.zeros((levels1, levels2))
    np.add.at(counts, (codes1 - 1, codes2 - 1), 1.0)
    g1, g2 = np.meshgrid(thr1, thr2, indexing="ij")

    def neg_ll(rho):
        grid = bvn_cdf(g1, g2, rho)
        cells = grid[1:, 1:] - grid[:-1, 1:] - grid[1:, :-1] + grid[:-1, :-1]
        return -float(np.sum(counts * np.log(np.maximum(cells, PROB_FLOOR))))

    res = optimize.minimize_scalar(neg_ll, bounds=_RHO_BOUNDS, method="bounded")
    return float(res.x)


def pairwise_latent_rho(xi, spec_i, xj, spec_j) -> float:
    """Latent correlation of one variable pair, dispatched on variable kinds."""
    if spec_i.is_ordinal and spec_j.is_ordinal:
        return polychoric_rho(xi, spec_i.levels, xj, spec_j.levels)
    if spec_i.is_ordinal:
        return polyserial_rho(xj, xi, spec_i.levels)
    if spec_j.is_ordinal:
        return polyserial_rho(xi, xj, spec_j.levels)
    return normal_scores_pearson(xi, xj)


def make_positive_definite(m, floor: float = EIG_FLOOR) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale to unit diagonal."""
    m = np.asarray(m, dtype=float)
    eigval, eigvec = np.linalg.eigh(m)
    if eigval.min() >= floor:
        return m
    repaired = (eigvec * np.maximum(eigval, floor)) @ eigvec.T
    scale = np.sqrt(np.diag(repaired))
    repaired = repaired / np.outer(scale, scale)
    np.fill_diagonal(repaired, 1.0)
    return repaired


def latent_correlation_matrix(ds: Dataset) -> np.ndarray:
    """Pairwise latent correlations of all modeled variables, PD-repaired."""
    d = ds.d
    m = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            rho = pairwise_latent_rho(
                ds.x[:, i], ds.schema.variables[i], ds.x[:, j], ds.schema.variables[j]
            )
            m[i, j] = m[j, i] = rho
    return make_positive_definite(m)


def partial_correlation(m, a: int, b: int, conditioning=()) -> float:
    """Partial correlation of variables ``a`` and ``b`` given a set, by the
    recursive elimination identity.

    Raises
    ------
    NearSingular
        If an intermediate correlation is within ``1e-6`` of +/-1.
    """
    m = np.asarray(m, dtype=float)
    memo = {}

    def rec(i, j, cond):
        if i > j:
            i, j = j, i
        key = (i, j, cond)
        if key in memo:
            return memo[key]
        if not cond:
            val = m[i, j]
        else:
            k = cond[-1]
            rest = cond[:-1]
            r_ij = rec(i, j, rest)
            r_ik = rec(i, k, rest)
            r_jk = rec(j, k, rest)
            da = 1.0 - r_ik * r_ik
            db = 1.0 - r_jk * r_jk
            if da < PROB_FLOOR or db < PROB_FLOOR:
                raise NearSingular(
                    f"partial correlation given {cond} has |rho| too close to 1"
                )
            val = (r_ij - r_ik * r_jk) / math.sqrt(da * db)
        memo[key] = val
        return val

    return float(rec(int(a), int(b), tuple(sorted(int(c) for c in conditioning))))

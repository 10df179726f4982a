"""Isotonic regression, L2-regularised soft ranks, and the soft-Spearman loss.

Ranks are ascending: the largest score gets the largest (soft) rank, so a
positive correlation with ascending target ranks means "higher score, longer
survival".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from graft import kernels
from graft.errors import NumericError


@dataclass(frozen=True)
class SoftRankConfig:
    tau: float = 0.1
    variance_epsilon: float = 1e-8


def pav_isotonic(y, weights=None) -> np.ndarray:
    """Least-squares projection of ``y`` onto non-increasing sequences."""
    return kernels.pav_decreasing(y, weights)[0]


def soft_rank(s, tau: float = 0.1) -> tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]:
    """Soft ranks of ``s`` and a function applying their Jacobian to a vector.

    Projection of s/tau onto the permutahedron of (1..m): sort z = s/tau
    descending, fit v = PAV(z_sorted - (m, ..., 1)), ranks = z_sorted - v
    mapped back. The Jacobian is (I - block averaging)/tau in sorted order;
    it is symmetric, so the same map serves as VJP and JVP.
    """
    z = np.asarray(s, dtype=np.float64) / tau
    m = len(z)
    order = np.argsort(-z, kind="stable")
    z_sorted = z[order]
    v, blocks = kernels.pav_decreasing(z_sorted - np.arange(m, 0, -1, dtype=np.float64))
    ranks = np.empty(m)
    ranks[order] = z_sorted - v
    counts = np.bincount(blocks)

    def jacobian_apply(u):
        u_sorted = np.asarray(u, dtype=np.float64)[order]
        block_mean = np.bincount(blocks, weights=u_sorted) / counts
        out = np.empty(m)
        out[order] = (u_sorted - block_mean[blocks]) / tau
        return out

    return ranks, jacobian_apply


def hard_rank(y) -> np.ndarray:
    """Ascending ranks 1..m, ties get the average of the positions they cover."""
    return rankdata(y, method="average")


def correlation_grad(r, q, variance_epsilon: float = 1e-8) -> tuple[float, np.ndarray]:
    """Pearson correlation of ``r`` with fixed ``q`` and its gradient in ``r``.

    Only the variance of ``r`` carries the epsilon guard.
    """
    m = len(r)
    rc = r - r.mean()
    qc = q - q.mean()
    sd_q = np.sqrt(np.mean(qc * qc))
    if sd_q == 0:
        raise NumericError("target ranks have zero variance (all imputed targets equal)")
    var_r = np.mean(rc * rc) + variance_epsilon
    sd_r = np.sqrt(var_r)
    cov = np.mean(rc * qc)
    corr = cov / (sd_r * sd_q)
    grad = (qc - cov * rc / var_r) / (m * sd_r * sd_q)
    return float(corr), grad


def spearman_loss(s, y_star, cfg: SoftRankConfig = SoftRankConfig()) -> tuple[float, np.ndarray]:
    """Negative correlation between soft ranks of ``s`` and hard ranks of ``y_star``."""
    loss, grads = mean_spearman_loss(s, np.asarray(y_star)[None, :], cfg)
    return loss, grads


def mean_spearman_loss(s, targets, cfg: SoftRankConfig = SoftRankConfig()) -> tuple[float, np.ndarray]:
    """Spearman loss averaged over the rows of ``targets`` (shape (M, m)); soft ranks computed once."""
    s = np.asarray(s, dtype=np.float64)
    if len(s) < 3:
        raise NumericError("spearman loss needs at least 3 scores")
    r, jac = soft_rank(s, cfg.tau)
    total = 0.0
    dL_dr = np.zeros_like(r)
    for y in np.atleast_2d(targets):
        corr, g = correlation_grad(r, hard_rank(y), cfg.variance_epsilon)
        total -= corr
        dL_dr -= g
    M = len(np.atleast_2d(targets))
    return total / M, jac(dL_dr / M)

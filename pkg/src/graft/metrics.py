"""Harrell's C-index and the IPCW integrated Brier score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from graft import kernels
from graft.errors import NumericError
from graft.km import KMCurve, fit_km


def c_index(scores, times, events) -> float:
    """Fraction of comparable pairs ordered correctly; higher score = longer survival.

    (i, j) is comparable when t_i < t_j and subject i had the event; it is
    concordant when s_i < s_j, and a score tie counts one half.
    """
    concordant, tied, comparable = kernels.concordance_counts(scores, times, events)
    if comparable == 0:
        raise NumericError("no comparable pairs: C-index undefined")
    return (concordant + 0.5 * tied) / comparable


def censoring_km(times, events) -> KMCurve:
    """KM estimate of the censoring distribution G (event flags flipped)."""
    return fit_km(times, 1 - np.asarray(events))


@dataclass(frozen=True)
class EvalGrid:
    times: np.ndarray
    rule: str = "linspace-100/G>0"


def make_eval_grid(test_times, G: KMCurve, n_points: int = 100) -> EvalGrid:
    """Equally spaced over the observed test range, dropping points where G(t) = 0."""
    grid = np.linspace(np.min(test_times), np.max(test_times), n_points)
    grid = grid[np.asarray(G(grid)) > 0]
    if len(grid) == 0:
        raise NumericError("censoring survival is zero over the whole evaluation range")
    return EvalGrid(grid)


def brier_scores(surv, times, events, grid, G: KMCurve) -> np.ndarray:
    """IPCW Brier score at each grid time; ``surv`` is (n subjects, len(grid))."""
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(events)
    grid = np.asarray(grid, dtype=np.float64)
    S = np.asarray(surv, dtype=np.float64)
    G_grid = np.asarray(G(grid), dtype=np.float64)
    G_before = np.asarray(G.left_limit(t), dtype=np.float64)

    died = (t[:, None] <= grid[None, :]) & (e[:, None] == 1)
    alive = t[:, None] > grid[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        term_died = np.where(died, S ** 2 / G_before[:, None], 0.0)
        term_alive = np.where(alive, (1.0 - S) ** 2 / G_grid[None, :], 0.0)
    return (term_died + term_alive).mean(axis=0)


def integrated_brier(surv, times, events, grid, G: KMCurve) -> float:
    """Trapezoidal average of the IPCW Brier score over ``grid`` for a given G."""
    grid = np.asarray(grid.times if isinstance(grid, EvalGrid) else grid, dtype=np.float64)
    ok = np.asarray(G(grid)) > 0
    if not ok.any():
        raise NumericError("censoring survival is zero on the whole grid")
    S = surv(grid) if callable(surv) else np.asarray(surv, dtype=np.float64)
    grid, S = grid[ok], S[:, ok]
    bs = brier_scores(S, times, events, grid, G)
    if len(grid) == 1:
        return float(bs[0])
    area = np.sum(0.5 * (bs[1:] + bs[:-1]) * np.diff(grid))
    return float(area / (grid[-1] - grid[0]))


def ibs(surv, times, events, grid, train_times, train_events) -> float:
    """Integrated Brier score with G estimated from the training data.

    ``surv`` is either an (n, len(grid)) matrix or a callable mapping the grid
    to one.
    """
    return integrated_brier(surv, times, events, grid, censoring_km(train_times, train_events))

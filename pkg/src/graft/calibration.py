"""Turning scores into survival curves.

Two post-hoc calibrators, both fitted on training scores only:

* a one-covariate Cox model (Newton-Raphson on the Breslow partial likelihood)
  with the Breslow cumulative baseline hazard, and
* one isotonic regression of "still alive at t_k" on the score per grid time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from graft import kernels
from graft.errors import ValidationError

BETA_LIMIT = 50.0


class CoxFit(NamedTuple):
    beta: float
    iterations: int
    converged: bool
    diverged: bool


def _risk_sums(scores, times, events, beta, center):
    """Per distinct event time: (deaths, sum of event scores, S0, S1, S2) over the risk set."""
    order = np.argsort(-times, kind="stable")
    t, s, e = times[order], scores[order] - center, events[order]
    eta = beta * s
    w = np.exp(eta - eta.max())
    S0, S1, S2 = np.cumsum(w), np.cumsum(w * s), np.cumsum(w * s * s)
    # risk set of time t = everyone with time >= t -> cumulative sums at the last tied index
    last = np.r_[t[1:] != t[:-1], True]
    d = np.cumsum(e)
    ds = np.cumsum(e * s)
    idx = np.flatnonzero(last)
    deaths = np.diff(np.r_[0, d[idx]])
    dsum = np.diff(np.r_[0.0, ds[idx]])
    keep = deaths > 0
    shift = eta.max()
    return (t[idx][keep], deaths[keep], dsum[keep], S0[idx][keep], S1[idx][keep], S2[idx][keep], shift)


def _partial_loglik(scores, times, events, beta, center):
    _, deaths, dsum, S0, _, _, shift = _risk_sums(scores, times, events, beta, center)
    return float(beta * dsum.sum() - np.sum(deaths * (np.log(S0) + shift)))


def _separation(scores, times, events) -> int:
    """+1 / -1 when the partial likelihood increases without bound in that direction, else 0.

    That happens exactly when every subject with an event holds the largest
    (resp. smallest) score of its risk set.
    """
    order = np.argsort(-times, kind="stable")
    t, s, e = times[order], scores[order], events[order]
    # risk set of position i = all positions up to the last one tied with t[i]
    last = np.r_[np.flatnonzero(t[1:] != t[:-1]), len(t) - 1]
    end = last[np.searchsorted(last, np.arange(len(t)))]
    hi, lo = np.maximum.accumulate(s)[end], np.minimum.accumulate(s)[end]
    ev = e == 1
    if np.all(hi[ev] == lo[ev]):
        return 0  # flat: no risk set with an event separates anything
    if np.all(s[ev] == hi[ev]):
        return 1
    if np.all(s[ev] == lo[ev]):
        return -1
    return 0


def fit_cox_1d(scores, times, events, *, tol: float = 1e-8, max_iter: int = 100) -> CoxFit:
    """Maximum partial-likelihood coefficient of a single covariate (Breslow ties).

    Separated data have no finite maximiser; the estimate is then clamped to
    +-50 and flagged as diverged without iterating.
    """
    scores = np.asarray(scores, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    if events.sum() < 1:
        raise ValidationError("Cox calibration needs at least one event")
    center = float(scores.mean())
    direction = _separation(scores, times, events)
    if direction:
        return CoxFit(direction * BETA_LIMIT, 0, False, True)

    beta = 0.0
    ll = _partial_loglik(scores, times, events, beta, center)
    for it in range(1, max_iter + 1):
        _, deaths, dsum, S0, S1, S2, _ = _risk_sums(scores, times, events, beta, center)
        mean = S1 / S0
        grad = float(dsum.sum() - np.sum(deaths * mean))
        if abs(grad) < tol:
            return CoxFit(beta, it - 1, True, abs(beta) >= BETA_LIMIT)
        info = float(np.sum(deaths * (S2 / S0 - mean * mean)))
        step = grad / info if info > 1e-300 else np.sign(grad) * 2 * BETA_LIMIT
        # step halving keeps the likelihood non-decreasing
        for _ in range(60):
            cand = float(np.clip(beta + step, -BETA_LIMIT, BETA_LIMIT))
            ll_new = _partial_loglik(scores, times, events, cand, center)
            if ll_new >= ll or abs(step) < 1e-12:
                break
            step *= 0.5
        if abs(cand) >= BETA_LIMIT and cand == beta:
            return CoxFit(cand, it, False, True)
        beta, ll = cand, ll_new
    return CoxFit(beta, max_iter, False, abs(beta) >= BETA_LIMIT)


@dataclass(frozen=True)
class BreslowBaseline:
    times: np.ndarray
    cumhaz: np.ndarray

    def step(self, t):
        """The Breslow step function itself (right-continuous, 0 before the first event)."""
        idx = np.searchsorted(self.times, t, side="right")
        return np.r_[0.0, self.cumhaz][idx]

    def __call__(self, t):
        """Linear interpolation through (0, 0) and the knots, flat after the last event."""
        return np.interp(t, np.r_[0.0, self.times], np.r_[0.0, self.cumhaz])


def breslow_baseline(scores, times, events, beta: float, center: float = 0.0) -> BreslowBaseline:
    """Lambda0(t) = sum over event times t_j <= t of d_j / sum_{at risk} exp(beta (s_i - center))."""
    scores = np.asarray(scores, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    t, deaths, _, S0, _, _, shift = _risk_sums(scores, times, events, beta, center)
    hazard = deaths / (S0 * np.exp(shift))
    order = np.argsort(t)
    return BreslowBaseline(t[order], np.cumsum(hazard[order]))


@dataclass(frozen=True)
class CoxCalibrator:
    beta_cox: float
    breslow: BreslowBaseline
    center: float = 0.0
    diverged: bool = False

    def survival(self, scores, t) -> np.ndarray:
        """S(t | s) for every score (rows) and time (columns)."""
        risk = np.exp(np.minimum(self.beta_cox * (np.atleast_1d(scores) - self.center), 700.0))
        return np.exp(-np.outer(risk, self.breslow(np.atleast_1d(t))))


def fit_cox_calibrator(scores, times, events) -> CoxCalibrator:
    scores = np.asarray(scores, dtype=np.float64)
    fit = fit_cox_1d(scores, times, events)
    center = float(scores.mean())
    return CoxCalibrator(fit.beta, breslow_baseline(scores, times, events, fit.beta, center), center, fit.diverged)


def survival_cox(cal: CoxCalibrator, score, t):
    """exp(-Lambda0(t) * exp(beta_cox * s)), the proportional-hazards survival curve."""
    out = cal.survival(score, t)
    return float(out[0, 0]) if np.ndim(score) == 0 and np.ndim(t) == 0 else out


@dataclass(frozen=True)
class IsotonicCalibrator:
    grid: np.ndarray
    breakpoints: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]
    inherited: np.ndarray  # grid points that copied an earlier map

    def grid_values(self, scores) -> np.ndarray:
        """Calibrated survival at every grid time: shape (n_scores, K)."""
        s = np.atleast_1d(np.asarray(scores, dtype=np.float64))
        return np.column_stack([np.interp(s, x, v) for x, v in zip(self.breakpoints, self.values)])

    def survival(self, scores, t) -> np.ndarray:
        G = self.grid_values(scores)
        t = np.atleast_1d(t)
        return np.vstack([np.interp(t, self.grid, row) for row in G])

    def crossings(self, scores) -> int:
        """How many (subject, grid step) pairs have survival increasing in time."""
        return int(np.sum(np.diff(self.grid_values(scores), axis=1) > 1e-12))


def isotonic_increasing(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Non-decreasing least-squares fit of ``y`` on ``x``; tied ``x`` values pooled first."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ux, inv = np.unique(x, return_inverse=True)
    w = np.bincount(inv).astype(np.float64)
    ybar = np.bincount(inv, weights=y) / w
    fitted = -kernels.pav_decreasing(-ybar, w)[0]
    return ux, fitted


def fit_isotonic(scores, times, events, K: int = 50, time_range=None) -> IsotonicCalibrator:
    """Per-grid-time isotonic maps from score to P(T > t_k).

    Subjects censored at or before t_k carry no label there and are skipped.
    Grid points with fewer than 2 labelled subjects reuse the previous map.
    """
    scores = np.asarray(scores, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events)
    lo, hi = (times.min(), times.max()) if time_range is None else time_range
    grid = np.linspace(lo, hi, K)

    xs, vs, inherited = [], [], []
    for k, tk in enumerate(grid):
        alive = times > tk
        usable = alive | ((events == 1) & ~alive)
        if usable.sum() < 2:
            if xs:
                xs.append(xs[-1])
                vs.append(vs[-1])
            else:
                xs.append(np.array([0.0]))
                vs.append(np.array([1.0]))
            inherited.append(k)
            continue
        x, v = isotonic_increasing(scores[usable], alive[usable].astype(np.float64))
        xs.append(x)
        vs.append(np.clip(v, 0.0, 1.0))
    return IsotonicCalibrator(grid, tuple(xs), tuple(vs), np.array(inherited, dtype=np.int64))


def survival_isotonic(cal: IsotonicCalibrator, score, t):
    out = cal.survival(score, t)
    return float(out[0, 0]) if np.ndim(score) == 0 and np.ndim(t) == 0 else out


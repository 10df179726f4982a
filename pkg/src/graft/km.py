"""Product-limit estimation and sampling from left-truncated KM laws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from graft.errors import NumericError, ValidationError


@dataclass(frozen=True)
class KMCurve:
    event_times: np.ndarray
    surv_probs: np.ndarray
    n_at_start: int

    def __call__(self, t):
        return survival_at(self, t)

    def left_limit(self, t):
        """S(t-): the value just before ``t`` (the step at ``t`` itself excluded)."""
        idx = np.searchsorted(self.event_times, t, side="left")
        return np.r_[1.0, self.surv_probs][idx]


def fit_km(times, events) -> KMCurve:
    """Kaplan-Meier estimate. Censorings tied with events stay in the risk set at that time."""
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    events = np.asarray(events).reshape(-1)
    if len(times) == 0:
        raise ValidationError("cannot fit a KM curve to an empty sample")
    if len(events) != len(times):
        raise ValidationError("times and events differ in length")

    uniq, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=(events != 0).astype(np.float64), minlength=len(uniq))
    counts = np.bincount(inverse, minlength=len(uniq))
    at_risk = len(times) - np.concatenate([[0], np.cumsum(counts)[:-1]])

    has_event = deaths > 0
    factors = 1.0 - deaths[has_event] / at_risk[has_event]
    return KMCurve(uniq[has_event], np.cumprod(factors), len(times))


def survival_at(km: KMCurve, t):
    """Right-continuous step evaluation; works elementwise on arrays."""
    idx = np.searchsorted(km.event_times, t, side="right")
    out = np.r_[1.0, km.surv_probs][idx]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConditionalCDF:
    truncation_time: float
    support: np.ndarray
    cdf_vals: np.ndarray
    total_mass: float
    degenerate: bool

    def increments(self) -> np.ndarray:
        return np.diff(self.cdf_vals, prepend=0.0)

    def mean(self) -> float:
        """Mean of the sampling law (mass renormalised onto the support)."""
        if self.degenerate:
            raise NumericError("degenerate conditional distribution has no mean")
        return float(np.dot(self.support, self.increments()) / self.total_mass)


def condition_beyond(km: KMCurve, t_c: float) -> ConditionalCDF:
    """F(t | T > t_c) = 1 - S(t)/S(t_c) on the event times after ``t_c``."""
    s_c = survival_at(km, t_c)
    mask = km.event_times > t_c
    support = km.event_times[mask]
    if s_c <= 0 or len(support) == 0:
        return ConditionalCDF(float(t_c), support[:0], np.empty(0), 0.0, True)
    cdf = 1.0 - km.surv_probs[mask] / s_c
    mass = float(cdf[-1])
    return ConditionalCDF(float(t_c), support, cdf, mass, mass <= 0)


def sample_time(cdf: ConditionalCDF, u):
    """Inverse-transform sample: smallest support time with F >= u * total_mass.

    ``u`` in [0, 1) is rescaled onto the available mass, so a defective tail
    (last neighbour censored) truncates draws at the last observed event time.
    """
    if cdf.degenerate:
        raise NumericError(f"conditional distribution beyond t={cdf.truncation_time} is degenerate")
    idx = np.searchsorted(cdf.cdf_vals, np.asarray(u) * cdf.total_mass, side="left")
    out = cdf.support[np.minimum(idx, len(cdf.support) - 1)]
    return float(out) if np.ndim(out) == 0 else out

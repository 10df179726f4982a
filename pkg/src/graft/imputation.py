"""Fixed per-subject imputation laws from nearest-neighbour KM curves.

Built once from the (standardized) training split. Uncensored subjects keep
their observed log-time; each censored subject gets a KM curve fitted on its
neighbourhood, truncated at its own censoring time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from graft.data import SurvivalDataset
from graft.errors import ConfigurationError
from graft.km import ConditionalCDF, condition_beyond, fit_km, sample_time


@dataclass(frozen=True)
class ImputationTable:
    times: np.ndarray
    events: np.ndarray
    log_times: np.ndarray
    neighborhoods: dict[int, np.ndarray]
    radii: dict[int, float]
    conditionals: dict[int, ConditionalCDF]
    k_events: int
    metric: str = "euclidean"

    @property
    def fallback(self) -> np.ndarray:
        """Censored subjects whose conditional law was degenerate (target fixed at log t_i)."""
        return np.array(sorted(i for i, c in self.conditionals.items() if c.degenerate), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.times)


def neighborhood(X, events, i: int, k_events: int) -> tuple[np.ndarray, float]:
    """Everyone (except ``i``) within the radius that first holds ``k_events`` events."""
    d = np.sqrt(((X - X[i]) ** 2).sum(axis=1))
    d[i] = np.inf
    event_d = np.sort(d[events == 1])
    radius = float(event_d[k_events - 1])
    return np.flatnonzero(d <= radius), radius


def build_table(train: SurvivalDataset, k_events: int = 10) -> ImputationTable:
    n_events = int(train.events.sum())
    if n_events < k_events:
        raise ConfigurationError(
            f"training set has {n_events} events; local KM neighbourhoods need at least {k_events}"
        )
    X, t, e = train.features, train.times, train.events
    neighborhoods, radii, conditionals = {}, {}, {}
    for i in np.flatnonzero(e == 0):
        i = int(i)
        # a censored subject's own event is not in the pool, so k_events always exist
        nbrs, radius = neighborhood(X, e, i, k_events)
        km = fit_km(t[nbrs], e[nbrs])
        neighborhoods[i] = nbrs
        radii[i] = radius
        conditionals[i] = condition_beyond(km, t[i])
    return ImputationTable(t, e, np.log(t), neighborhoods, radii, conditionals, k_events)


def draw_targets(table: ImputationTable, batch, rng, n_draws: int | None = None) -> np.ndarray:
    """Imputed log-times for ``batch``: shape (m,) or (n_draws, m).

    Uniforms are drawn as one (n_draws, m) block so the stream consumption
    depends only on the batch size.
    """
    batch = np.asarray(batch)
    M = 1 if n_draws is None else n_draws
    u = rng.random((M, len(batch)))
    out = np.repeat(table.log_times[batch][None, :], M, axis=0)
    for col, i in enumerate(batch):
        cond = table.conditionals.get(int(i))
        if cond is None or cond.degenerate:
            continue
        out[:, col] = np.log(sample_time(cond, u[:, col]))
    return out[0] if n_draws is None else out


def write_audit_csv(table: ImputationTable, path) -> None:
    """One row per subject: neighbourhood size, radius, and the conditional support."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([
            "subject", "time", "event", "neighborhood_size", "neighborhood_events",
            "radius", "support_size", "total_mass", "fallback", "support",
        ])
        for i in range(len(table)):
            t, e = repr(float(table.times[i])), int(table.events[i])
            if e == 1:
                w.writerow([i, t, e, "", "", "", "", "", 0, ""])
                continue
            nbrs = table.neighborhoods[i]
            cond = table.conditionals[i]
            w.writerow([
                i, t, e, len(nbrs), int(table.events[nbrs].sum()), repr(table.radii[i]),
                len(cond.support), repr(cond.total_mass), int(cond.degenerate),
                ";".join(repr(float(s)) for s in cond.support),
            ])

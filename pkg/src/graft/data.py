"""Survival datasets: CSV ingestion, scaling, noise injection, synthetic data, CV splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from graft.errors import ConfigurationError, ParseError, SchemaError, ValidationError

NOISE_DISTS = ("gaussian", "student_t_df2")


@dataclass(frozen=True)
class SurvivalDataset:
    features: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise ValidationError("features must be a 2-D matrix")
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        e = np.asarray(self.events).reshape(-1)
        if not (len(t) == len(e) == X.shape[0]):
            raise ValidationError(
                f"row counts differ: features {X.shape[0]}, times {len(t)}, events {len(e)}"
            )
        if X.shape[1] < 1:
            raise ValidationError("at least one feature column is required")
        bad = np.flatnonzero(~(t > 0))
        if len(bad):
            raise ValidationError(f"row {bad[0]}: time must be > 0, got {t[bad[0]]}")
        bad = np.flatnonzero((e != 0) & (e != 1))
        if len(bad):
            raise ValidationError(f"row {bad[0]}: event must be 0 or 1, got {e[bad[0]]}")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidationError("feature_names length does not match the feature count")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e.astype(np.int64))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> SurvivalDataset:
        idx = np.asarray(idx)
        return SurvivalDataset(self.features[idx], self.times[idx], self.events[idx], self.feature_names)

    def with_features(self, X, names=None) -> SurvivalDataset:
        return SurvivalDataset(X, self.times, self.events, self.feature_names if names is None else names)


def load_csv(path, time_col: str = "time", event_col: str = "event") -> SurvivalDataset:
    """Read a headed CSV; every column other than time/event becomes a feature, in file order."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in (time_col, event_col):
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r} (have {header})")
        ti, ei = header.index(time_col), header.index(event_col)
        feat_idx = [j for j in range(len(header)) if j not in (ti, ei)]
        if not feat_idx:
            raise SchemaError(f"{path}: no feature columns")

        rows = []
        for r, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {r}: expected {len(header)} cells, got {len(row)}")
            vals = []
            for j, cell in enumerate(row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: row {r}, column {header[j]!r}: not a number: {cell!r}") from None
            if not vals[ti] > 0:
                raise ValidationError(f"{path}: row {r}: time must be > 0, got {row[ti]}")
            if vals[ei] not in (0.0, 1.0):
                raise ValidationError(f"{path}: row {r}: event must be 0 or 1, got {row[ei]}")
            if not all(math.isfinite(vals[j]) for j in feat_idx):
                raise ParseError(f"{path}: row {r}: non-finite feature value")
            rows.append(vals)

    if not rows:
        raise ValidationError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    return SurvivalDataset(
        features=data[:, feat_idx],
        times=data[:, ti],
        events=data[:, ei].astype(np.int64),
        feature_names=tuple(header[j] for j in feat_idx),
    )


def write_csv(ds: SurvivalDataset, path, time_col: str = "time", event_col: str = "event") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([time_col, event_col, *ds.feature_names])
        for i in range(ds.n):
            w.writerow([repr(float(ds.times[i])), int(ds.events[i]), *(repr(float(v)) for v in ds.features[i])])


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.means):
            raise ValidationError(f"expected {len(self.means)} feature columns, got shape {X.shape}")
        return (X - self.means) / self.stds


def fit_scaler(X) -> ScalerParams:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValidationError("standardization needs at least 2 rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1)
    constant = np.all(X == X[0], axis=0)
    means = np.where(constant, X[0], means)
    stds = np.where(constant | (stds == 0), 1.0, stds)
    return ScalerParams(means, stds)


def standardize(ds: SurvivalDataset) -> tuple[SurvivalDataset, ScalerParams]:
    scaler = fit_scaler(ds.features)
    return ds.with_features(scaler.apply(ds.features)), scaler


def inject_noise(ds: SurvivalDataset, k: int, dist: str = "gaussian", seed: int = 0) -> SurvivalDataset:
    """Append ``k * p`` i.i.d. noise columns after the original ``p``."""
    if k < 1:
        raise ConfigurationError(f"noise multiplier must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    shape = (ds.n, k * ds.p)
    if dist == "gaussian":
        noise = rng.standard_normal(shape)
    elif dist == "student_t_df2":
        noise = rng.standard_t(2, size=shape)
    else:
        raise ConfigurationError(f"unknown noise distribution {dist!r}; choose from {NOISE_DISTS}")
    names = ds.feature_names + tuple(f"noise_{j + 1}" for j in range(shape[1]))
    return ds.with_features(np.hstack([ds.features, noise]), names)


def generate_synthetic(
    n: int,
    p: int,
    n_signal: int,
    censor_frac: float,
    seed: int = 0,
    *,
    intercept: float = 1.0,
    noise_sd: float = 0.5,
) -> tuple[SurvivalDataset, np.ndarray]:
    """Linear AFT data: log T = x.beta + intercept + N(0, noise_sd^2).

    The first ``n_signal`` coefficients are nonzero (magnitudes in [0.5, 1],
    random signs). Censoring is Uniform(0, c_max), drawn without looking at T;
    only the scalar ``c_max`` is tuned so the censored fraction hits the target.
    """
    if not 0 <= n_signal <= p:
        raise ConfigurationError("need 0 <= n_signal <= p")
    if not 0 <= censor_frac < 1:
        raise ConfigurationError("censor_frac must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:n_signal] = rng.uniform(0.5, 1.0, n_signal) * rng.choice([-1.0, 1.0], n_signal)
    log_t = X @ beta + intercept + noise_sd * rng.standard_normal(n)
    event_time = np.exp(log_t)
    u = 1.0 - rng.random(n)  # in (0, 1]

    if censor_frac == 0:
        times, events = event_time, np.ones(n, dtype=np.int64)
    else:
        lo, hi = np.log(event_time.min()) - 5, np.log(event_time.max()) + 5
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.mean(u * np.exp(mid) < event_time) > censor_frac:
                lo = mid
            else:
                hi = mid
        cens_time = u * np.exp(hi)
        events = (event_time <= cens_time).astype(np.int64)
        times = np.minimum(event_time, cens_time)

    names = tuple(f"x{j + 1}" for j in range(p))
    return SurvivalDataset(X, times, events, names), beta


@dataclass(frozen=True)
class FoldSplit:
    assignments: np.ndarray
    seed: int

    @property
    def n_folds(self) -> int:
        return int(self.assignments.max()) + 1

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignments == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


def _stratified_assign(events, n_groups: int, rng) -> np.ndarray:
    # Deal each stratum round-robin after shuffling; the deal position carries over
    # between strata so group sizes stay balanced. Strata smaller than n_groups are
    # pooled and dealt together (unstratified).
    events = np.asarray(events)
    out = np.empty(len(events), dtype=np.int64)
    pooled = []
    offset = 0
    for label in (1, 0):
        idx = np.flatnonzero(events == label)
        if len(idx) < n_groups:
            pooled.append(idx)
            continue
        idx = rng.permutation(idx)
        out[idx] = (np.arange(len(idx)) + offset) % n_groups
        offset = (offset + len(idx)) % n_groups
    if pooled:
        idx = rng.permutation(np.concatenate(pooled))
        out[idx] = (np.arange(len(idx)) + offset) % n_groups
    return out


def stratified_kfold(ds: SurvivalDataset, folds: int = 3, seed: int = 0) -> FoldSplit:
    if folds < 2:
        raise ConfigurationError(f"folds must be >= 2, got {folds}")
    if folds > ds.n:
        raise ConfigurationError(f"folds ({folds}) exceeds the number of subjects ({ds.n})")
    rng = np.random.default_rng(seed)
    return FoldSplit(_stratified_assign(ds.events, folds, rng), seed)


def stratified_holdout(events, frac: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into (keep, holdout) with ~``frac`` of each event stratum held out."""
    events = np.asarray(events)
    keep, hold = [], []
    for label in (1, 0):
        idx = rng.permutation(np.flatnonzero(events == label))
        n_hold = int(round(frac * len(idx)))
        hold.append(idx[:n_hold])
        keep.append(idx[n_hold:])
    return np.sort(np.concatenate(keep)), np.sort(np.concatenate(hold))

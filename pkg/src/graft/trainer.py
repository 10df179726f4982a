"""Minibatch training of the gated residual AFT scorer."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from graft.data import ScalerParams, SurvivalDataset, fit_scaler, stratified_holdout
from graft.errors import ConfigurationError, NumericError
from graft.gates import (
    PROB_CLIP,
    GateParams,
    deterministic_gates,
    ema_baseline,
    gate_backward,
    l0_penalty,
    reinforce_step,
    sample_gates,
    sample_mask,
    sigmoid_penalty,
)
from graft.imputation import build_table, draw_targets
from graft.network import GraftParams, backward, forward, init_params
from graft.softrank import SoftRankConfig, mean_spearman_loss

log = logging.getLogger(__name__)

VARIANTS = ("full", "no_stg", "linear_only")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    alpha_l2: float = 1e-4
    lambda_l0: float = 0.01
    batch_size: int = 64
    mc_samples: int = 5
    max_epochs: int = 1000
    patience: int = 10
    tau: float = 0.1
    sigma: float = 0.5
    d_h: int = 32
    dropout: float = 0.2
    seed: int = 0
    variant: str = "full"
    gate_variant: str = "stg"
    val_frac: float = 0.2
    k_events: int = 10
    entropy_coef: float = 0.01
    baseline_decay: float = 0.9

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.gate_variant not in ("stg", "sigmoid", "reinforce"):
            raise ConfigurationError(f"unknown gate variant {self.gate_variant!r}")
        for name in ("lr", "tau", "sigma", "batch_size", "mc_samples", "max_epochs", "patience", "k_events"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.patience > self.max_epochs:
            raise ConfigurationError("patience cannot exceed max_epochs")
        if not 0 <= self.dropout < 1 or not 0 < self.val_frac < 1:
            raise ConfigurationError("dropout must lie in [0, 1) and val_frac in (0, 1)")
        if self.alpha_l2 < 0 or self.lambda_l0 < 0:
            raise ConfigurationError("regularisation weights must be non-negative")

    @property
    def gate_kind(self) -> str:
        return "none" if self.variant != "full" else self.gate_variant

    @property
    def arch(self) -> str:
        return "no_mlp" if self.variant == "linear_only" else "full"

    @property
    def softrank(self) -> SoftRankConfig:
        return SoftRankConfig(self.tau)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


class AdamState:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
    """Bias-corrected Adam update, in place on the arrays in ``params``."""
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        state.m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
        p -= lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + state.eps)


def current_gates(gp: GateParams, *, gate_noise=None, mask=None) -> np.ndarray:
    if gp.variant == "stg" and gate_noise is not None:
        return np.clip(gp.eta + gate_noise, 0.0, 1.0)
    if gp.variant == "reinforce" and mask is not None:
        return np.asarray(mask, dtype=np.float64)
    return deterministic_gates(gp)


def total_loss(params: GraftParams, gp: GateParams, X, targets, cfg: TrainConfig, *,
               gate_noise=None, mask=None, dropout_mask=None) -> tuple[float, dict[str, np.ndarray], float]:
    """Monte-Carlo ranking loss + gate sparsity + L2 on all parameters.

    Returns ``(loss, grads, rank_loss)``. ``grads`` has an ``"eta"`` entry for
    every gated variant; for REINFORCE it holds only the sparsity gradient, the
    policy-gradient part is added by the caller.
    """
    g = current_gates(gp, gate_noise=gate_noise, mask=mask)
    s, cache = forward(params, X, g, dropout_mask)
    rank_loss, dL_ds = mean_spearman_loss(s, targets, cfg.softrank)
    grads, dL_dg = backward(cache, dL_ds)

    loss = rank_loss
    alpha = cfg.alpha_l2
    for k, arr in params.arrays().items():
        loss += alpha * float(np.sum(arr * arr))
        grads[k] = grads[k] + 2 * alpha * arr

    if gp.variant == "stg":
        pen, pen_grad = l0_penalty(gp)
        if gate_noise is not None:
            path = gate_backward(gp, gate_noise, dL_dg)
        else:
            path = dL_dg * ((gp.eta > 0) & (gp.eta < 1))
        loss += pen + alpha * float(np.sum(gp.eta ** 2))
        grads["eta"] = path + pen_grad + 2 * alpha * gp.eta
    elif gp.variant == "sigmoid":
        pen, pen_grad = sigmoid_penalty(gp)
        loss += pen + alpha * float(np.sum(gp.eta ** 2))
        grads["eta"] = dL_dg * g * (1 - g) + pen_grad + 2 * alpha * gp.eta
    elif gp.variant == "reinforce":
        loss += gp.lambda_l0 * float(gp.eta.sum())
        grads["eta"] = np.full_like(gp.eta, gp.lambda_l0)
    return loss, grads, rank_loss


@dataclass
class TrainedModel:
    params: GraftParams
    gates: GateParams
    scaler: ScalerParams
    config: TrainConfig
    epochs_run: int = 0
    best_epoch: int = 0
    best_val_loss: float = float("nan")
    initial_val_loss: float = float("nan")
    history: list[float] = field(default_factory=list)

    def inference_gates(self) -> np.ndarray:
        return deterministic_gates(self.gates)


def predict_scores(model: TrainedModel, X_raw) -> np.ndarray:
    """Scores for raw (unscaled) features: stored scaler, deterministic gates, no dropout."""
    Z = model.scaler.apply(X_raw)
    s, _ = forward(model.params, Z, model.inference_gates())
    return s


def _val_loss(params, gp, X, targets, cfg) -> float:
    s, _ = forward(params, X, deterministic_gates(gp))
    return mean_spearman_loss(s, targets, cfg.softrank)[0]


def train(train_ds: SurvivalDataset, cfg: TrainConfig) -> TrainedModel:
    """Fit on ``train_ds`` with a stratified internal holdout for early stopping.

    The scaler is fitted here, so raw features can be passed in. Returns the
    parameters from the epoch with the lowest validation ranking loss.
    """
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(7)]
    rng_split, rng_init, rng_shuffle, rng_gate, rng_impute, rng_drop, rng_val = streams

    scaler = fit_scaler(train_ds.features)
    ds = train_ds.with_features(scaler.apply(train_ds.features))
    fit_idx, val_idx = stratified_holdout(ds.events, cfg.val_frac, rng_split)
    if len(val_idx) < 3:
        raise ConfigurationError("validation holdout has fewer than 3 subjects")
    fit = ds.subset(fit_idx)
    fit_table = build_table(fit, cfg.k_events)
    val_table = build_table(ds, cfg.k_events)
    X_val = ds.features[val_idx]
    y_val = draw_targets(val_table, val_idx, rng_val, 1)

    params = init_params(ds.p, cfg.d_h, rng_init, float(np.log(fit.times).mean()), cfg.dropout, cfg.arch)
    gp = GateParams.init(ds.p, cfg.gate_kind, cfg.sigma, cfg.lambda_l0)
    adam = AdamState()
    baseline = None

    n_batches = max(1, int(round(fit.n / cfg.batch_size)))
    best_loss = initial = _val_loss(params, gp, X_val, y_val, cfg)
    best = (params.copy(), gp.copy(), 0)
    history = [initial]
    wait = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        for batch in np.array_split(rng_shuffle.permutation(fit.n), n_batches):
            if len(batch) < 3:
                continue
            targets = draw_targets(fit_table, batch, rng_impute, cfg.mc_samples)
            noise = mask = drop = None
            if gp.variant == "stg":
                _, noise = sample_gates(gp, rng_gate)
            elif gp.variant == "reinforce":
                mask = sample_mask(gp, rng_gate)
            if params.arch_variant == "full" and cfg.dropout > 0:
                drop = rng_drop.random((len(batch), params.d_h)) >= cfg.dropout
            try:
                _, grads, rank_loss = total_loss(params, gp, fit.features[batch], targets, cfg,
                                                 gate_noise=noise, mask=mask, dropout_mask=drop)
            except NumericError:
                log.debug("skipping batch with degenerate targets")
                continue

            arrays = params.arrays()
            if gp.variant == "reinforce":
                if baseline is None:
                    baseline = -rank_loss
                ascent = reinforce_step(gp.eta, mask, -rank_loss, baseline, cfg.entropy_coef)
                grads["eta"] = grads["eta"] - ascent
                baseline = ema_baseline(baseline, -rank_loss, cfg.baseline_decay)
            if gp.variant != "none":
                arrays["eta"] = gp.eta
            adam_step(adam, arrays, grads, cfg.lr)
            if gp.variant == "reinforce":
                np.clip(gp.eta, PROB_CLIP, 1 - PROB_CLIP, out=gp.eta)

        loss = _val_loss(params, gp, X_val, y_val, cfg)
        history.append(loss)
        if loss < best_loss:
            best_loss, wait = loss, 0
            best = (params.copy(), gp.copy(), epoch)
        else:
            wait += 1
            if wait >= cfg.patience:
                break

    log.debug("stopped after %d epochs, best epoch %d (val loss %.4f)", epoch, best[2], best_loss)
    return TrainedModel(best[0], best[1], scaler, cfg, epoch, best[2], best_loss, initial, history)


def gate_summary(model: TrainedModel, feature_names) -> list[tuple[str, float, float]]:
    """(feature name, raw gate parameter, inference gate) for every input feature."""
    g = model.inference_gates()
    return [(name, float(model.gates.eta[j]), float(g[j])) for j, name in enumerate(feature_names)]


"""Gated residual AFT scorer with hand-written reverse-mode gradients.

    x~  = g * x
    h   = tanh(W1 x~ + b1)            (inverted dropout on h while training)
    phi = x~ + W2 h + b2
    s   = beta . phi + mu
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from graft.errors import ValidationError

ARCH_VARIANTS = ("full", "no_mlp")


@dataclass
class GraftParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    beta: np.ndarray
    mu: np.ndarray  # shape (1,)
    dropout_rate: float = 0.2
    arch_variant: str = "full"

    @property
    def d_h(self) -> int:
        return self.W1.shape[0]

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name (the MLP is absent for the ``no_mlp`` variant)."""
        names = ("beta", "mu") if self.arch_variant == "no_mlp" else ("W1", "b1", "W2", "b2", "beta", "mu")
        return {k: getattr(self, k) for k in names}

    def copy(self) -> GraftParams:
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        return GraftParams(**{k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in kw.items()})


def init_params(p: int, d_h: int = 32, rng=None, mu0: float = 0.0,
                dropout_rate: float = 0.2, arch_variant: str = "full") -> GraftParams:
    if arch_variant not in ARCH_VARIANTS:
        raise ValidationError(f"unknown architecture variant {arch_variant!r}")
    if arch_variant == "no_mlp":
        d_h = 0
    rng = np.random.default_rng(0) if rng is None else rng
    a1 = 1.0 / np.sqrt(p)
    a2 = 1.0 / np.sqrt(d_h) if d_h else 0.0
    return GraftParams(
        W1=rng.uniform(-a1, a1, (d_h, p)),
        b1=np.zeros(d_h),
        W2=rng.uniform(-a2, a2, (p, d_h)),
        b2=np.zeros(p),
        beta=np.zeros(p),
        mu=np.array([mu0], dtype=np.float64),
        dropout_rate=dropout_rate,
        arch_variant=arch_variant,
    )


@dataclass
class ForwardCache:
    X: np.ndarray
    g: np.ndarray
    xt: np.ndarray
    h: np.ndarray | None
    drop_scale: np.ndarray | None
    phi: np.ndarray
    params: GraftParams


def forward(params: GraftParams, X, g, dropout_mask=None) -> tuple[np.ndarray, ForwardCache]:
    """Scores for the rows of ``X`` under gate vector ``g``.

    ``dropout_mask`` (keep flags, broadcastable to (m, d_h)) switches on
    training-mode dropout; ``None`` means inference.
    """
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.p or g.shape != (params.p,):
        raise ValidationError(f"shape mismatch: X {X.shape}, g {g.shape}, model expects p={params.p}")
    xt = X * g
    h = drop_scale = None
    if params.arch_variant == "no_mlp":
        phi = xt
    else:
        h = np.tanh(xt @ params.W1.T + params.b1)
        hd = h
        if dropout_mask is not None:
            drop_scale = np.asarray(dropout_mask, dtype=np.float64) / (1.0 - params.dropout_rate)
            hd = h * drop_scale
        phi = xt + hd @ params.W2.T + params.b2
    s = phi @ params.beta + params.mu[0]
    return s, ForwardCache(X, g, xt, h, drop_scale, phi, params)


def backward(cache: ForwardCache, dL_ds) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients for every array in ``params.arrays()`` and for the shared gate vector."""
    P = cache.params
    dL_ds = np.asarray(dL_ds, dtype=np.float64)
    grads = {"beta": cache.phi.T @ dL_ds, "mu": np.array([dL_ds.sum()])}
    dphi = np.outer(dL_ds, P.beta)
    dxt = dphi
    if P.arch_variant != "no_mlp":
        hd = cache.h if cache.drop_scale is None else cache.h * cache.drop_scale
        grads["W2"] = dphi.T @ hd
        grads["b2"] = dphi.sum(axis=0)
        dh = dphi @ P.W2
        if cache.drop_scale is not None:
            dh = dh * cache.drop_scale
        da = dh * (1.0 - cache.h ** 2)
        grads["W1"] = da.T @ cache.xt
        grads["b1"] = da.sum(axis=0)
        dxt = dphi + da @ P.W1
    dL_dg = (dxt * cache.X).sum(axis=0)
    return grads, dL_dg

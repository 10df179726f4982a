"""Population-level feature gates.

``GateParams.eta`` holds the per-feature gate parameter; its meaning depends on
the variant:

* ``stg``: Gaussian-relaxed gate means, g = clamp(eta + N(0, sigma^2), 0, 1)
* ``sigmoid``: logits, g = sigmoid(eta) (deterministic)
* ``reinforce``: Bernoulli keep-probabilities, trained by policy gradient
* ``none``: ignored, gates are identically 1
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from graft.errors import ConfigurationError

GATE_VARIANTS = ("stg", "sigmoid", "reinforce", "none")
PROB_CLIP = 1e-3


@dataclass
class GateParams:
    eta: np.ndarray
    sigma: float = 0.5
    variant: str = "stg"
    lambda_l0: float = 0.01

    def __post_init__(self):
        if self.variant not in GATE_VARIANTS:
            raise ConfigurationError(f"unknown gate variant {self.variant!r}")
        if not self.sigma > 0:
            raise ConfigurationError("gate sigma must be positive")
        self.eta = np.asarray(self.eta, dtype=np.float64)

    @classmethod
    def init(cls, p: int, variant: str = "stg", sigma: float = 0.5, lambda_l0: float = 0.01) -> GateParams:
        # every variant starts half-open
        start = {"stg": 0.5, "sigmoid": 0.0, "reinforce": 0.5, "none": 1.0}[variant]
        return cls(np.full(p, start), sigma, variant, lambda_l0)

    def copy(self) -> GateParams:
        return GateParams(self.eta.copy(), self.sigma, self.variant, self.lambda_l0)


def sample_gates(gp: GateParams, rng) -> tuple[np.ndarray, np.ndarray]:
    """One STG gate vector for a whole minibatch, plus the noise used."""
    if gp.variant != "stg":
        raise ConfigurationError("sample_gates applies to the stg variant")
    eps = rng.normal(0.0, gp.sigma, size=gp.eta.shape)
    return np.clip(gp.eta + eps, 0.0, 1.0), eps


def sample_mask(gp: GateParams, rng) -> np.ndarray:
    """Bernoulli(eta) feature mask for the REINFORCE variant."""
    return (rng.random(gp.eta.shape) < gp.eta).astype(np.float64)


def deterministic_gates(gp: GateParams) -> np.ndarray:
    if gp.variant == "stg":
        return np.clip(gp.eta, 0.0, 1.0)
    if gp.variant == "sigmoid":
        return expit(gp.eta)
    if gp.variant == "reinforce":
        return (gp.eta >= 0.5).astype(np.float64)
    return np.ones_like(gp.eta)


def l0_penalty(gp: GateParams) -> tuple[float, np.ndarray]:
    """Expected number of open gates, lambda * sum Phi(eta / sigma), and its gradient."""
    z = gp.eta / gp.sigma
    value = gp.lambda_l0 * float(ndtr(z).sum())
    grad = gp.lambda_l0 * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi) / gp.sigma
    return value, grad


def sigmoid_penalty(gp: GateParams) -> tuple[float, np.ndarray]:
    """Sparsity term for sigmoid gates: lambda * sum g_j."""
    g = expit(gp.eta)
    return gp.lambda_l0 * float(g.sum()), gp.lambda_l0 * g * (1 - g)


def gate_backward(gp: GateParams, eps, dL_dg) -> np.ndarray:
    """Reparameterised gradient through the clamp (zero at and beyond the bounds)."""
    z = gp.eta + eps
    return np.asarray(dL_dg) * ((z > 0) & (z < 1))


def reinforce_step(probs, sampled_mask, reward: float, baseline: float, entropy_coef: float = 0.01) -> np.ndarray:
    """Ascent direction for E[reward] + entropy_coef * H(probs).

    Score term: (reward - baseline) * d log Bernoulli(mask; p) / dp.
    """
    p = np.asarray(probs, dtype=np.float64)
    m = np.asarray(sampled_mask, dtype=np.float64)
    score = m / p - (1 - m) / (1 - p)
    entropy_grad = np.log1p(-p) - np.log(p)
    return (reward - baseline) * score + entropy_coef * entropy_grad


def ema_baseline(baseline: float | None, reward: float, decay: float = 0.9) -> float:
    if baseline is None:
        return reward
    return decay * baseline + (1 - decay) * reward

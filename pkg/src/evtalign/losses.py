"""Contrastive and consistency losses with their weighted total.

The pairwise term is the one-directional in-batch contrastive loss: rows
of the first matrix are anchors, the denominator runs over the positive
pair plus the anchor's similarities to all other rows of the second
matrix, averaged over the batch. A flag adds the symmetrized (two-anchor)
variant. Temperature is a single learnable log-scale parameter shared by
all pairwise terms.

The total objective combines event-image, event-text, and text-text
contrastive terms with a branch-consistency mean-squared error between the
learnable- and hand-crafted-prompt text embeddings (computed on the
pre-normalization branch vectors, averaged over the two modalities):

    total = alpha * l_ie + beta * l_et + theta * l_tt + gamma * l_mse

When no image input is available the weights collapse to (0, 1, 0, 0) and
only the event-text term is computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError

TEMPERATURE_MIN = 1e-3
TEMPERATURE_MAX = 100.0


class Temperature(nn.Module):
    """Learnable temperature stored as a log-scale parameter."""

    def __init__(self, init: float = 0.07):
        super().__init__()
        if init <= 0:
            raise ConfigError(f"temperature must be positive, got {init}")
        self.log_tau = nn.Parameter(torch.tensor(math.log(init), dtype=torch.float64))

    @property
    def value(self) -> torch.Tensor:
        return self.log_tau.exp().clamp(TEMPERATURE_MIN, TEMPERATURE_MAX)


@dataclass(frozen=True)
class LossWeights:
    """Trade-off weights (alpha, beta, theta, gamma); all non-negative."""

    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "theta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss weight {name} must be non-negative")

    @classmethod
    def image_absent(cls) -> "LossWeights":
        return cls(0.0, 1.0, 0.0, 0.0)


@dataclass
class LossReport:
    """The four objective terms and their weighted total."""

    l_ie: torch.Tensor
    l_et: torch.Tensor
    l_tt: torch.Tensor
    l_mse: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {
            "l_ie": float(self.l_ie.detach()), "l_et": float(self.l_et.detach()),
            "l_tt": float(self.l_tt.detach()), "l_mse": float(self.l_mse.detach()),
            "total": float(self.total.detach()),
        }


def contrastive_loss(m1, m2, tau, symmetric: bool = False):
    """In-batch contrastive loss with rows of ``m1`` as anchors.

    Per anchor n the loss is -log of the softmax probability of the
    positive similarity m1_n . m2_n against m1_n . m2_m for all m != n,
    scaled by 1/tau; the result is the batch mean. ``symmetric`` averages
    both anchor directions.
    """
    if m1.ndim != 2 or m2.ndim != 2 or m1.shape != m2.shape:
        raise ConfigError(
            f"embedding batches must share shape (N, D), got {tuple(m1.shape)} "
            f"and {tuple(m2.shape)}")
    if m1.shape[0] < 1:
        raise ConfigError("batch must contain at least one pair")
    tau_value = float(tau.detach()) if isinstance(tau, torch.Tensor) else float(tau)
    if tau_value <= 0:
        raise ConfigError(f"temperature must be positive, got {tau_value}")

    logits = (m1 @ m2.T) / tau
    loss = (torch.logsumexp(logits, dim=1) - logits.diagonal()).mean()
    if symmetric:
        logits_t = (m2 @ m1.T) / tau
        reverse = (torch.logsumexp(logits_t, dim=1) - logits_t.diagonal()).mean()
        loss = (loss + reverse) / 2.0
    return loss


def mse_consistency(f_l, f_h):
    """Mean squared elementwise difference between two branch embeddings."""
    if f_l.shape != f_h.shape:
        raise ConfigError(
            f"branch embeddings must share shape, got {tuple(f_l.shape)} "
            f"and {tuple(f_h.shape)}")
    return (f_l - f_h).square().mean()


def total_loss(f_e, f_te, text_e, weights: LossWeights, tau,
               f_i=None, f_ti=None, text_i=None, symmetric: bool = False) -> LossReport:
    """Combine the objective terms for one batch.

    ``text_e``/``text_i`` are TextEmbedding results carrying the
    pre-normalization branch vectors for the consistency term. Image-side
    inputs may be None only in image-absent mode (weights (0, 1, 0, 0)),
    where only the event-text term participates.
    """
    image_absent = f_i is None or f_ti is None
    if image_absent and (weights.alpha, weights.theta, weights.gamma) != (0.0, 0.0, 0.0):
        raise ConfigError(
            "image inputs are required unless weights are the image-absent "
            "configuration (0, 1, 0, 0)")

    zero = torch.zeros((), dtype=f_e.dtype, device=f_e.device)
    l_et = contrastive_loss(f_e, f_te, tau, symmetric)
    if image_absent:
        l_ie = l_tt = l_mse = zero
    else:
        l_ie = contrastive_loss(f_i, f_e, tau, symmetric)
        l_tt = contrastive_loss(f_ti, f_te, tau, symmetric)
        l_mse = (
            mse_consistency(text_e.learnable, text_e.handcrafted)
            + mse_consistency(text_i.learnable, text_i.handcrafted)
        ) / 2.0
    total = (weights.alpha * l_ie + weights.beta * l_et
             + weights.theta * l_tt + weights.gamma * l_mse)
    return LossReport(l_ie=l_ie, l_et=l_et, l_tt=l_tt, l_mse=l_mse, total=total)

"""Embedding-space causal regularizers.

Distances are cosine distances between projected embeddings of a factual
scene and its counterfactuals. The contrastive objective pulls causal
pairs apart from non-causal ones; the ranking objective orders distances
by ground-truth effect magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroNormEmbedding

ZERO_NORM_THRESHOLD = 1e-12


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.1      # contrastive temperature
    margin: float = 0.001  # ranking margin m
    alpha: float = 1000.0  # causal loss weight

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


def embedding_distance(p_factual: np.ndarray,
                       p_counterfactual: np.ndarray) -> float:
    """Cosine distance, in [0, 2]."""
    na = float(np.sqrt(np.dot(p_factual, p_factual)))
    nb = float(np.sqrt(np.dot(p_counterfactual, p_counterfactual)))
    if na <= ZERO_NORM_THRESHOLD or nb <= ZERO_NORM_THRESHOLD:
        raise ZeroNormEmbedding("embedding norm below 1e-12")
    return 1.0 - float(np.dot(p_factual, p_counterfactual)) / (na * nb)


def embedding_distance_grad(p_factual: np.ndarray,
                            p_counterfactual: np.ndarray,
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of embedding_distance with respect to both embeddings."""
    a, b = p_factual, p_counterfactual
    na = float(np.sqrt(np.dot(a, a)))
    nb = float(np.sqrt(np.dot(b, b)))
    if na <= ZERO_NORM_THRESHOLD or nb <= ZERO_NORM_THRESHOLD:
        raise ZeroNormEmbedding("embedding norm below 1e-12")
    dot = float(np.dot(a, b))
    grad_a = -(b / (na * nb) - dot * a / (na ** 3 * nb))
    grad_b = -(a / (na * nb) - dot * b / (na * nb ** 3))
    return grad_a, grad_b


def contrastive_loss(d_positive: float, d_negatives: list[float],
                     tau: float) -> float:
    """-log softmax of the positive logit among positive + negatives,
    with logits d/tau, computed with max-subtraction."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not d_negatives:
        return 0.0
    logits = np.array([d_positive] + list(d_negatives)) / tau
    m = float(np.max(logits))
    lse = m + math.log(float(np.sum(np.exp(logits - m))))
    return lse - logits[0]


def contrastive_loss_grad(d_positive: float, d_negatives: list[float],
                          tau: float) -> tuple[float, np.ndarray]:
    """Gradients of contrastive_loss w.r.t. d_positive and each negative."""
    if not d_negatives:
        return 0.0, np.zeros(0)
    logits = np.array([d_positive] + list(d_negatives)) / tau
    m = float(np.max(logits))
    e = np.exp(logits - m)
    soft = e / e.sum()
    return float((soft[0] - 1.0) / tau), soft[1:] / tau


def ranking_loss(d_i: float, d_j: float, m: float) -> float:
    """Hinge on the ordered pair: caller guarantees effect_i < effect_j."""
    return max(0.0, d_i - d_j + m)


def ranking_loss_grad(d_i: float, d_j: float, m: float) -> tuple[float, float]:
    if d_i - d_j + m > 0.0:
        return 1.0, -1.0
    return 0.0, 0.0


def combined_loss(task_loss: float, causal_loss: float, alpha: float) -> float:
    return task_loss + alpha * causal_loss

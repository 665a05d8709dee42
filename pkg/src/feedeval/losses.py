"""Reference implementations of the evaluator training objectives.

These are pure, dependency-free functions used to verify the emitted
datasets' intended use: a margin ranking loss over chosen/rejected reward
scores, and the mean negative log-likelihood of the true entailment label.
Nothing here backpropagates; trainers live elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import DomainError

__all__ = [
    "NliLabel",
    "RankingBatch",
    "NliBatch",
    "ranking_loss",
    "ranking_loss_grad",
    "nli_nll",
    "log_sigmoid",
    "sigmoid",
]

DEFAULT_MARGIN = 0.5


class NliLabel(str, Enum):
    ENTAILMENT = "entailment"
    CONTRADICTION = "contradiction"


def _softplus(x: float) -> float:
    # Stable at large |x|: softplus(x) = max(x, 0) + log1p(exp(-|x|)).
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def log_sigmoid(x: float) -> float:
    """log(sigmoid(x)) computed as -softplus(-x) for numerical stability."""
    return -_softplus(-x)


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class RankingBatch:
    """Chosen/rejected scalar scores with a separation margin."""

    r_plus: Sequence[float]
    r_minus: Sequence[float]
    margin: float = DEFAULT_MARGIN

    def __post_init__(self) -> None:
        if len(self.r_plus) != len(self.r_minus):
            raise DomainError(
                f"score lists differ in length: {len(self.r_plus)} vs {len(self.r_minus)}"
            )
        if len(self.r_plus) < 1:
            raise DomainError("batch must contain at least one pair")
        if self.margin < 0:
            raise DomainError(f"margin must be >= 0, got {self.margin}")
        for v in (*self.r_plus, *self.r_minus):
            if math.isnan(v):
                raise DomainError("NaN score in ranking batch")

    def diffs(self) -> list[float]:
        return [p - m - self.margin for p, m in zip(self.r_plus, self.r_minus)]


def ranking_loss(batch: RankingBatch) -> float:
    """Mean -log sigmoid(r_plus - r_minus - margin) over the batch.

    Always positive, strictly decreasing in each chosen-minus-rejected gap,
    and exactly ln 2 when every gap equals the margin.
    """
    n = len(batch.r_plus)
    return -math.fsum(log_sigmoid(d) for d in batch.diffs()) / n


def ranking_loss_grad(batch: RankingBatch) -> tuple[list[float], list[float]]:
    """Analytic gradients of ``ranking_loss`` w.r.t. each chosen and rejected score.

    dL/dr_plus_i = -(1/N)(1 - sigmoid(d_i)) and dL/dr_minus_i is its negation,
    with d_i = r_plus_i - r_minus_i - margin.
    """
    n = len(batch.r_plus)
    grad_plus = []
    grad_minus = []
    for d in batch.diffs():
        g = (1.0 - sigmoid(d)) / n
        grad_plus.append(-g)
        grad_minus.append(g)
    return grad_plus, grad_minus


@dataclass(frozen=True)
class NliBatch:
    """Per-example probability assigned to the true entailment/contradiction label."""

    p_true: Sequence[float]
    labels: Sequence[NliLabel]

    def __post_init__(self) -> None:
        if len(self.p_true) != len(self.labels):
            raise DomainError(
                f"probability/label lists differ in length: "
                f"{len(self.p_true)} vs {len(self.labels)}"
            )
        if len(self.p_true) < 1:
            raise DomainError("batch must contain at least one example")
        for p in self.p_true:
            if math.isnan(p) or not 0.0 < p <= 1.0:
                raise DomainError(f"probability must lie in (0, 1], got {p}")


def nli_nll(batch: NliBatch) -> float:
    """Mean negative log-probability of the true label."""
    n = len(batch.p_true)
    return -math.fsum(math.log(p) for p in batch.p_true) / n

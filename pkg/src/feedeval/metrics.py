"""Agreement and alignment statistics.

Quadratic weighted kappa for ordinal score series, pairwise alignment
accuracy/F1 for preference judgments, and the classic inter-rater statistics
(Cohen's kappa, Fleiss' kappa, ICC(2,1)). All functions are pure; each has a
brute-force oracle in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, UndefinedAgreementError

__all__ = [
    "Winner",
    "PairwiseJudgment",
    "AlignmentScores",
    "qwk",
    "pairwise_alignment",
    "cohen_kappa",
    "fleiss_kappa",
    "icc",
    "format_qwk_report",
]


class Winner(str, Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class PairwiseJudgment:
    """One item's gold and predicted preference between candidates A and B."""

    item_id: str
    gold_winner: Winner
    predicted_winner: Winner
    dimension: str = ""


@dataclass(frozen=True)
class AlignmentScores:
    accuracy: float
    f1: float
    f1_macro: float


def qwk(
    human: Sequence[int],
    machine: Sequence[int],
    lo: int,
    hi: int,
) -> float:
    """Quadratic weighted kappa over the declared score range [lo, hi].

    kappa = 1 - sum(w * O) / sum(w * E) with w[i][j] = (i - j)^2 / (K - 1)^2,
    O the joint histogram of the two series, and E the outer product of the
    marginals normalized to the series length. The declared range, not the
    observed min/max, fixes K so unobserved levels still shape the weights.
    """
    if len(human) != len(machine):
        raise DomainError(f"series differ in length: {len(human)} vs {len(machine)}")
    n = len(human)
    if n < 2:
        raise DomainError("need at least two ratings")
    if hi <= lo:
        raise DomainError(f"degenerate range [{lo}, {hi}]")
    k = hi - lo + 1
    for v in (*human, *machine):
        if not lo <= v <= hi:
            raise DomainError(f"rating {v} outside declared range [{lo}, {hi}]")
    if len(set(human) | set(machine)) < 2:
        raise UndefinedAgreementError("all ratings identical: kappa undefined")

    observed = np.zeros((k, k))
    for h, m in zip(human, machine):
        observed[h - lo, m - lo] += 1
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n

    idx = np.arange(k)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2

    denominator = float((weights * expected).sum())
    if denominator == 0.0:
        raise UndefinedAgreementError("expected weighted disagreement is zero")
    return 1.0 - float((weights * observed).sum()) / denominator


def _binary_f1(golds: list[bool], preds: list[bool]) -> float:
    tp = sum(1 for g, p in zip(golds, preds) if g and p)
    fp = sum(1 for g, p in zip(golds, preds) if not g and p)
    fn = sum(1 for g, p in zip(golds, preds) if g and not p)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def pairwise_alignment(judgments: Sequence[PairwiseJudgment]) -> AlignmentScores:
    """Accuracy and F1 of predicted winners against gold winners.

    F1 is binary with positive class "A preferred" (A = the first-listed
    candidate); ``f1_macro`` averages the per-class F1 scores since the
    positive-class choice is a convention.
    """
    if not judgments:
        raise DomainError("no judgments supplied")
    golds_a = [j.gold_winner is Winner.A for j in judgments]
    preds_a = [j.predicted_winner is Winner.A for j in judgments]
    accuracy = sum(1 for g, p in zip(golds_a, preds_a) if g == p) / len(judgments)
    f1_a = _binary_f1(golds_a, preds_a)
    f1_b = _binary_f1([not g for g in golds_a], [not p for p in preds_a])
    return AlignmentScores(accuracy=accuracy, f1=f1_a, f1_macro=(f1_a + f1_b) / 2)


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Unweighted Cohen's kappa between two equally long label sequences."""
    if len(a) != len(b):
        raise DomainError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise DomainError("empty label sequences")
    labels = sorted(set(a) | set(b), key=repr)
    index = {lab: i for i, lab in enumerate(labels)}
    table = np.zeros((len(labels), len(labels)))
    for x, y in zip(a, b):
        table[index[x], index[y]] += 1
    p_observed = float(np.trace(table)) / n
    p_expected = float(np.dot(table.sum(axis=1), table.sum(axis=0))) / n**2
    if p_expected == 1.0:
        raise UndefinedAgreementError("expected agreement is 1: kappa undefined")
    return (p_observed - p_expected) / (1.0 - p_expected)


def fleiss_kappa(counts: Sequence[Sequence[int]], raters_per_item: int) -> float:
    """Fleiss' kappa from an items x categories count matrix.

    Every row must sum to ``raters_per_item``. Undefined when a single
    category absorbs all ratings (expected agreement 1).
    """
    if raters_per_item < 2:
        raise DomainError(f"need at least 2 raters, got {raters_per_item}")
    matrix = np.asarray(counts, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise DomainError("counts must be a non-empty items x categories matrix")
    row_sums = matrix.sum(axis=1)
    if not np.all(row_sums == raters_per_item):
        bad = int(np.argmax(row_sums != raters_per_item))
        raise DomainError(
            f"row {bad} sums to {int(row_sums[bad])}, expected {raters_per_item}"
        )
    n_items = matrix.shape[0]
    n = raters_per_item
    p_i = ((matrix**2).sum(axis=1) - n) / (n * (n - 1))
    p_bar = float(p_i.mean())
    category_props = matrix.sum(axis=0) / (n_items * n)
    p_e = float((category_props**2).sum())
    if p_e == 1.0:
        raise UndefinedAgreementError("expected agreement is 1: kappa undefined")
    return (p_bar - p_e) / (1.0 - p_e)


def icc(matrix: Sequence[Sequence[float]]) -> float:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    ``matrix`` is complete, items x raters. Computed from the standard
    mean-squares decomposition:

        ICC = (MSR - MSE) / (MSR + (k-1) MSE + (k/n)(MSC - MSE))
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2:
        raise DomainError("matrix must be 2-dimensional")
    n, k = data.shape
    if n < 2 or k < 2:
        raise DomainError(f"need >= 2 items and >= 2 raters, got {n} x {k}")
    if not np.isfinite(data).all():
        raise DomainError("matrix contains non-finite values")

    grand = data.mean()
    row_means = data.mean(axis=1)
    col_means = data.mean(axis=0)
    ss_rows = k * float(((row_means - grand) ** 2).sum())
    ss_cols = n * float(((col_means - grand) ** 2).sum())
    ss_total = float(((data - grand) ** 2).sum())
    ss_error = ss_total - ss_rows - ss_cols

    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_error / ((n - 1) * (k - 1))

    denominator = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if denominator == 0.0:
        raise UndefinedAgreementError("zero variance everywhere: ICC undefined")
    return (msr - mse) / denominator


def format_qwk_report(
    scores: Mapping[tuple[int, str], Sequence[float]],
) -> str:
    """Render per-(prompt, trait) QWK values as a text table with mean and SD.

    ``scores`` maps (prompt_id, trait label) to the per-fold kappa values.
    Traits become columns, prompts rows; the final row and column aggregate.
    """
    prompts = sorted({p for p, _ in scores})
    traits = sorted({t for _, t in scores})
    width = max(12, max((len(t) for t in traits), default=12) + 2)

    def cell(values: Sequence[float]) -> str:
        if not values:
            return "-"
        mean = sum(values) / len(values)
        if len(values) == 1:
            return f"{mean:.3f}"
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
        return f"{mean:.3f} (±{sd:.3f})"

    lines = ["prompt".ljust(8) + "".join(t.ljust(width) for t in traits) + "avg"]
    for p in prompts:
        row = [str(p).ljust(8)]
        collected: list[float] = []
        for t in traits:
            values = list(scores.get((p, t), ()))
            collected.extend(values)
            row.append(cell(values).ljust(width))
        row.append(cell(collected))
        lines.append("".join(row))
    per_trait = ["avg".ljust(8)]
    everything: list[float] = []
    for t in traits:
        values = [v for (p, tt), vs in scores.items() if tt == t for v in vs]
        everything.extend(values)
        per_trait.append(cell(values).ljust(width))
    per_trait.append(cell(everything))
    lines.append("".join(per_trait))
    return "\n".join(lines)

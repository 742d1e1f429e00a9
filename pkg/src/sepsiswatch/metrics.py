"""Window-level evaluation: AUC, operating point at fixed sensitivity, the
DeLong test for correlated AUCs, and horizon sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

SENSITIVITY_TARGET = 0.85


class MetricError(ValueError):
    pass


@dataclass
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray  # bool
    groups: list | None = None  # patient ids, for bookkeeping

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.scores.shape != self.labels.shape:
            raise MetricError("scores and labels must align")


@dataclass
class EvalReport:
    model_kind: str
    horizon: int
    auc: float
    specificity_at_085_sens: float
    accuracy_at_085_sens: float
    threshold: float


def auc(scored: ScoredSet) -> float:
    """Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie)."""
    pos = scored.scores[scored.labels]
    neg = scored.scores[~scored.labels]
    if len(pos) == 0 or len(neg) == 0:
        raise MetricError("AUC needs at least one positive and one negative")
    # rank-based computation, ties averaged
    combined = np.concatenate([pos, neg])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(len(combined))
    ranks[order] = np.arange(1, len(combined) + 1)
    # average ranks over tie groups
    sorted_vals = combined[order]
    i = 0
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    r_pos = ranks[: len(pos)].sum()
    return float((r_pos - len(pos) * (len(pos) + 1) / 2.0) / (len(pos) * len(neg)))


def operating_point(scored: ScoredSet, sensitivity: float = SENSITIVITY_TARGET):
    """Largest threshold achieving the target sensitivity (ties score >= t).

    Returns (threshold, specificity, accuracy).
    """
    pos = scored.scores[scored.labels]
    neg = scored.scores[~scored.labels]
    if len(pos) == 0:
        raise MetricError("operating point needs at least one positive")
    candidates = np.unique(scored.scores)[::-1]
    threshold = None
    for t in candidates:
        if (pos >= t).mean() >= sensitivity:
            threshold = float(t)
            break
    if threshold is None:  # sensitivity=0 edge; lowest score always qualifies
        threshold = float(candidates[-1])
    tp = int((pos >= threshold).sum())
    tn = int((neg < threshold).sum())
    specificity = tn / len(neg) if len(neg) else 0.0
    accuracy = (tp + tn) / len(scored.scores)
    return threshold, float(specificity), float(accuracy)


def _midrank(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _delong_components(scores: np.ndarray, labels: np.ndarray):
    """Structural components of the AUC via midranks (O(N log N))."""
    pos = scores[labels]
    neg = scores[~labels]
    m, n = len(pos), len(neg)
    tx = _midrank(pos)
    ty = _midrank(neg)
    tz = _midrank(np.concatenate([pos, neg]))
    v10 = (tz[:m] - tx) / n
    v01 = 1.0 - (tz[m:] - ty) / m
    theta = float(v10.mean())
    return theta, v10, v01


def delong(scored_a: ScoredSet, scored_b: ScoredSet):
    """Two-sided DeLong comparison of two correlated AUCs.

    Returns (auc_a, auc_b, p_value, degenerate). Labels must be identical;
    a zero variance estimate is flagged degenerate with p = 1.
    """
    if not np.array_equal(scored_a.labels, scored_b.labels):
        raise MetricError("DeLong requires shared labels")
    labels = scored_a.labels
    th_a, v10_a, v01_a = _delong_components(scored_a.scores, labels)
    th_b, v10_b, v01_b = _delong_components(scored_b.scores, labels)
    m, n = len(v10_a), len(v01_a)
    s10 = np.cov(np.stack([v10_a, v10_b]), ddof=1) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(np.stack([v01_a, v01_b]), ddof=1) if n > 1 else np.zeros((2, 2))
    s = s10 / m + s01 / n
    var = s[0, 0] + s[1, 1] - 2 * s[0, 1]
    if var <= 0:
        return th_a, th_b, 1.0, True
    z = (th_a - th_b) / np.sqrt(var)
    p = 2.0 * float(norm.sf(abs(z)))
    return th_a, th_b, min(p, 1.0), False


def horizon_sweep(scored_by_model_horizon: dict) -> list[EvalReport]:
    """Build one EvalReport per (model kind, horizon).

    Input maps (model_kind, horizon) -> ScoredSet.
    """
    reports = []
    for (kind, horizon), scored in sorted(scored_by_model_horizon.items()):
        a = auc(scored)
        threshold, spec, acc = operating_point(scored)
        reports.append(EvalReport(kind, horizon, a, spec, acc, threshold))
    return reports


def format_report_table(reports: list[EvalReport]) -> str:
    lines = ["model\thorizon\tauc\tspecificity@0.85sens\taccuracy@0.85sens\tthreshold"]
    for r in reports:
        lines.append(
            f"{r.model_kind}\t{r.horizon}\t{r.auc:.4f}\t{r.specificity_at_085_sens:.4f}"
            f"\t{r.accuracy_at_085_sens:.4f}\t{r.threshold:.6f}"
        )
    return "\n".join(lines)

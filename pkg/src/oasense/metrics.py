"""Policy evaluation: reward per person, confusion-based scores, costs.

Ground truth for the per-year confusion matrices follows directly from the
reward scenarios: a year counts as positive when an uncaptured progression
event exists at or before it (timely/late visits and false dismissals),
negative otherwise (early visits and true dismissals).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .reward import FOLLOW_UP, ScenarioClass

logger = logging.getLogger(__name__)

_POSITIVE_SCENARIOS = frozenset({
    ScenarioClass.TIMELY_VISIT, ScenarioClass.LATE_VISIT, ScenarioClass.FALSE_DISMISSAL,
})


def rpp(traces) -> float:
    """Reward per person: mean over subjects of the summed episode rewards."""
    if not traces:
        raise ValueError("rpp requires at least one trace")
    return float(np.mean([trace.total_reward for trace in traces]))


def acquisition_cost(traces, lam: float) -> float:
    """Mean per-person spend: visit cost times mean follow-up count."""
    if not traces:
        raise ValueError("acquisition_cost requires at least one trace")
    return lam * float(np.mean([trace.n_follow_ups for trace in traces]))


def confusion(traces) -> list[tuple[int, int, int, int]]:
    """Per decision year (TP, FP, TN, FN) quadruples.

    TP: follow-up on a pending event (timely or late); FP: early visit;
    TN: true dismissal; FN: false dismissal.
    """
    if not traces:
        raise ValueError("confusion requires at least one trace")
    horizon = len(traces[0].transitions)
    quads = []
    for t in range(horizon):
        tp = fp = tn = fn = 0
        for trace in traces:
            tr = trace.transitions[t]
            positive = tr.scenario in _POSITIVE_SCENARIOS
            if tr.action == FOLLOW_UP:
                if positive:
                    tp += 1
                else:
                    fp += 1
            else:
                if positive:
                    fn += 1
                else:
                    tn += 1
        quads.append((tp, fp, tn, fn))
    return quads


def recall(quad) -> float:
    """Sensitivity in percent; NaN when the year has no positives."""
    tp, _, _, fn = quad
    if tp + fn == 0:
        return math.nan
    return 100.0 * tp / (tp + fn)


def balanced_accuracy(quad) -> float:
    """Mean of sensitivity and specificity in percent.

    A year with only one class present falls back to the defined term alone.
    """
    tp, fp, tn, fn = quad
    pos, neg = tp + fn, tn + fp
    if pos == 0 and neg == 0:
        return math.nan
    if pos == 0:
        return 100.0 * tn / neg
    if neg == 0:
        return 100.0 * tp / pos
    return 50.0 * (tp / pos + tn / neg)


def raw_recall_over_cost(avg_recall: float, cost: float) -> float:
    """Recall fraction per unit acquisition cost; NaN for zero-cost policies."""
    if cost <= 0.0 or math.isnan(avg_recall):
        logger.warning("recall-over-cost undefined for zero acquisition cost")
        return math.nan
    return (avg_recall / 100.0) / cost


def normalized_recall_over_cost(raw_values) -> np.ndarray:
    """Min-max normalization of raw ratios across a sweep grid.

    NaN entries are excluded; a degenerate grid (one point, or all equal)
    normalizes to 1.
    """
    values = np.asarray(raw_values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return np.full_like(values, math.nan)
    lo, hi = finite.min(), finite.max()
    if hi == lo:
        return np.where(np.isfinite(values), 1.0, math.nan)
    return np.where(np.isfinite(values), (values - lo) / (hi - lo), math.nan)


def recall_over_cost(avg_recall: float, cost: float, grid_context) -> float:
    """Normalized recall-over-cost of one cell against its sweep grid.

    ``grid_context`` holds the raw ratios of every cell in the presented
    grid, this cell included.
    """
    raw = raw_recall_over_cost(avg_recall, cost)
    grid = list(grid_context)
    normalized = normalized_recall_over_cost(grid)
    matches = [normalized[i] for i, g in enumerate(grid)
               if g == raw or (math.isnan(g) and math.isnan(raw))]
    if not matches:
        raise ValueError("cell ratio missing from its grid context")
    return float(matches[0])


@dataclass(frozen=True)
class MetricReport:
    """Aggregate evaluation of one policy over one cohort."""

    rpp: float
    acquisition_cost: float
    ba_per_year: tuple[float, ...]
    recall_per_year: tuple[float, ...]
    avg_ba: float
    avg_recall: float
    recall_over_cost: float
    n_subjects: int
    confusion_per_year: tuple[tuple[int, int, int, int], ...]

    def to_json(self) -> str:
        doc = {
            "rpp": self.rpp,
            "acquisition_cost": self.acquisition_cost,
            "ba_per_year": list(self.ba_per_year),
            "recall_per_year": list(self.recall_per_year),
            "avg_ba": self.avg_ba,
            "avg_recall": self.avg_recall,
            "recall_over_cost": self.recall_over_cost,
            "n_subjects": self.n_subjects,
            "confusion_per_year": [list(q) for q in self.confusion_per_year],
        }
        return json.dumps(doc, sort_keys=True)

    def csv_row(self) -> list:
        return [self.rpp, self.acquisition_cost, self.avg_ba, self.avg_recall,
                self.recall_over_cost, self.n_subjects]


REPORT_CSV_FIELDS = ["rpp", "acquisition_cost", "avg_ba", "avg_recall",
                     "recall_over_cost", "n_subjects"]


def build_report(traces, lam: float) -> MetricReport:
    """Assemble per-year and aggregate metrics from episode traces."""
    quads = confusion(traces)
    ba = [balanced_accuracy(q) for q in quads]
    rec = [recall(q) for q in quads]
    avg_ba = float(np.nanmean(ba)) if not all(math.isnan(v) for v in ba) else math.nan
    avg_recall = float(np.nanmean(rec)) if not all(math.isnan(v) for v in rec) else math.nan
    cost = acquisition_cost(traces, lam)
    return MetricReport(
        rpp=rpp(traces),
        acquisition_cost=cost,
        ba_per_year=tuple(ba),
        recall_per_year=tuple(rec),
        avg_ba=avg_ba,
        avg_recall=avg_recall,
        recall_over_cost=raw_recall_over_cost(avg_recall, cost),
        n_subjects=len(traces),
        confusion_per_year=tuple(quads),
    )

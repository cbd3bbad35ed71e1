"""Change-point matching and pooled detection metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .model import ValidationError


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]  # (true, detected)
    missed: tuple[int, ...]
    false: tuple[int, ...]

    @property
    def errors(self) -> list[int]:
        return [abs(d - t) for t, d in self.pairs]


def match_changepoints(truth: Sequence[int], detected: Sequence[int], window: int) -> Matching:
    """Greedy one-to-one matching by increasing distance.

    Candidate pairs within ``window`` are taken in order of distance, then
    earlier truth, then earlier detection; each point is used at most once.
    """
    if window < 0:
        raise ValidationError("window must be >= 0")
    truth = sorted(int(t) for t in truth)
    detected = sorted(int(d) for d in detected)
    cand = sorted((abs(d - t), t, d, i, j)
                  for i, t in enumerate(truth) for j, d in enumerate(detected)
                  if abs(d - t) <= window)
    used_t, used_d = set(), set()
    pairs = []
    for _, t, d, i, j in cand:
        if i in used_t or j in used_d:
            continue
        used_t.add(i)
        used_d.add(j)
        pairs.append((t, d))
    pairs.sort()
    missed = tuple(t for i, t in enumerate(truth) if i not in used_t)
    false = tuple(d for j, d in enumerate(detected) if j not in used_d)
    return Matching(tuple(pairs), missed, false)


@dataclass
class MetricsReport:
    """Pooled detection metrics for one method.

    ``fp_proportion`` divides unmatched detections by the number of true
    change points; ``fp_per_detection`` divides by the number of detections.
    Standard errors treat realizations as independent clusters.
    """

    method: str
    tp_proportion: float
    fp_proportion: float
    mean_abs_location_error: float
    tp_se: float
    fp_se: float
    error_se: float
    fp_per_detection: float
    n_truths: int
    n_detected: int
    n_matched: int
    realizations: int
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {k: getattr(self, k) for k in (
            "method", "tp_proportion", "tp_se", "fp_proportion", "fp_se",
            "mean_abs_location_error", "error_se", "fp_per_detection", "n_truths",
            "n_detected", "n_matched", "realizations")}
        row.update(self.extra)
        return row


def _ratio_se(num: Sequence[float], den: Sequence[float]) -> float:
    r = len(num)
    total = sum(den)
    if r < 2 or total == 0:
        return 0.0
    p = sum(num) / total
    resid = math.fsum((a - p * b) ** 2 for a, b in zip(num, den))
    return math.sqrt(resid * r / (r - 1)) / total


def compute_metrics(matchings: Sequence[Matching], method: str = "") -> MetricsReport:
    """Pool matchings over realizations into TP, FP and location error."""
    if not matchings:
        raise ValidationError("need at least one realization")
    n_true = [len(m.pairs) + len(m.missed) for m in matchings]
    total = sum(n_true)
    if total == 0:
        raise ValidationError("no true change points to score against")
    tp = [len(m.pairs) for m in matchings]
    fp = [len(m.false) for m in matchings]
    errs = [e for m in matchings for e in m.errors]
    det = sum(tp) + sum(fp)
    if errs:
        mean_err = math.fsum(errs) / len(errs)
        var = math.fsum((e - mean_err) ** 2 for e in errs) / max(len(errs) - 1, 1)
        err_se = math.sqrt(var / len(errs))
    else:
        mean_err, err_se = 0.0, 0.0
    return MetricsReport(
        method=method,
        tp_proportion=sum(tp) / total,
        fp_proportion=sum(fp) / total,
        mean_abs_location_error=mean_err,
        tp_se=_ratio_se(tp, n_true),
        fp_se=_ratio_se(fp, n_true),
        error_se=err_se,
        fp_per_detection=sum(fp) / det if det else 0.0,
        n_truths=total,
        n_detected=det,
        n_matched=sum(tp),
        realizations=len(matchings),
    )


def fp_proportion(truths: Sequence[Sequence[int]], detections: Sequence[Sequence[int]],
                  window: int) -> float:
    """Unmatched detections over total true change points, pooled."""
    fp = sum(len(match_changepoints(t, d, window).false) for t, d in zip(truths, detections))
    total = sum(len(t) for t in truths)
    return fp / total if total else 0.0

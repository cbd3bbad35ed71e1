"""Reference methods: the label-free sampler and PELT for mean changes."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .metrics import fp_proportion
from .model import Hyperparams, TimeSeries, ValidationError
from .sampler import DetectionResult, SamplerSettings, run_chain, summarize
from .synth import ScenarioConfig, generate_many


def label_free_settings(settings: SamplerSettings) -> SamplerSettings:
    return replace(settings, label_update="identity", label_proposal="fresh")


def run_mcmc_nolabel(x, hyper: Hyperparams, settings: SamplerSettings) -> DetectionResult:
    """Birth/death/update sampler with one class per segment.

    Labels are pinned to the identity partition and the partition prior is
    dropped, so the target is the product of per-segment evidences.
    """
    hyper = replace(hyper, eppf_in_ratio=False)
    settings = label_free_settings(settings)
    return summarize(run_chain(x, hyper, settings), settings, x, hyper)


def _prefix(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x.values if isinstance(x, TimeSeries) else x, dtype=float)
    return np.concatenate(([0.0], np.cumsum(x))), np.concatenate(([0.0], np.cumsum(x * x)))


def _cost(s1, s2, s, t):
    """Residual sum of squares of ``x[s:t]`` (0-based, half-open) about its mean."""
    a = s1[t] - s1[s]
    return (s2[t] - s2[s]) - a * a / (t - s)


def _backtrack(last: list[int], n: int) -> list[int]:
    cps = []
    t = last[n]
    while t > 0:
        cps.append(t)
        t = last[t]
    return sorted(cps)


def pelt_mean(x, penalty: float, min_seg_len: int = 2) -> list[int]:
    """Exact penalised least-squares segmentation with PELT pruning.

    Minimises the total within-segment residual sum of squares plus
    ``penalty`` per change point.  Returned change points are the last
    index (1-based) of each closed segment.  Among equal-cost solutions the
    one with the earliest last change point wins, matching
    :func:`optimal_partition_mean`.
    """
    if not penalty > 0:
        raise ValidationError("penalty must be positive")
    if min_seg_len < 1:
        raise ValidationError("min_seg_len must be >= 1")
    s1, s2 = _prefix(x)
    n = s1.size - 1
    if n < 2 * min_seg_len:
        return []
    scale = max(float(s2[-1]), 1.0)
    slack = 1e-10 * scale
    f = [math.inf] * (n + 1)
    f[0] = -penalty
    last = [0] * (n + 1)
    active = [0]            # candidate last change points, increasing
    expiry: dict[int, int] = {}  # pruned candidate -> time it stops being needed
    for t in range(min_seg_len, n + 1):
        # s becomes admissible once the segment s+1..t is long enough
        s_new = t - min_seg_len
        if s_new >= min_seg_len:
            active.append(s_new)
        best, arg = math.inf, 0
        vals = {}
        for s in active:
            if t - s < min_seg_len:
                continue
            v = f[s] + _cost(s1, s2, s, t) + penalty
            vals[s] = v - penalty
            if v < best:
                best, arg = v, s
        f[t], last[t] = best, arg
        keep = []
        for s in active:
            if s in vals and vals[s] > f[t] + slack:
                # any t' >= t + min_seg_len is better served by t; until then keep s
                expiry.setdefault(s, t + min_seg_len)
            if expiry.get(s, math.inf) > t + 1:
                keep.append(s)
        active = keep
    return _backtrack(last, n)


def optimal_partition_mean(x, penalty: float, min_seg_len: int = 2) -> list[int]:
    """Unpruned O(N^2) dynamic programme for the same objective as :func:`pelt_mean`."""
    if not penalty > 0:
        raise ValidationError("penalty must be positive")
    s1, s2 = _prefix(x)
    n = s1.size - 1
    if n < 2 * min_seg_len:
        return []
    f = [math.inf] * (n + 1)
    f[0] = -penalty
    last = [0] * (n + 1)
    for t in range(min_seg_len, n + 1):
        best, arg = math.inf, 0
        for s in range(0, t - min_seg_len + 1):
            if s != 0 and s < min_seg_len:
                continue
            v = f[s] + _cost(s1, s2, s, t) + penalty
            if v < best:
                best, arg = v, s
        f[t], last[t] = best, arg
    return _backtrack(last, n)


def penalised_cost(x, change_points: Sequence[int], penalty: float) -> float:
    s1, s2 = _prefix(x)
    b = [0, *change_points, s1.size - 1]
    return sum(_cost(s1, s2, b[i], b[i + 1]) for i in range(len(b) - 1)) + penalty * len(
        change_points)


@dataclass
class Calibration:
    value: float
    fp: float
    iterations: int
    monotone: bool
    history: list


def bisect_fp(fp_of: Callable[[float], float], lo: float, hi: float, target: float,
              tol: float = 0.01, max_iter: int = 30, log_scale: bool = False) -> Calibration:
    """Find a parameter where the false-positive rate ``fp_of`` is within ``tol`` of target.

    ``fp_of`` must be non-increasing in its argument on ``[lo, hi]``.  Each
    evaluation is checked against that assumption; ``monotone`` records
    whether it held.  If the bracket cannot reach the target, the closest
    evaluated value is returned.
    """
    if not 0.0 < target < 1.0:
        raise ValidationError("target false-positive rate must lie in (0, 1)")
    history = []

    def ev(p):
        fp = fp_of(p)
        history.append((p, fp))
        return fp

    def mid(a, b):
        return math.sqrt(a * b) if log_scale else 0.5 * (a + b)

    ev(lo)
    ev(hi)
    it = 0
    a, b = lo, hi
    while it < max_iter:
        closest = min(history, key=lambda h: (abs(h[1] - target), h[0]))
        if abs(closest[1] - target) <= tol:
            break
        fa = dict(history)[a]
        fb = dict(history)[b]
        if not fa >= target >= fb:
            break  # target outside the bracket
        m = mid(a, b)
        fm = ev(m)
        it += 1
        if fm > target:
            a = m
        else:
            b = m
    pts = sorted(history)
    monotone = all(f2 <= f1 + 1e-12 for (_, f1), (_, f2) in zip(pts, pts[1:]))
    best = min(history, key=lambda h: (abs(h[1] - target), h[0]))
    return Calibration(best[0], best[1], it, monotone, history)


def calibrate_penalty(cfg: ScenarioConfig, target_fp: float, window: int = 5,
                      realizations: Optional[int] = None, min_seg_len: int = 2,
                      bracket: tuple[float, float] = (1.0, 1e4), tol: float = 0.01,
                      max_iter: int = 30, data=None) -> Calibration:
    """Penalty giving PELT the target false-positive rate on held-out realizations.

    Held-out series come from a generator stream separate from the
    evaluation realizations of ``cfg``.
    """
    if data is None:
        count = realizations if realizations is not None else cfg.realizations
        data = generate_many(cfg, count, stream=1)
    truths = [g.change_points for _, g in data]

    def fp_of(pen):
        dets = [pelt_mean(x, pen, min_seg_len) for x, _ in data]
        return fp_proportion(truths, dets, window)

    return bisect_fp(fp_of, bracket[0], bracket[1], target_fp, tol, max_iter, log_scale=True)


def noise_scale_estimate(x) -> float:
    """Robust noise standard deviation from first differences (MAD based)."""
    v = np.asarray(x.values if isinstance(x, TimeSeries) else x, dtype=float)
    diffs = np.diff(v)
    mad = float(np.median(np.abs(diffs - np.median(diffs))))
    return mad / (math.sqrt(2.0) * 0.6744897501960817)


def default_penalty(x) -> float:
    """BIC-style penalty ``2 sigma^2 log N`` with a robust noise estimate."""
    v = np.asarray(x.values if isinstance(x, TimeSeries) else x, dtype=float)
    sigma = noise_scale_estimate(v)
    return max(2.0 * sigma * sigma * math.log(v.size), 1e-8)


def pelt_result(x, penalty: Optional[float] = None, min_seg_len: int = 2) -> DetectionResult:
    """Wrap a PELT segmentation in the sampler's result type.

    Probabilities are 0/1 indicators, every segment is its own class and
    ``class_means`` holds the segment sample means.
    """
    if not isinstance(x, TimeSeries):
        x = TimeSeries(x)
    if penalty is None:
        penalty = default_penalty(x)
    cps = pelt_mean(x, penalty, min_seg_len)
    ind = np.zeros(x.n)
    if cps:
        ind[np.asarray(cps) - 1] = 1.0
    b = [0, *cps, x.n]
    means = [float(np.mean(x.values[b[i]:b[i + 1]])) for i in range(len(b) - 1)]
    return DetectionResult(
        change_points=list(cps), posterior_prob=ind, pooled_prob=ind.copy(),
        labels=list(range(len(means))), class_means=means, num_classes=len(means),
        k_posterior={len(cps): 1.0},
        settings={"method": "pelt", "penalty": float(penalty), "min_seg_len": min_seg_len},
        seed=None)

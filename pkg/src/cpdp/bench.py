"""Monte-Carlo benchmark: generate, detect, match and pool over realizations.

Each method's operating point is tuned on held-out realizations so that its
false-positive rate sits near a common target: the summary threshold for the
samplers and the penalty for PELT.  Sampler chains are run once per series
and the threshold is then varied on the stored posterior probabilities.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .baselines import bisect_fp, calibrate_penalty, label_free_settings, pelt_mean
from .metrics import MetricsReport, compute_metrics, fp_proportion, match_changepoints
from .model import Hyperparams, ValidationError
from .sampler import (SamplerSettings, detect_from_probabilities, posterior_probabilities,
                      run_chain)
from .synth import CAPTIONS, ScenarioConfig, generate_many

METHODS = ("proposed", "mcmc", "pelt")
DISPLAY = {"proposed": "Proposed Method", "mcmc": "MCMC", "pelt": "PELT"}


@dataclass(frozen=True)
class HarnessSettings:
    """Evaluation protocol shared by all methods.

    ``match_window`` is the tolerance for a detection to count as a true
    positive; ``summary_window`` pools the samplers' per-index
    probabilities.  ``iterations``/``burn_in`` are per chain.  PELT is cheap,
    so it is calibrated on more held-out series than the samplers.
    """

    iterations: int = 6000
    burn_in: int = 3000
    match_window: int = 5
    summary_window: int = 3
    target_fp: float = 0.06
    fp_tolerance: float = 0.01
    calibration_realizations: int = 20
    pelt_calibration_realizations: int = 200
    threshold_bracket: tuple[float, float] = (0.02, 0.98)
    penalty_bracket: tuple[float, float] = (1.0, 1e4)
    min_seg_len: int = 2
    max_bisection: int = 30

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValidationError("need 0 <= burn_in < iterations")
        if min(self.calibration_realizations, self.pelt_calibration_realizations) < 1:
            raise ValidationError("calibration realizations must be >= 1")
        if not 0.0 < self.target_fp < 1.0:
            raise ValidationError("target_fp must lie in (0, 1)")


@dataclass
class BenchmarkReport:
    scenario: str
    caption: str
    config: dict
    harness: dict
    reports: list[MetricsReport]
    calibration: dict
    raw: list[dict] = field(default_factory=list)

    def report(self, method: str) -> MetricsReport:
        for r in self.reports:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "caption": self.caption,
            "config": self.config,
            "harness": self.harness,
            "table": [r.as_row() for r in self.reports],
            "calibration": self.calibration,
            "realizations": self.raw,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {self.caption}\n")
        rows = [r.as_row() for r in self.reports]
        for row in rows:
            row["method"] = DISPLAY.get(row["method"], row["method"])
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: f"{v:.6f}" if isinstance(v, float) else v
                             for k, v in row.items()})
        return buf.getvalue()


def _chain_seed(seed: int, stream: int, index: int, method: int) -> int:
    ss = np.random.SeedSequence([int(seed), stream, index, method])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _sampler_probs(x, method: str, hyper: Hyperparams, harness: HarnessSettings,
                   seed: int):
    settings = SamplerSettings(iterations=harness.iterations, burn_in=harness.burn_in,
                               seed=seed, window=harness.summary_window)
    if method == "mcmc":
        settings = label_free_settings(settings)
        hyper = replace(hyper, eppf_in_ratio=False)
    samples = run_chain(x, hyper, settings)
    return posterior_probabilities(samples, harness.summary_window)


def _probs_for(data, methods, hyper, harness, seed, stream, jobs):
    tasks = [(i, m) for i in range(len(data)) for m in methods]
    out = Parallel(n_jobs=jobs)(
        delayed(_sampler_probs)(data[i][0], m, hyper, harness,
                                _chain_seed(seed, stream, i, METHODS.index(m)))
        for i, m in tasks)
    probs = {m: [None] * len(data) for m in methods}
    for (i, m), res in zip(tasks, out):
        probs[m][i] = res
    return probs


def _detect_all(probs, threshold, window):
    return [detect_from_probabilities(raw, pooled, threshold, window) for raw, pooled in probs]


def calibrate_threshold(probs, truths, harness: HarnessSettings):
    """Summary threshold giving the target false-positive rate on held-out chains."""

    def fp_of(rho):
        return fp_proportion(truths, _detect_all(probs, rho, harness.summary_window),
                             harness.match_window)

    lo, hi = harness.threshold_bracket
    return bisect_fp(fp_of, lo, hi, harness.target_fp, harness.fp_tolerance,
                     harness.max_bisection)


def run_benchmark(cfg: ScenarioConfig, methods: Sequence[str] = METHODS,
                  harness: Optional[HarnessSettings] = None,
                  hyper: Optional[Hyperparams] = None, jobs: int = 1) -> BenchmarkReport:
    """Evaluate ``methods`` on ``cfg.realizations`` series at matched false-positive rate.

    Deterministic given ``cfg.seed``; the result does not depend on ``jobs``.
    """
    harness = harness or HarnessSettings()
    hyper = hyper or Hyperparams()
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}; expected one of {METHODS}")
    samplers = [m for m in methods if m != "pelt"]

    held_out = generate_many(cfg, harness.calibration_realizations, stream=1)
    held_truth = [g.change_points for _, g in held_out]
    calib = {}
    held_probs = _probs_for(held_out, samplers, hyper, harness, cfg.seed, 1, jobs)
    for m in samplers:
        calib[m] = calibrate_threshold(held_probs[m], held_truth, harness)
    if "pelt" in methods:
        calib["pelt"] = calibrate_penalty(
            cfg, harness.target_fp, harness.match_window, min_seg_len=harness.min_seg_len,
            bracket=harness.penalty_bracket, tol=harness.fp_tolerance,
            max_iter=harness.max_bisection,
            data=generate_many(cfg, harness.pelt_calibration_realizations, stream=1))

    data = generate_many(cfg, stream=0)
    probs = _probs_for(data, samplers, hyper, harness, cfg.seed, 0, jobs)
    detections = {m: _detect_all(probs[m], calib[m].value, harness.summary_window)
                  for m in samplers}
    if "pelt" in methods:
        detections["pelt"] = [pelt_mean(x, calib["pelt"].value, harness.min_seg_len)
                              for x, _ in data]

    reports = []
    raw = [{"index": i, "n": g.n, "truth": list(g.change_points), "detections": {}}
           for i, (_, g) in enumerate(data)]
    for m in methods:
        matchings = [match_changepoints(g.change_points, det, harness.match_window)
                     for (_, g), det in zip(data, detections[m])]
        rep = compute_metrics(matchings, m)
        rep.extra = {"parameter": calib[m].value, "calibration_fp": calib[m].fp}
        reports.append(rep)
        for row, det in zip(raw, detections[m]):
            row["detections"][m] = list(det)

    calibration = {m: {"parameter": c.value, "fp": c.fp, "iterations": c.iterations,
                       "monotone": c.monotone,
                       "kind": "penalty" if m == "pelt" else "threshold"}
                   for m, c in calib.items()}
    return BenchmarkReport(cfg.scenario, CAPTIONS[cfg.scenario], asdict(cfg), asdict(harness),
                           reports, calibration, raw)

"""Synthetic mean-shift scenarios with ground truth.

Two scenarios are provided: every segment draws its own mean
(``"random-mean"``), or segments cycle through a small set of shared class
means (``"repeating-mean"``).  Change points use the package convention: the
last index of the segment they close, 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .model import TimeSeries, ValidationError

SCENARIOS = ("random-mean", "repeating-mean")
_ALIASES = {"random": "random-mean", "repeating": "repeating-mean"}
CAPTIONS = {
    "random-mean": "Random mean parameter assignment.",
    "repeating-mean": "Repeating mean parameter assignment.",
}
# redraw budget for the separation constraints before giving up
_MAX_REDRAWS = 10_000


def scenario_name(name: str) -> str:
    """Canonical scenario name; accepts the short forms ``random`` and ``repeating``."""
    name = _ALIASES.get(name, name)
    if name not in SCENARIOS:
        raise ValidationError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    return name


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator settings for one benchmark scenario.

    Parameters
    ----------
    scenario : {"random-mean", "repeating-mean"}
    seg_len_range : (int, int)
        Inclusive bounds of the uniform segment length.
    n_changepoints_range : (int, int)
        Inclusive bounds of the uniform number of change points.
    noise_sd : float
        Standard deviation of the additive Gaussian noise.
    class_count : int
        Number of shared means in the repeating scenario.
    class_mean_sd : float
        Standard deviation of the zero-mean normal that means are drawn from.
    min_class_separation : float
        Minimum gap between consecutive means (random) or between any two
        class means (repeating).
    realizations : int
        Number of evaluation series.
    seed : int
    """

    scenario: str = "random-mean"
    seg_len_range: tuple[int, int] = (20, 70)
    n_changepoints_range: tuple[int, int] = (5, 9)
    noise_sd: float = 2.0
    class_count: int = 3
    class_mean_sd: float = 5.0
    min_class_separation: float = 4.0
    realizations: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", scenario_name(self.scenario))
        for name in ("seg_len_range", "n_changepoints_range"):
            lo, hi = (int(v) for v in getattr(self, name))
            object.__setattr__(self, name, (lo, hi))
            if lo > hi:
                raise ValidationError(f"{name} is empty: {(lo, hi)}")
        if self.seg_len_range[0] < 1 or self.n_changepoints_range[0] < 0:
            raise ValidationError("segment lengths must be >= 1 and counts >= 0")
        if not self.noise_sd > 0:
            raise ValidationError("noise_sd must be positive")
        if self.class_count < 2:
            raise ValidationError("class_count must be >= 2")
        if not self.min_class_separation > 0:
            raise ValidationError("min_class_separation must be positive")
        if not self.class_mean_sd > 0:
            raise ValidationError("class_mean_sd must be positive")
        if self.realizations < 1:
            raise ValidationError("realizations must be >= 1")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class GroundTruth:
    change_points: tuple[int, ...]
    segment_means: tuple[float, ...]
    labels: Optional[tuple[int, ...]] = None
    n: int = 0

    def __post_init__(self):
        if len(self.segment_means) != len(self.change_points) + 1:
            raise ValidationError("need one mean per segment")
        prev = 0
        for t in self.change_points:
            if not prev < t < self.n:
                raise ValidationError("change points inconsistent with series length")
            prev = t


def _lengths(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    k = int(rng.integers(cfg.n_changepoints_range[0], cfg.n_changepoints_range[1] + 1))
    lo, hi = cfg.seg_len_range
    return rng.integers(lo, hi + 1, size=k + 1)


def _assemble(cfg, rng, lengths, means, labels=None):
    signal = np.repeat(means, lengths)
    x = signal + rng.normal(0.0, cfg.noise_sd, size=signal.size)
    cps = tuple(int(c) for c in np.cumsum(lengths)[:-1])
    truth = GroundTruth(cps, tuple(float(m) for m in means),
                        None if labels is None else tuple(int(c) for c in labels),
                        int(signal.size))
    return TimeSeries(x), truth


def gen_scenario_random(cfg: ScenarioConfig, rng: np.random.Generator
                        ) -> tuple[TimeSeries, GroundTruth]:
    """Independent segment means, consecutive means at least ``min_class_separation`` apart."""
    lengths = _lengths(cfg, rng)
    means = [rng.normal(0.0, cfg.class_mean_sd)]
    for _ in range(lengths.size - 1):
        for _ in range(_MAX_REDRAWS):
            m = rng.normal(0.0, cfg.class_mean_sd)
            if abs(m - means[-1]) >= cfg.min_class_separation:
                break
        else:
            raise ValidationError("could not satisfy min_class_separation")
        means.append(m)
    return _assemble(cfg, rng, lengths, np.asarray(means))


def draw_class_means(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    for _ in range(_MAX_REDRAWS):
        means = rng.normal(0.0, cfg.class_mean_sd, size=cfg.class_count)
        gaps = np.abs(means[:, None] - means[None, :])
        if np.all(gaps[np.triu_indices(cfg.class_count, 1)] >= cfg.min_class_separation):
            return means
    raise ValidationError("could not satisfy min_class_separation between classes")


def gen_scenario_repeating(cfg: ScenarioConfig, rng: np.random.Generator
                           ) -> tuple[TimeSeries, GroundTruth]:
    """Segments take one of ``class_count`` shared means; neighbours never share a class."""
    lengths = _lengths(cfg, rng)
    class_means = draw_class_means(cfg, rng)
    labels = [int(rng.integers(cfg.class_count))]
    for _ in range(lengths.size - 1):
        c = int(rng.integers(cfg.class_count - 1))
        labels.append(c + (c >= labels[-1]))
    return _assemble(cfg, rng, lengths, class_means[labels], labels)


def generate(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[TimeSeries, GroundTruth]:
    if cfg.scenario == "random-mean":
        return gen_scenario_random(cfg, rng)
    return gen_scenario_repeating(cfg, rng)


def realization_rngs(seed: int, count: int, stream: int = 0) -> list[np.random.Generator]:
    """Independent generators for ``count`` realizations.

    ``stream`` separates evaluation data (0) from held-out calibration data (1).
    """
    ss = np.random.SeedSequence([int(seed), int(stream)])
    return [np.random.default_rng(child) for child in ss.spawn(count)]


def generate_many(cfg: ScenarioConfig, count: Optional[int] = None, stream: int = 0):
    count = cfg.realizations if count is None else count
    return [generate(cfg, rng) for rng in realization_rngs(cfg.seed, count, stream)]

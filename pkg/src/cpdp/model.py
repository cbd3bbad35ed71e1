"""Domain types and collapsed log-densities for the labelled mean-shift model.

Time indices follow the 1-based convention used throughout the package: a
series has samples ``1..N``, a change point ``t`` is the last index of the
segment it closes, and valid change points lie in ``[2, N-1]``.  Segment ``i``
covers ``tau_i + 1 .. tau_{i+1}`` with ``tau_0 = 0`` and ``tau_{K+1} = N``.

Inverse-gamma priors are written ``IG(a, b)`` with shape ``a/2`` and scale
``b/2``; e.g. the noise prior ``IG(nu, gamma)`` has mean ``(gamma/2) / (nu/2 - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)


class ValidationError(ValueError):
    """Raised when a domain object violates its invariants."""


@dataclass(frozen=True)
class TimeSeries:
    """An ordered, finite, real-valued series of length ``N >= 2``."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).ravel()
        if arr.size < 2:
            raise ValidationError(f"series needs at least 2 values, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("series contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    @cached_property
    def _prefix(self):
        x = self.values
        s1 = np.concatenate(([0.0], np.cumsum(x))).tolist()
        s2 = np.concatenate(([0.0], np.cumsum(x * x))).tolist()
        return s1, s2

    def range_stats(self, start: int, end: int) -> tuple[int, float, float]:
        """Count, sum and sum of squares over 1-based inclusive ``start..end``."""
        s1, s2 = self._prefix
        return end - start + 1, s1[end] - s1[start - 1], s2[end] - s2[start - 1]


@dataclass(frozen=True)
class Segmentation:
    """Strictly increasing change points ``tau_1 < ... < tau_K`` in ``[2, N-1]``."""

    change_points: tuple[int, ...]
    n: int

    def __post_init__(self):
        cps = tuple(int(t) for t in self.change_points)
        object.__setattr__(self, "change_points", cps)
        if self.n < 2:
            raise ValidationError("series length must be >= 2")
        prev = 1
        for t in cps:
            if t <= prev or t > self.n - 1:
                raise ValidationError(
                    f"invalid change points {list(cps)} for N={self.n}: "
                    "must be strictly increasing within [2, N-1]"
                )
            prev = t

    @property
    def k(self) -> int:
        return len(self.change_points)

    @property
    def n_segments(self) -> int:
        return len(self.change_points) + 1

    def bounds(self) -> list[int]:
        return [0, *self.change_points, self.n]


@dataclass(frozen=True)
class LabelAssignment:
    """Class label per segment, compactly numbered ``0..V-1``."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(c) for c in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValidationError("at least one segment label is required")
        used = set(labels)
        if used != set(range(len(used))):
            raise ValidationError(f"labels {list(labels)} are not compact")

    @classmethod
    def unchecked(cls, labels: Sequence[int]) -> "LabelAssignment":
        """Build an assignment without the compactness check (see ``compact_labels``)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "labels", tuple(int(c) for c in labels))
        return obj

    @property
    def num_classes(self) -> int:
        return max(self.labels) + 1

    def counts(self) -> list[int]:
        out = [0] * self.num_classes
        for c in self.labels:
            out[c] += 1
        return out

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class ClassParams:
    """Class means, class-mean variances, noise variances and segment means."""

    class_means: tuple[float, ...]
    class_mean_vars: tuple[float, ...]
    noise_vars: tuple[float, ...]
    segment_means: tuple[float, ...]

    def __post_init__(self):
        for name in ("class_means", "class_mean_vars", "noise_vars", "segment_means"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        v = len(self.class_means)
        if len(self.class_mean_vars) != v or len(self.noise_vars) != v:
            raise ValidationError("class parameter vectors have inconsistent lengths")
        for s in self.class_mean_vars + self.noise_vars:
            if not (s > 0.0 and math.isfinite(s)):
                raise ValidationError(f"variances must be positive and finite, got {s}")

    @property
    def num_classes(self) -> int:
        return len(self.class_means)


@dataclass(frozen=True)
class Hyperparams:
    """Prior hyperparameters of the labelled model.

    ``k_max=None`` resolves to ``min(N - 2, 50)`` via :meth:`resolve_k_max`.
    """

    alpha: float = 2.0
    mean_loc: float = 0.0
    mean_scale: float = 1.0
    noise_shape: float = 2.0
    noise_scale: float = 20.0
    classvar_shape: float = 0.01
    classvar_scale: float = 200.0
    k_max: Optional[int] = None
    eppf_in_ratio: bool = True

    def __post_init__(self):
        for name in ("alpha", "mean_scale", "noise_shape", "noise_scale",
                     "classvar_shape", "classvar_scale"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValidationError(f"{name} must be positive, got {val}")
        if not math.isfinite(self.mean_loc):
            raise ValidationError("mean_loc must be finite")
        if self.k_max is not None and self.k_max < 1:
            raise ValidationError("k_max must be >= 1")

    def resolve_k_max(self, n: int) -> int:
        if self.k_max is None:
            return max(1, min(n - 2, 50))
        if self.k_max > n - 2:
            raise ValidationError(f"k_max={self.k_max} exceeds N-2={n - 2}")
        return self.k_max


@dataclass(frozen=True)
class ChainState:
    seg: Segmentation
    labels: LabelAssignment
    params: ClassParams
    # cached collapsed log-density, filled by the sampler
    log_joint: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.labels) != self.seg.n_segments:
            raise ValidationError("labels length must equal K + 1")
        if self.params.num_classes != self.labels.num_classes:
            raise ValidationError("class parameters do not match number of classes")
        if len(self.params.segment_means) != self.seg.n_segments:
            raise ValidationError("segment means must have one entry per segment")


def segment_slices(seg: Segmentation, n: int) -> list[tuple[int, int]]:
    """Return 1-based inclusive ``(start, end)`` pairs for each segment.

    Segment ``i`` is ``x[start - 1:end]`` in Python slicing terms.

    >>> segment_slices(Segmentation((4,), 10), 10)
    [(1, 4), (5, 10)]
    """
    if seg.n != n:
        raise ValidationError(f"segmentation built for N={seg.n}, not N={n}")
    b = seg.bounds()
    return [(b[i] + 1, b[i + 1]) for i in range(len(b) - 1)]


@lru_cache(maxsize=65536)
def _count_terms(d: int, nu: float, gam: float, delta: float) -> float:
    # every factor of the class evidence that depends on the data only via d
    return (math.lgamma(0.5 * (d + nu)) - math.lgamma(0.5 * nu) + 0.5 * nu * math.log(gam)
            - 0.5 * d * LOG_PI - 0.5 * math.log(delta * d + 1.0))


def marginal_from_stats(d: int, s1: float, s2: float, hyper: Hyperparams,
                        shape: Optional[float] = None,
                        scale: Optional[float] = None) -> float:
    """Log class marginal from sufficient statistics centred on ``mean_loc``.

    ``s1`` and ``s2`` are the sum and sum of squares of ``y - mean_loc``.
    ``shape``/``scale`` override the noise prior (used for the class-mean
    base measure, which has the same algebraic form).
    """
    if d == 0:
        return 0.0
    nu = hyper.noise_shape if shape is None else shape
    gam = hyper.noise_scale if scale is None else scale
    delta = hyper.mean_scale
    q = s2 - s1 * s1 / (d + 1.0 / delta)
    if q < 0.0:
        q = 0.0
    return _count_terms(d, nu, gam, delta) - 0.5 * (d + nu) * math.log(gam + q)


def log_class_marginal(y: Sequence[float], hyper: Hyperparams) -> float:
    """Log evidence of data sharing one class mean and one noise variance.

    Integrates ``y ~ N(m, s2 I)`` over ``m ~ N(mean_loc, mean_scale * s2)`` and
    ``s2 ~ IG(noise_shape, noise_scale)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValidationError("class data contains non-finite values")
    if y.size == 0:
        return 0.0
    r = y - hyper.mean_loc
    return marginal_from_stats(y.size, float(r.sum()), float(r @ r), hyper)


def log_beta_k_prior(k: int, n: int) -> float:
    # change-point rate integrated over a uniform prior: B(K + 1, N - K)
    return math.lgamma(k + 1) + math.lgamma(n - k) - math.lgamma(n + 1)


def log_eppf(counts: Sequence[int], alpha: float) -> float:
    """Log probability of a partition with block sizes ``counts`` under the CRP."""
    total = sum(counts)
    terms = [math.lgamma(c) for c in counts]
    return (len(counts) * math.log(alpha) - (math.lgamma(alpha + total) - math.lgamma(alpha))
            + math.fsum(terms))


def class_stats(x: TimeSeries, bounds: Sequence[int], labels: Sequence[int],
                num_classes: int, loc: float) -> list[list[float]]:
    """Per-class ``[d, s1, s2]`` with data centred on ``loc``."""
    stats = [[0, 0.0, 0.0] for _ in range(num_classes)]
    for i, c in enumerate(labels):
        d, s1, s2 = x.range_stats(bounds[i] + 1, bounds[i + 1])
        st = stats[c]
        st[0] += d
        st[1] += s1 - d * loc
        st[2] += s2 - 2.0 * loc * s1 + d * loc * loc
    return stats


def log_joint_from_parts(x: TimeSeries, bounds: Sequence[int], labels: Sequence[int],
                         hyper: Hyperparams, prior_only: bool = False) -> float:
    """Collapsed log-density for raw bounds/labels, skipping validation."""
    n = x.n
    k = len(bounds) - 2
    num_classes = max(labels) + 1
    out = log_beta_k_prior(k, n)
    if hyper.eppf_in_ratio:
        counts = [0] * num_classes
        for c in labels:
            counts[c] += 1
        out += log_eppf(counts, hyper.alpha)
    if not prior_only:
        # fsum keeps the value independent of class numbering
        out += math.fsum(marginal_from_stats(d, s1, s2, hyper)
                         for d, s1, s2 in class_stats(x, bounds, labels, num_classes,
                                                      hyper.mean_loc))
    return out


def log_joint_collapsed(x: TimeSeries, seg: Segmentation, labels: LabelAssignment,
                        hyper: Hyperparams) -> float:
    """Unnormalised log posterior of (change points, labels) given the data.

    Class means, noise variances and the change-point rate are integrated out.
    Includes the CRP partition probability when ``hyper.eppf_in_ratio`` is set.
    """
    if seg.n != x.n:
        raise ValidationError("segmentation does not match series length")
    if len(labels) != seg.n_segments:
        raise ValidationError("labels length must equal K + 1")
    return log_joint_from_parts(x, seg.bounds(), labels.labels, hyper)


def log_likelihood_given_params(x: TimeSeries, seg: Segmentation, labels: LabelAssignment,
                                params: ClassParams) -> float:
    """Gaussian log-likelihood with each segment at its class mean and noise variance."""
    if len(labels) != seg.n_segments:
        raise ValidationError("labels length must equal K + 1")
    total = 0.0
    b = seg.bounds()
    for i, c in enumerate(labels.labels):
        var = params.noise_vars[c]
        if not var > 0.0:
            raise ValidationError("noise variance must be positive")
        mu = params.class_means[c]
        d, s1, s2 = x.range_stats(b[i] + 1, b[i + 1])
        rss = s2 - 2.0 * mu * s1 + d * mu * mu
        total += -0.5 * d * (LOG_2PI + math.log(var)) - 0.5 * rss / var
    return total

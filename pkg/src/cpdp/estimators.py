"""scikit-learn style wrappers around the detectors.

Each estimator is fitted on one series (1-D array or a single-column 2-D
array) and exposes the result through trailing-underscore attributes.
``fit_predict`` returns the class label of every time index, so segments
sharing a class share a label.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import pelt_result
from .model import Hyperparams, TimeSeries, ValidationError
from .sampler import DetectionResult, SamplerSettings, run_chain, summarize


def check_series(X) -> TimeSeries:
    """Validate ``X`` as a finite series of at least 4 points."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single series, got {arr.shape[1]} columns")
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError("expected a 1-D series")
    if arr.size < 4:
        raise ValueError(f"need at least 4 points, got {arr.size}")
    return TimeSeries(arr)


def _index_labels(result: DetectionResult, n: int) -> np.ndarray:
    bounds = [0, *result.change_points, n]
    return np.repeat(np.asarray(result.labels, dtype=np.int64), np.diff(bounds))


class _DetectorMixin(ClusterMixin):
    def _store(self, result: DetectionResult, n: int):
        self.result_ = result
        self.change_points_ = np.asarray(result.change_points, dtype=np.int64)
        self.posterior_prob_ = np.asarray(result.posterior_prob)
        self.pooled_prob_ = np.asarray(result.pooled_prob)
        self.class_means_ = np.asarray(result.class_means)
        self.n_classes_ = result.num_classes
        self.k_posterior_ = dict(result.k_posterior)
        self.labels_ = _index_labels(result, n)
        self.n_samples_fit_ = n
        return self

    def segment_means(self) -> np.ndarray:
        """Per-index level of the class each index belongs to."""
        check_is_fitted(self, "labels_")
        return self.class_means_[self.labels_]


class BayesianChangePointDetector(_DetectorMixin, BaseEstimator):
    """Mean-shift change points with Dirichlet-process segment classes.

    Parameters
    ----------
    alpha : float, default=2.0
        DP concentration.
    noise_shape, noise_scale : float
        Inverse-gamma prior on the class noise variance (shape and scale
        are halved).
    mean_loc, mean_scale : float
        Class-mean prior location and variance multiplier.
    classvar_shape, classvar_scale : float
        Inverse-gamma prior on the spread of segment means within a class.
    k_max : int or None
        Maximum number of change points; ``None`` means ``min(N-2, 50)``.
    eppf : bool, default=True
        Include the partition prior in the move ratios.
    iterations, burn_in : int
        Chain length and discarded prefix.
    threshold : float
        Pooled posterior probability needed to report a change point.
    window : int
        Half-width of the pooling window.
    random_state : int
        Chain seed.

    Attributes
    ----------
    change_points_ : ndarray of int
        Detected change points (1-based last index of each closed segment).
    posterior_prob_ : ndarray
        Per-index posterior change probability.
    labels_ : ndarray of int
        Class label of every index.
    k_posterior_ : dict
        Posterior distribution of the number of change points.
    """

    _label_free = False

    def __init__(self, alpha=2.0, noise_shape=2.0, noise_scale=20.0, mean_loc=0.0,
                 mean_scale=1.0, classvar_shape=0.01, classvar_scale=200.0, k_max=None,
                 eppf=True, iterations=20000, burn_in=10000, threshold=0.5, window=3,
                 random_state=0):
        self.alpha = alpha
        self.noise_shape = noise_shape
        self.noise_scale = noise_scale
        self.mean_loc = mean_loc
        self.mean_scale = mean_scale
        self.classvar_shape = classvar_shape
        self.classvar_scale = classvar_scale
        self.k_max = k_max
        self.eppf = eppf
        self.iterations = iterations
        self.burn_in = burn_in
        self.threshold = threshold
        self.window = window
        self.random_state = random_state

    def _hyper(self) -> Hyperparams:
        return Hyperparams(alpha=self.alpha, mean_loc=self.mean_loc, mean_scale=self.mean_scale,
                           noise_shape=self.noise_shape, noise_scale=self.noise_scale,
                           classvar_shape=self.classvar_shape,
                           classvar_scale=self.classvar_scale, k_max=self.k_max,
                           eppf_in_ratio=bool(self.eppf) and not self._label_free)

    def _settings(self) -> SamplerSettings:
        seed = 0 if self.random_state is None else int(self.random_state)
        kw = {}
        if self._label_free:
            kw = {"label_update": "identity", "label_proposal": "fresh"}
        return SamplerSettings(iterations=self.iterations, burn_in=self.burn_in, seed=seed,
                               threshold=self.threshold, window=self.window, **kw)

    def fit(self, X, y=None):
        x = check_series(X)
        try:
            hyper, settings = self._hyper(), self._settings()
        except ValidationError as exc:
            raise ValueError(str(exc)) from None
        self.samples_ = run_chain(x, hyper, settings)
        return self._store(summarize(self.samples_, settings, x, hyper), x.n)


class LabelFreeChangePointDetector(BayesianChangePointDetector):
    """The same sampler with one class per segment and no partition prior."""

    _label_free = True


class PeltChangePointDetector(_DetectorMixin, BaseEstimator):
    """Penalised least-squares mean segmentation solved exactly with PELT.

    Parameters
    ----------
    penalty : float or None
        Cost per change point; ``None`` uses ``2 sigma^2 log N`` with a
        robust noise estimate.
    min_seg_len : int, default=2
    """

    def __init__(self, penalty: Optional[float] = None, min_seg_len: int = 2):
        self.penalty = penalty
        self.min_seg_len = min_seg_len

    def fit(self, X, y=None):
        x = check_series(X)
        try:
            result = pelt_result(x, self.penalty, self.min_seg_len)
        except ValidationError as exc:
            raise ValueError(str(exc)) from None
        self.penalty_ = result.settings["penalty"]
        return self._store(result, x.n)

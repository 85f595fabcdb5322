"""Scikit-learn style front end to the per-sperm measurement pipeline."""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .batch import measure_many
from .config import MeasurementConfig
from .report import MEASURE_COLUMNS
from .validation import check_samples


class SpermMorphometer(TransformerMixin, BaseEstimator):
    """Measure every sperm instance in a set of labelled micrographs.

    ``X`` is a sequence of ``(image, mask)`` pairs, where ``image`` is a
    :class:`~spermmorph.raster.ScalarImage` or 2-D array and ``mask`` an
    :class:`~spermmorph.raster.InstancePartMask` or ``(part, instance)``
    array pair. ``transform`` returns one row per instance: the sample
    index, the instance ID and the tabulated parameters, with NaN where a
    part was missing. The estimator learns nothing; ``fit`` only validates
    the parameters.
    """

    def __init__(
        self,
        sigma=1.8,
        microns_per_pixel=1.0,
        w1=0.5,
        w2=0.5,
        momentum_alpha=0.9,
        cos_threshold=0.9,
        r_link=2.0,
        theta_max=45.0,
        gamma=1.0,
        min_points=10,
        strength_threshold=0.01,
        max_halfwidth=8.0,
        edge_threshold=0.005,
        mask_margin=2,
        max_steps=200,
        curvature_window=10.0,
        width_model="gaussian",
        dark_lines=False,
        steger_baseline=False,
        baseline_gated=False,
        n_threads=None,
    ):
        self.sigma = sigma
        self.microns_per_pixel = microns_per_pixel
        self.w1 = w1
        self.w2 = w2
        self.momentum_alpha = momentum_alpha
        self.cos_threshold = cos_threshold
        self.r_link = r_link
        self.theta_max = theta_max
        self.gamma = gamma
        self.min_points = min_points
        self.strength_threshold = strength_threshold
        self.max_halfwidth = max_halfwidth
        self.edge_threshold = edge_threshold
        self.mask_margin = mask_margin
        self.max_steps = max_steps
        self.curvature_window = curvature_window
        self.width_model = width_model
        self.dark_lines = dark_lines
        self.steger_baseline = steger_baseline
        self.baseline_gated = baseline_gated
        self.n_threads = n_threads

    def _config(self) -> MeasurementConfig:
        params = self.get_params()
        params.pop("n_threads")
        return MeasurementConfig(**params)

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        if X is not None:
            check_samples(X)
        return self

    def measure(self, X):
        """Per-sample lists of :class:`~spermmorph.morphometry.MorphReport`."""
        check_is_fitted(self, "config_")
        return measure_many(check_samples(X), self.config_, self.n_threads)

    def transform(self, X):
        rows = []
        for k, reports in enumerate(self.measure(X)):
            for r in reports:
                vals = [getattr(r, c) for c in MEASURE_COLUMNS]
                rows.append([k, r.instance] + [math.nan if v is None else float(v) for v in vals])
        return np.array(rows, dtype=np.float64).reshape(-1, 2 + len(MEASURE_COLUMNS))

    def get_feature_names_out(self, input_features=None):
        return np.array(("sample", "instance") + MEASURE_COLUMNS, dtype=object)

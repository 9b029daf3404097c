"""Scikit-learn style facade over the tracking pipeline.

``CenterlineTracker`` follows the estimator protocol: constructor
parameters mirror the pipeline configuration one-to-one (so ``get_params``
and ``set_params`` work for grid search and cloning), ``fit`` runs the
offline stage on an image, and ``predict`` maps seed points to a traced
centerline polyline.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .config import PipelineConfig
from .errors import InputError
from .session import prepare, track
from .synth import accuracy


class CenterlineTracker(BaseEstimator):
    """Minimally interactive centerline tracker for tubular structures.

    Parameters mirror :class:`~tubetrack.config.PipelineConfig`; see there
    for meanings and defaults.

    Attributes (after ``fit``)
    --------------------------
    session_ : Session
        Prepared feature field, trajectories and metric graphs.
    n_trajectories_ : int
    """

    def __init__(self, sigma=1.5, r_min=1, r_max=8, n_theta=60, alpha=5.0,
                 beta=20.0, epsilon=0.1, beta_length=20.0, metric="fsr",
                 threshold_quantile=0.6, tau=5.0, prolong_len=10, min_len=5,
                 invert=False, lambda_angle=1.0, window_pad=24, n_jobs=1,
                 engine="batched", cache_dir=None):
        self.sigma = sigma
        self.r_min = r_min
        self.r_max = r_max
        self.n_theta = n_theta
        self.alpha = alpha
        self.beta = beta
        self.epsilon = epsilon
        self.beta_length = beta_length
        self.metric = metric
        self.threshold_quantile = threshold_quantile
        self.tau = tau
        self.prolong_len = prolong_len
        self.min_len = min_len
        self.invert = invert
        self.lambda_angle = lambda_angle
        self.window_pad = window_pad
        self.n_jobs = n_jobs
        self.engine = engine
        self.cache_dir = cache_dir

    def _config(self):
        keys = [f for f in PipelineConfig().to_dict()]
        return PipelineConfig(**{k: getattr(self, k) for k in keys}).validate()

    def fit(self, X, y=None):
        """Run the offline stage (features, trajectories, graphs) on an image."""
        self.session_ = prepare(X, self._config(), cache_dir=self.cache_dir)
        self.n_trajectories_ = len(self.session_.trajectories)
        return self

    def _check_fitted(self):
        if not hasattr(self, "session_"):
            raise InputError("this tracker is not fitted; call fit(image) first")

    def track(self, seeds, metric=None):
        """Full tracking report for ordered seed points."""
        self._check_fitted()
        return track(self.session_, seeds, metric=metric)

    def predict(self, seeds, metric=None):
        """Centerline polyline (n, 2) through the ordered seed points."""
        report = self.track(seeds, metric=metric)
        return np.asarray(report["path"]["polyline"], dtype=np.float64)

    def score(self, seeds, gt_mask, metric=None):
        """Fraction of the traced centerline inside a ground-truth mask."""
        return accuracy(self.predict(seeds, metric=metric), gt_mask).j

"""Pipeline configuration with validated defaults.

Filter scale, radius range, orientation count, data weight, curvature
weight and anisotropy relaxation carry the standard operating values for
retinal-scale imagery; segmentation and grouping knobs (quantile, tau,
prolongation, pruning length) are engineering defaults exposed for tuning.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from .errors import ConfigurationError
from .validation import check_in_range, check_n_theta, check_positive


@dataclass
class PipelineConfig:
    sigma: float = 1.5
    r_min: int = 1
    r_max: int = 8
    n_theta: int = 60
    alpha: float = 5.0
    beta: float = 20.0
    epsilon: float = 0.1
    beta_length: float = 20.0
    metric: str = "fsr"
    threshold_quantile: float = 0.6
    tau: float = 5.0
    prolong_len: int = 10
    min_len: int = 5
    invert: bool = False
    lambda_angle: float = 1.0
    window_pad: int = 24
    n_jobs: int = 1
    engine: str = "batched"

    def validate(self):
        check_positive("sigma", self.sigma)
        if not (1 <= self.r_min <= self.r_max):
            raise ConfigurationError(
                f"need 1 <= r_min <= r_max, got {self.r_min}..{self.r_max}"
            )
        check_n_theta(self.n_theta)
        check_positive("alpha", self.alpha)
        check_positive("beta", self.beta)
        check_positive("beta_length", self.beta_length)
        check_in_range("epsilon", self.epsilon, 0.0, 1.0)
        check_in_range("threshold_quantile", self.threshold_quantile, 0.0, 1.0,
                       include_hi=False)
        check_positive("tau", self.tau)
        if self.prolong_len < 0 or self.min_len < 1:
            raise ConfigurationError("prolong_len must be >= 0 and min_len >= 1")
        if self.metric not in ("fe", "fsr"):
            raise ConfigurationError(f"metric must be 'fe' or 'fsr', got {self.metric!r}")
        if self.engine not in ("batched", "sequential"):
            raise ConfigurationError(f"unknown engine {self.engine!r}")
        return self

    def to_dict(self):
        return asdict(self)

    def merged(self, overrides):
        """New config with the given keys replaced; unknown keys rejected."""
        valid = {f.name for f in fields(self)}
        unknown = set(overrides) - valid
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        data = self.to_dict()
        data.update(overrides)
        return PipelineConfig(**data).validate()

    @classmethod
    def from_dict(cls, data):
        return cls().merged(data or {})

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def cache_key(self, image_bytes):
        """Content hash binding an image to the full parameter set."""
        digest = hashlib.sha256()
        digest.update(image_bytes)
        digest.update(self.canonical_json().encode())
        return digest.hexdigest()[:24]

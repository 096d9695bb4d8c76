"""CIE Lab statistics of images and a Gaussian prior over them.

A reference set is summarised by six Gaussians: one each for the per-image
mean and standard deviation of L, a and b. An image is scored by the sum of
its squared standardised deviations (halved) from those Gaussians.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, check_image

STAT_NAMES = ("mean_L", "mean_a", "mean_b", "std_L", "std_a", "std_b")

# sRGB (D65) linear RGB -> XYZ
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# Reference white = XYZ of RGB (1, 1, 1), so that neutral inputs have a = b = 0.
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def srgb_to_linear(values):
    values = np.asarray(values, dtype=np.float64)
    return np.where(values <= 0.04045, values / 12.92, ((values + 0.055) / 1.055) ** 2.4)


def _lab_f(t):
    return np.where(t > _EPS, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)


def rgb_to_lab_array(rgb):
    """Unvalidated Lab conversion of an ``(..., 3)`` array in [0, 1]."""
    xyz = srgb_to_linear(rgb) @ _RGB_TO_XYZ.T / _WHITE
    f = _lab_f(xyz)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def rgb_to_lab(img):
    """Convert an sRGB image in [0, 1] to CIE Lab under D65."""
    return rgb_to_lab_array(check_image(img))


def lab_channel_stats(lab):
    """(mu_L, mu_a, mu_b, sigma_L, sigma_a, sigma_b), population std."""
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[2] != 3 or lab.shape[0] * lab.shape[1] == 0:
        raise DataError(f"Lab image must be a non-empty (H, W, 3) array, got {lab.shape}")
    flat = lab.reshape(-1, 3)
    return np.concatenate([flat.mean(axis=0), flat.std(axis=0)])


def image_lab_stats(img):
    return lab_channel_stats(rgb_to_lab(img))


@dataclass(frozen=True)
class LabStatsModel:
    mu: np.ndarray
    sigma: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=np.float64).reshape(-1)
        if mu.shape != (6,) or sigma.shape != (6,):
            raise DataError("LabStatsModel needs six (mu, sigma) pairs")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise DataError("LabStatsModel parameters must be finite")
        if np.any(sigma <= 0):
            bad = [STAT_NAMES[k] for k in np.flatnonzero(sigma <= 0)]
            raise DataError(f"LabStatsModel sigma must be > 0 (zero spread in {', '.join(bad)})")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def __eq__(self, other):
        if not isinstance(other, LabStatsModel):
            return NotImplemented
        return np.array_equal(self.mu, other.mu) and np.array_equal(self.sigma, other.sigma)

    __hash__ = None

    def score_stats(self, stats):
        z = (np.asarray(stats, dtype=np.float64) - self.mu) / self.sigma
        return float(0.5 * np.sum(z * z))

    def to_dict(self):
        return {
            "statistics": [
                {"name": n, "mu": float(m), "sigma": float(s)}
                for n, m, s in zip(STAT_NAMES, self.mu, self.sigma)
            ],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            by_name = {s["name"]: s for s in data["statistics"]}
            mu = [by_name[n]["mu"] for n in STAT_NAMES]
            sigma = [by_name[n]["sigma"] for n in STAT_NAMES]
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed Lab model record: {exc}") from None
        return cls(mu, sigma, data.get("metadata", {}))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise DataError(f"cannot read Lab model {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"Lab model {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def fit_stats(stats, metadata=None):
    """Gaussian maximum-likelihood-style fit over a ``(n_images, 6)`` array."""
    stats = np.asarray(stats, dtype=np.float64)
    if stats.ndim != 2 or stats.shape[1] != 6:
        raise DataError(f"expected an (n, 6) statistics array, got {stats.shape}")
    if stats.shape[0] < 2:
        raise DataError(f"fitting needs at least 2 images, got {stats.shape[0]}")
    # sample std across images: these estimate a population distribution
    return LabStatsModel(stats.mean(axis=0), stats.std(axis=0, ddof=1), metadata or {})


def fit_model(reference_set, metadata=None):
    """Fit the six-Gaussian Lab model to a list of images."""
    images = list(reference_set)
    if len(images) < 2:
        raise DataError(f"fitting needs at least 2 images, got {len(images)}")
    stats = np.array([image_lab_stats(img) for img in images])
    meta = {"image_count": len(images)}
    meta.update(metadata or {})
    return fit_stats(stats, meta)


def lab_score(img, model):
    """Sum over the six statistics of (x - mu)^2 / (2 sigma^2)."""
    return model.score_stats(image_lab_stats(img))


class LabGaussianPrior(BaseEstimator):
    """Estimator wrapper around :func:`fit_model` / :func:`lab_score`.

    ``fit`` takes a sequence of RGB images; ``score_samples`` returns the
    Lab score of each image (lower is closer to the reference set).
    """

    def fit(self, X, y=None):
        self.model_ = fit_model(X)
        self.mu_ = self.model_.mu
        self.sigma_ = self.model_.sigma
        return self

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return np.array([lab_score(img, self.model_) for img in X])

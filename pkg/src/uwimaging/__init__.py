"""Underwater image formation toolkit.

Forward degradation and inversion of the underwater imaging model, Jerlov
water-type tables, background-light estimation, synthetic data generation,
search-based parameter estimation, Lab statistics priors and quality metrics.
"""

from ._validation import DataError
from .backlight import coupled_backlight, pre_backlight
from .colorstats import LabGaussianPrior, LabStatsModel, fit_model, lab_score, rgb_to_lab
from .estimator import DegradationEstimator, Estimate, EstimatorConfig, enhance, estimate
from .estimator import restoration_objective
from .imaging import (
    ABSOLUTE,
    RELATIVE,
    DegradationParams,
    DepthMap,
    absolutize_depth,
    compute_transmissions,
    degrade,
    restore,
)
from .io import load_depth, load_image, save_image
from .metrics import psnr, ssim, uciqe, uiqm
from .synthesis import synthesize_batch, synthesize_one
from .water import WaterType, WaterTypeTable, load_table

__version__ = "0.1.0"

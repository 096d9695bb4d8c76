"""Full-reference and no-reference quality metrics, plus scoring losses."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from ._validation import DataError, check_image, check_plane, check_same_size
from .colorstats import rgb_to_lab_array

PSNR_CAP = 99.0
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def luma(img):
    return np.asarray(img, dtype=np.float64) @ LUMA_WEIGHTS


def _pair(a, b):
    a = check_image(a, "first image")
    b = check_image(b, "second image")
    if a.shape != b.shape:
        raise DataError(f"image sizes differ: {a.shape[:2]} vs {b.shape[:2]}")
    return a, b


def psnr(a, b):
    """PSNR in dB with peak 1.0; bit-identical inputs report ``PSNR_CAP``."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return 10.0 * np.log10(1.0 / mse)


def ssim_plane(x, y, sigma=1.5, win_size=11, k1=0.01, k2=0.03, data_range=1.0):
    """Mean SSIM of two 2-D arrays over the fully-covered window positions."""
    if min(x.shape) < win_size:
        raise DataError(f"SSIM needs both sides >= {win_size}, got {x.shape}")
    radius = (win_size - 1) // 2
    truncate = radius / sigma  # scipy radius = int(truncate * sigma + 0.5) -> win_size taps

    def blur(v):
        return ndimage.gaussian_filter(v, sigma, truncate=truncate, mode="reflect")

    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_x, mu_y = blur(x), blur(y)
    sxx = blur(x * x) - mu_x * mu_x
    syy = blur(y * y) - mu_y * mu_y
    sxy = blur(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    smap = num / den
    return float(smap[radius:-radius, radius:-radius].mean())


def ssim(a, b):
    """Gaussian-window SSIM (11x11, sigma 1.5) on Rec. 601 luma."""
    a, b = _pair(a, b)
    return ssim_plane(luma(a), luma(b))


def sobel_magnitude(plane):
    plane = np.asarray(plane, dtype=np.float64)
    gx = ndimage.sobel(plane, axis=1, mode="reflect")
    gy = ndimage.sobel(plane, axis=0, mode="reflect")
    return np.hypot(gx, gy)


# --- UCIQE ------------------------------------------------------------------

@dataclass(frozen=True)
class UCIQEConfig:
    """Weights for chroma spread, luminance contrast and mean saturation.

    Lightness and chroma are divided by 100 so each term is roughly unit
    scale; saturation is C / sqrt(C^2 + L^2).
    """

    c1: float = 0.4680
    c2: float = 0.2745
    c3: float = 0.2576
    contrast_fraction: float = 0.01


def _tail_count(n, fraction):
    return max(1, int(round(fraction * n)))


def uciqe_terms(img, config=UCIQEConfig()):
    img = check_image(img)
    lab = rgb_to_lab_array(img).reshape(-1, 3) / 100.0
    lightness = lab[:, 0]
    chroma = np.hypot(lab[:, 1], lab[:, 2])
    sigma_c = float(chroma.std())
    k = _tail_count(lightness.size, config.contrast_fraction)
    ordered = np.sort(lightness)
    con_l = float(ordered[-k:].mean() - ordered[:k].mean())
    norm = np.hypot(chroma, lightness)
    sat = np.divide(chroma, norm, out=np.zeros_like(chroma), where=norm > 0)
    return sigma_c, con_l, float(sat.mean())


def uciqe(img, config=UCIQEConfig()):
    sigma_c, con_l, mu_s = uciqe_terms(img, config)
    return config.c1 * sigma_c + config.c2 * con_l + config.c3 * mu_s


# --- UIQM -------------------------------------------------------------------

@dataclass(frozen=True)
class UIQMConfig:
    """Weights and block sizes for colourfulness, sharpness and contrast.

    Channels are processed on the 0-255 scale. ``alpha_low``/``alpha_high``
    are the trimmed fractions for the colourfulness statistics and ``gamma``
    is the PLIP gray-tone range used by the contrast measure.
    """

    c1: float = 0.0282
    c2: float = 0.2953
    c3: float = 3.5753
    alpha_low: float = 0.1
    alpha_high: float = 0.1
    eme_block: int = 8
    amee_block: int = 16
    gamma: float = 1026.0


def _trimmed(values, low, high):
    ordered = np.sort(values.reshape(-1))
    n = ordered.size
    lo, hi = int(low * n), int(high * n)
    kept = ordered[lo : n - hi]
    if kept.size == 0:
        kept = ordered
    mu = kept.mean()
    return mu, np.mean((kept - mu) ** 2)


def uicm(img255, config=UIQMConfig()):
    r, g, b = img255[..., 0], img255[..., 1], img255[..., 2]
    mu_rg, var_rg = _trimmed(r - g, config.alpha_low, config.alpha_high)
    mu_yb, var_yb = _trimmed(0.5 * (r + g) - b, config.alpha_low, config.alpha_high)
    return float(-0.0268 * np.hypot(mu_rg, mu_yb) + 0.1586 * np.sqrt(var_rg + var_yb))


def _block_extrema(plane, block):
    rows = np.arange(0, plane.shape[0], block)
    cols = np.arange(0, plane.shape[1], block)
    hi = np.maximum.reduceat(np.maximum.reduceat(plane, rows, axis=0), cols, axis=1)
    lo = np.minimum.reduceat(np.minimum.reduceat(plane, rows, axis=0), cols, axis=1)
    return lo, hi


def eme(plane, block=8):
    """Block log-ratio contrast; ratios of (max + 1) / (min + 1) keep flat blocks at 0."""
    lo, hi = _block_extrema(plane, block)
    return float(2.0 / lo.size * np.sum(np.log((hi + 1.0) / (lo + 1.0))))


def uism(img255, config=UIQMConfig()):
    total = 0.0
    for c, weight in enumerate(LUMA_WEIGHTS):
        channel = img255[..., c]
        edges = channel / 255.0 * sobel_magnitude(channel)
        total += weight * eme(edges, config.eme_block)
    return float(total)


def logamee(plane, block=16, gamma=1026.0):
    lo, hi = _block_extrema(plane, block)
    diff = gamma * (hi - lo) / (gamma - lo)
    plip_sum = hi + lo - hi * lo / gamma
    m = np.divide(diff, plip_sum, out=np.zeros_like(diff), where=plip_sum != 0)
    terms = np.where(m > 0, m * np.log(np.where(m > 0, m, 1.0)), 0.0)
    s = float(terms.sum())
    w = 1.0 / lo.size
    return gamma - gamma * (1.0 - s / gamma) ** w


def uiconm(img255, config=UIQMConfig()):
    return float(logamee(luma(img255), config.amee_block, config.gamma))


def uiqm_terms(img, config=UIQMConfig()):
    img255 = check_image(img) * 255.0
    return uicm(img255, config), uism(img255, config), uiconm(img255, config)


def uiqm(img, config=UIQMConfig()):
    a, b, c = uiqm_terms(img, config)
    return config.c1 * a + config.c2 * b + config.c3 * c


# --- losses -----------------------------------------------------------------

@dataclass(frozen=True)
class CombinedWeights:
    alpha1: float = 0.6
    alpha2: float = 0.2
    alpha3: float = 0.2

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise DataError("combined loss weights must be >= 0")


def proximity_from_depth(depth_rel):
    """Turn a depth map (larger = farther) into [0, 1] proximity weights."""
    depth = check_plane(depth_rel)
    span = depth.max() - depth.min()
    if span == 0:
        return np.ones_like(depth)
    return 1.0 - (depth - depth.min()) / span


def weighted_l1(enc, ref, proximity):
    enc, ref = _pair(enc, ref)
    prox = check_plane(proximity, "proximity")
    check_same_size(enc, prox, ("image", "proximity"))
    if prox.min() < 0 or prox.max() > 1:
        raise DataError("proximity weights must lie in [0, 1]")
    return float(np.mean(prox[..., None] * np.abs(enc - ref)))


def weighted_reference_loss(enc, ref, proximity):
    return weighted_l1(enc, ref, proximity) + (1.0 - ssim(enc, ref))


def gradient_term(a, b):
    a, b = _pair(a, b)
    return float(np.mean(np.abs(sobel_magnitude(luma(a)) - sobel_magnitude(luma(b)))))


def degradation_consistency_loss(raw, predicted_degraded):
    """(1 - SSIM) plus the mean absolute difference of luma Sobel magnitudes."""
    return (1.0 - ssim(raw, predicted_degraded)) + gradient_term(raw, predicted_degraded)


def combined_loss(l_ref, l_deg, l_lab, w=CombinedWeights()):
    return w.alpha1 * l_ref + w.alpha2 * l_deg + w.alpha3 * l_lab


@dataclass
class MetricReport:
    uiqm: float
    uciqe: float
    psnr: Optional[float] = None
    ssim: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def evaluate(img, reference=None):
    report = MetricReport(uiqm=float(uiqm(img)), uciqe=float(uciqe(img)))
    if reference is not None:
        report.psnr = float(psnr(img, reference))
        report.ssim = float(ssim(img, reference))
    return report

"""Background-light pre-estimation and channel coupling.

Statistics are taken on the 0-255 scale because the empirical fits for the
red and green/blue channels were derived on 8-bit pixel values.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import DataError, check_image, check_triple


@dataclass(frozen=True)
class ChannelStats:
    median: float
    mean: float
    stdev: float


def channel_stats(img):
    """Median, mean and population standard deviation of each RGB channel."""
    img = check_image(img)
    flat = img.reshape(-1, 3) * 255.0
    return [
        ChannelStats(float(np.median(flat[:, c])), float(flat[:, c].mean()), float(flat[:, c].std()))
        for c in range(3)
    ]


def red_backlight_255(median_red):
    return 140.0 / (1.0 + 14.4 * np.exp(-0.034 * median_red))


def bluegreen_backlight_255(mean, stdev):
    return 1.13 * mean + 1.11 * stdev - 25.6


def pre_backlight(stats, return_flags=False):
    """Initial background light in [0, 1] from per-channel statistics.

    With ``return_flags`` also returns a boolean triple marking channels
    that had to be clamped into [0, 255].
    """
    if len(stats) != 3:
        raise DataError("pre_backlight needs statistics for exactly 3 channels")
    r, g, b = stats
    raw = np.array(
        [
            red_backlight_255(r.median),
            bluegreen_backlight_255(g.mean, g.stdev),
            bluegreen_backlight_255(b.mean, b.stdev),
        ]
    )
    flags = (raw < 0.0) | (raw > 255.0)
    out = np.clip(raw, 0.0, 255.0) / 255.0
    if return_flags:
        return out, flags
    return out


def coupled_ratios(beta_d, beta_b):
    """Per-channel factor k_c with B_inf_c = k_c * B_inf_g (k_g = 1)."""
    beta_d = np.asarray(beta_d, dtype=np.float64)
    beta_b = np.asarray(beta_b, dtype=np.float64)
    return (beta_d[1] * beta_b) / (beta_d * beta_b[1])


def coupled_backlight(b_inf_g, beta_d, beta_b, return_unclamped=False):
    """Complete a green background light into an RGB triple.

    Red and blue scale with beta_b / beta_d relative to green. Returns the
    clamped triple and a per-channel clamp flag; with ``return_unclamped``
    the pre-clamp triple is returned as a third element.
    """
    beta_d = check_triple(beta_d, "beta_d")
    beta_b = check_triple(beta_b, "beta_b")
    if np.any(beta_d == 0.0) or beta_b[1] == 0.0:
        raise DataError("coupled_backlight: zero coefficient in a denominator")
    raw = coupled_ratios(beta_d, beta_b) * float(b_inf_g)
    raw[1] = float(b_inf_g)
    flags = (raw < 0.0) | (raw > 1.0)
    out = np.clip(raw, 0.0, 1.0)
    if return_unclamped:
        return out, flags, raw
    return out, flags

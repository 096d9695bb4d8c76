"""Slow, loop-based re-implementations used as independent test oracles.

These deliberately avoid the package's vectorised helpers: colour conversion
is done pixel by pixel with the math module, Sobel filtering by explicit
symmetric padding and 3x3 sums, and block statistics by plain loops.
"""

import math

import numpy as np

M = (
    (0.4124564, 0.3575761, 0.1804375),
    (0.2126729, 0.7151522, 0.0721750),
    (0.0193339, 0.1191920, 0.9503041),
)
WHITE = tuple(sum(row) for row in M)


def lab_pixel(r, g, b):
    def lin(v):
        return v / 12.92 if v <= 0.04045 else ((v + 0.055) / 1.055) ** 2.4

    rgb = (lin(r), lin(g), lin(b))
    xyz = [sum(M[i][k] * rgb[k] for k in range(3)) / WHITE[i] for i in range(3)]

    def f(t):
        return t ** (1.0 / 3.0) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = (f(t) for t in xyz)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def uciqe_loop(img):
    h, w, _ = img.shape
    L, C, S = [], [], []
    for y in range(h):
        for x in range(w):
            l, a, b = lab_pixel(*img[y, x])
            l, a, b = l / 100, a / 100, b / 100
            c = math.sqrt(a * a + b * b)
            L.append(l)
            C.append(c)
            n = math.sqrt(c * c + l * l)
            S.append(c / n if n > 0 else 0.0)
    n = len(L)
    mc = sum(C) / n
    sigma_c = math.sqrt(sum((c - mc) ** 2 for c in C) / n)
    k = max(1, int(round(0.01 * n)))
    srt = sorted(L)
    con = sum(srt[-k:]) / k - sum(srt[:k]) / k
    return 0.4680 * sigma_c + 0.2745 * con + 0.2576 * sum(S) / n


def sobel_loop(plane):
    p = np.pad(plane, 1, mode="symmetric")
    h, w = plane.shape
    out = np.zeros_like(plane)
    for y in range(h):
        for x in range(w):
            win = p[y : y + 3, x : x + 3]
            gx = (win[0, 2] + 2 * win[1, 2] + win[2, 2]) - (win[0, 0] + 2 * win[1, 0] + win[2, 0])
            gy = (win[2, 0] + 2 * win[2, 1] + win[2, 2]) - (win[0, 0] + 2 * win[0, 1] + win[0, 2])
            out[y, x] = math.sqrt(gx * gx + gy * gy)
    return out


def _blocks(plane, size):
    h, w = plane.shape
    for y in range(0, h, size):
        for x in range(0, w, size):
            yield plane[y : y + size, x : x + size]


def _trim_stats(values):
    srt = sorted(values)
    n = len(srt)
    kept = srt[int(0.1 * n) : n - int(0.1 * n)]
    mu = sum(kept) / len(kept)
    return mu, sum((v - mu) ** 2 for v in kept) / len(kept)


def uiqm_loop(img):
    img = img * 255.0
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    mu_rg, v_rg = _trim_stats(list((r - g).ravel()))
    mu_yb, v_yb = _trim_stats(list((0.5 * (r + g) - b).ravel()))
    uicm = -0.0268 * math.sqrt(mu_rg ** 2 + mu_yb ** 2) + 0.1586 * math.sqrt(v_rg + v_yb)

    uism = 0.0
    for c, weight in enumerate((0.299, 0.587, 0.114)):
        ch = img[..., c]
        edges = ch / 255.0 * sobel_loop(ch)
        blocks = list(_blocks(edges, 8))
        total = sum(math.log((blk.max() + 1) / (blk.min() + 1)) for blk in blocks)
        uism += weight * 2.0 / len(blocks) * total

    gamma = 1026.0
    lum = 0.299 * r + 0.587 * g + 0.114 * b
    blocks = list(_blocks(lum, 16))
    s = 0.0
    for blk in blocks:
        hi, lo = float(blk.max()), float(blk.min())
        diff = gamma * (hi - lo) / (gamma - lo)
        plus = hi + lo - hi * lo / gamma
        m = diff / plus if plus != 0 else 0.0
        if m > 0:
            s += m * math.log(m)
    uiconm = gamma - gamma * (1 - s / gamma) ** (1.0 / len(blocks))
    return 0.0282 * uicm + 0.2953 * uism + 3.5753 * uiconm


def restore_pixelwise(img, depth, beta_d, beta_b, b_inf, floor=0.01):
    """Per-pixel inversion with the math module; returns (restored, clamped-or-floored mask)."""
    h, w, _ = img.shape
    out = np.zeros_like(img)
    mask = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            d = depth[y, x]
            for c in range(3):
                t = math.exp(-beta_d[c] * d)
                v = (img[y, x, c] - b_inf[c] * (1 - math.exp(-beta_b[c] * d))) / max(t, floor)
                if v < 0 or v > 1 or t < floor:
                    mask[y, x] = True
                out[y, x, c] = min(max(v, 0.0), 1.0)
    return out, mask


def lab_to_rgb(lab):
    """Inverse of the D65 / sRGB Lab transform (vectorised; no gamut handling)."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    delta = 6.0 / 29.0

    def finv(f):
        return np.where(f > delta, f ** 3, 3 * delta * delta * (f - 4.0 / 29.0))

    xyz = np.stack([finv(fx), finv(fy), finv(fz)], axis=-1) * np.array(WHITE)
    lin = xyz @ np.linalg.inv(np.array(M)).T
    return np.where(lin <= 0.0031308, 12.92 * lin, 1.055 * np.abs(lin) ** (1 / 2.4) - 0.055)

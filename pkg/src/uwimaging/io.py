"""File formats: 8-bit RGB images, 16-bit PGM / float PFM depth, JSON artifacts."""

import json
import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._validation import DataError
from .imaging import RELATIVE, DepthMap

IMAGE_SUFFIXES = (".png", ".ppm")
DEPTH_SUFFIXES = (".pgm", ".pfm")


def load_image(path):
    """Read an 8-bit RGB PNG/PPM as float64 in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() not in IMAGE_SUFFIXES:
        raise DataError(f"{path}: unsupported image format (use PNG or PPM)")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            data = np.asarray(im)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from None
    if mode != "RGB":
        raise DataError(f"{path}: expected an 8-bit RGB image, got mode {mode!r}")
    return data.astype(np.float64) / 255.0


def to_uint8(img):
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path, img):
    path = Path(path)
    fmt = {".png": "PNG", ".ppm": "PPM"}.get(path.suffix.lower())
    if fmt is None:
        raise DataError(f"{path}: unsupported image format (use PNG or PPM)")
    Image.fromarray(to_uint8(img), mode="RGB").save(path, format=fmt)


_PNM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _read_header_tokens(buf, count):
    tokens, pos = [], 0
    for _ in range(count):
        m = _PNM_TOKEN.match(buf, pos)
        if m is None:
            raise DataError("truncated header")
        tokens.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path):
    buf = Path(path).read_bytes()
    try:
        (magic, w, h, maxval), offset = _read_header_tokens(buf, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (ValueError, DataError):
        raise DataError(f"{path}: malformed PGM header") from None
    if magic != b"P5":
        raise DataError(f"{path}: only binary (P5) PGM depth maps are supported")
    if not 0 < maxval < 65536 or w < 1 or h < 1:
        raise DataError(f"{path}: invalid PGM dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h * dtype.itemsize
    if len(buf) - offset < n:
        raise DataError(f"{path}: truncated PGM raster")
    return np.frombuffer(buf, dtype=dtype, count=w * h, offset=offset).reshape(h, w).astype(np.float64)


def write_pgm(path, values, maxval=65535):
    values = np.asarray(values)
    h, w = values.shape
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.clip(np.round(values), 0, maxval).astype(dtype)
    Path(path).write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + raster.tobytes())


def read_pfm(path):
    buf = Path(path).read_bytes()
    try:
        (magic, w, h, scale), offset = _read_header_tokens(buf, 4)
        w, h, scale = int(w), int(h), float(scale)
    except (ValueError, DataError):
        raise DataError(f"{path}: malformed PFM header") from None
    if magic != b"Pf":
        raise DataError(f"{path}: only single-channel (Pf) PFM depth maps are supported")
    if scale == 0 or w < 1 or h < 1:
        raise DataError(f"{path}: invalid PFM header")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    if len(buf) - offset < w * h * 4:
        raise DataError(f"{path}: truncated PFM raster")
    data = np.frombuffer(buf, dtype=dtype, count=w * h, offset=offset).reshape(h, w)
    # PFM rows run bottom to top
    return data[::-1].astype(np.float64)


def write_pfm(path, values):
    values = np.asarray(values, dtype="<f4")
    h, w = values.shape
    Path(path).write_bytes(f"Pf\n{w} {h}\n-1.0\n".encode() + values[::-1].tobytes())


def load_depth(path, invert=False):
    """Read a depth file and min-max normalise it into a relative depth map.

    ``invert`` flips the result (v -> 1 - v) for sources that store inverse
    depth or disparity, where larger means nearer.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    if suffix == ".pgm":
        raw = read_pgm(path)
    elif suffix == ".pfm":
        raw = read_pfm(path)
    else:
        raise DataError(f"{path}: unsupported depth format (use 16-bit PGM or PFM)")
    if not np.all(np.isfinite(raw)):
        raise DataError(f"{path}: depth map contains non-finite values")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        raise DataError(f"{path}: depth map is constant (zero range)")
    rel = (raw - lo) / (hi - lo)
    if invert:
        rel = 1.0 - rel
    return DepthMap(rel, RELATIVE)


def save_depth(path, depth):
    """Write a relative depth map as 16-bit PGM or PFM (by suffix)."""
    values = depth.values if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        write_pgm(path, values * 65535.0)
    elif suffix == ".pfm":
        write_pfm(path, values)
    else:
        raise DataError(f"{path}: unsupported depth format (use .pgm or .pfm)")


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj))


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def list_images(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def find_depth(directory, stem):
    for suffix in DEPTH_SUFFIXES:
        candidate = Path(directory) / f"{stem}{suffix}"
        if candidate.is_file():
            return candidate
    raise DataError(f"no depth map for {stem!r} in {directory}")

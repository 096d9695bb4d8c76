"""Underwater image formation: forward degradation and its inversion.

The model is applied per pixel and channel::

    I = J * exp(-beta_d * d) + B_inf * (1 - exp(-beta_b * d))

on display-referred intensities normalised to [0, 1].
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import (
    DataError,
    check_image,
    check_plane,
    check_same_size,
    check_scale,
    check_triple,
)

RELATIVE = "relative"
ABSOLUTE = "absolute"

#: Lower bound on the direct transmission used when inverting the model.
TRANSMISSION_FLOOR = 0.01


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth, either relative ([0, 1], unitless) or absolute (metres)."""

    values: np.ndarray
    kind: str = RELATIVE

    def __post_init__(self):
        if self.kind not in (RELATIVE, ABSOLUTE):
            raise DataError(f"unknown depth kind {self.kind!r}")
        values = check_plane(self.values, "depth")
        if self.kind == RELATIVE and (values.min() < 0.0 or values.max() > 1.0):
            raise DataError("relative depth values must lie in [0, 1]")
        if self.kind == ABSOLUTE and values.min() < 0.0:
            raise DataError("absolute depth values must be >= 0")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class DegradationParams:
    """Per-channel (R, G, B) coefficients plus the absolute depth scale."""

    beta_d: np.ndarray
    beta_b: np.ndarray
    b_inf: np.ndarray
    depth_scale: tuple = (0.5, 10.0)
    attenuation_type: Optional[str] = None
    scattering_type: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "beta_d", check_triple(self.beta_d, "beta_d"))
        object.__setattr__(self, "beta_b", check_triple(self.beta_b, "beta_b"))
        object.__setattr__(self, "b_inf", check_triple(self.b_inf, "b_inf", 0.0, 1.0))
        object.__setattr__(self, "depth_scale", check_scale(self.depth_scale))

    def replace(self, **changes):
        fields = dict(
            beta_d=self.beta_d,
            beta_b=self.beta_b,
            b_inf=self.b_inf,
            depth_scale=self.depth_scale,
            attenuation_type=self.attenuation_type,
            scattering_type=self.scattering_type,
        )
        fields.update(changes)
        return DegradationParams(**fields)

    def to_dict(self):
        return {
            "beta_d": [float(v) for v in self.beta_d],
            "beta_b": [float(v) for v in self.beta_b],
            "b_inf": [float(v) for v in self.b_inf],
            "depth_scale": [float(v) for v in self.depth_scale],
            "attenuation_type": self.attenuation_type,
            "scattering_type": self.scattering_type,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                beta_d=data["beta_d"],
                beta_b=data["beta_b"],
                b_inf=data["b_inf"],
                depth_scale=tuple(data["depth_scale"]),
                attenuation_type=data.get("attenuation_type"),
                scattering_type=data.get("scattering_type"),
            )
        except KeyError as exc:
            raise DataError(f"parameter record is missing field {exc.args[0]!r}") from None

    def __eq__(self, other):
        if not isinstance(other, DegradationParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


@dataclass(frozen=True)
class TransmissionMaps:
    direct: np.ndarray = field(repr=False)
    backscatter_complement: np.ndarray = field(repr=False)


def _absolute_values(d):
    if isinstance(d, DepthMap):
        if d.kind != ABSOLUTE:
            raise DataError("expected an absolute depth map (metres); got a relative one")
        return d.values
    values = check_plane(d, "depth")
    if values.min() < 0.0:
        raise DataError("absolute depth values must be >= 0")
    return values


def absolutize_depth(rel, scale):
    """Map a relative depth map onto ``[d_min, d_max]`` metres."""
    if isinstance(rel, DepthMap):
        if rel.kind != RELATIVE:
            raise DataError("absolutize_depth expects a relative depth map")
    else:
        rel = DepthMap(rel, RELATIVE)
    d_min, d_max = check_scale(scale)
    return DepthMap(d_min + rel.values * (d_max - d_min), ABSOLUTE)


def compute_transmissions(d, params):
    depth = _absolute_values(d)[..., None]
    direct = np.exp(-params.beta_d * depth)
    back = 1.0 - np.exp(-params.beta_b * depth)
    return TransmissionMaps(direct, back)


def degrade(j, d, params):
    """Apply the formation model to a clean image.

    Returns
    -------
    image : ndarray (H, W, 3)
        Degraded image clamped to [0, 1].
    clip_mask : ndarray (H, W) of bool
        True where any channel had to be clamped.
    """
    j = check_image(j, "clean image")
    depth = _absolute_values(d)
    check_same_size(j, depth)
    t = compute_transmissions(depth, params)
    raw = j * t.direct + params.b_inf * t.backscatter_complement
    clip_mask = np.any((raw < 0.0) | (raw > 1.0), axis=2)
    return np.clip(raw, 0.0, 1.0), clip_mask


def restore(i, d, params, floor=TRANSMISSION_FLOOR):
    """Invert the formation model with a floor on the direct transmission.

    Pixels whose output was clamped, or where the floor was active in any
    channel, are flagged in the returned mask: they are not exact inverses.
    """
    i = check_image(i, "degraded image")
    depth = _absolute_values(d)
    check_same_size(i, depth)
    t = compute_transmissions(depth, params)
    direct = np.maximum(t.direct, floor)
    raw = (i - params.b_inf * t.backscatter_complement) / direct
    clip_mask = np.any((raw < 0.0) | (raw > 1.0) | (t.direct < floor), axis=2)
    return np.clip(raw, 0.0, 1.0), clip_mask

"""Synthetic degraded images with ground-truth parameters from clean RGB-D pairs."""

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ._validation import DataError, check_image, check_same_size, check_scale
from .backlight import channel_stats, coupled_backlight, pre_backlight
from .imaging import RELATIVE, DegradationParams, DepthMap, absolutize_depth, degrade
from .water import sample_type_pair

DEFAULT_SCALE_BOUNDS = (0.5, 10.0)


@dataclass
class SyntheticSample:
    clean: np.ndarray = field(repr=False)
    depth_rel: DepthMap = field(repr=False)
    params: DegradationParams
    degraded: np.ndarray = field(repr=False)
    clip_fraction: float
    seed: int
    b_inf_unclamped: np.ndarray
    backlight_index: int = 0

    def record(self):
        return {
            "seed": int(self.seed),
            "params": self.params.to_dict(),
            "b_inf_unclamped": [float(v) for v in self.b_inf_unclamped],
            "clip_fraction": float(self.clip_fraction),
            "backlight_index": int(self.backlight_index),
        }


def derive_seed(master_seed, position):
    """Seed of the sample at ``position``; depends only on (master, position)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(position),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _as_relative(depth_rel):
    if isinstance(depth_rel, DepthMap):
        if depth_rel.kind != RELATIVE:
            raise DataError("synthesis expects a relative depth map")
        return depth_rel
    return DepthMap(depth_rel, RELATIVE)


def synthesize_one(clean, depth_rel, table, backlight_source, scale_bounds=DEFAULT_SCALE_BOUNDS,
                   seed=0, backlight_index=0):
    """Degrade ``clean`` with a randomly drawn water-type pair.

    The green background light comes from the blue/green empirical fit on
    ``backlight_source``; red and blue follow from the coefficient ratios.
    The depth scale is exactly ``scale_bounds``.
    """
    clean = check_image(clean, "clean image")
    depth_rel = _as_relative(depth_rel)
    check_same_size(clean, depth_rel.values, ("clean image", "depth map"))
    scale = check_scale(scale_bounds)

    attenuation, scattering = sample_type_pair(table, seed)
    b_inf_g = pre_backlight(channel_stats(backlight_source))[1]
    b_inf, _, b_inf_raw = coupled_backlight(
        b_inf_g, attenuation.beta_d, scattering.beta_b, return_unclamped=True
    )
    params = DegradationParams(
        beta_d=attenuation.beta_d,
        beta_b=scattering.beta_b,
        b_inf=b_inf,
        depth_scale=scale,
        attenuation_type=attenuation.name,
        scattering_type=scattering.name,
    )
    degraded, mask = degrade(clean, absolutize_depth(depth_rel, scale), params)
    return SyntheticSample(
        clean=clean,
        depth_rel=depth_rel,
        params=params,
        degraded=degraded,
        clip_fraction=float(mask.mean()),
        seed=int(seed),
        b_inf_unclamped=b_inf_raw,
        backlight_index=int(backlight_index),
    )


def pick_backlight(seed, n_sources):
    return int(np.random.default_rng([int(seed), 1]).integers(n_sources))


def synthesize_batch(corpus, table, backlight_corpus, scale_bounds=DEFAULT_SCALE_BOUNDS, seed=0,
                     n_jobs=None):
    """Synthesize one sample per ``(clean, depth_rel)`` pair in ``corpus``.

    Each position gets its own derived seed, which also selects that
    sample's background-light source image, so output is independent of
    scheduling.
    """
    corpus = list(corpus)
    backlight_corpus = list(backlight_corpus)
    if not corpus:
        raise DataError("synthesis corpus is empty")
    if not backlight_corpus:
        raise DataError("background-light corpus is empty")
    check_scale(scale_bounds)

    def one(position, clean, depth_rel):
        sample_seed = derive_seed(seed, position)
        k = pick_backlight(sample_seed, len(backlight_corpus))
        return synthesize_one(clean, depth_rel, table, backlight_corpus[k], scale_bounds,
                              sample_seed, backlight_index=k)

    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(one)(i, clean, depth) for i, (clean, depth) in enumerate(corpus)
    )


def build_manifest(samples, master_seed, paths=None):
    """JSON-ready manifest; ``paths`` optionally maps sample index -> file dict."""
    entries = []
    for i, sample in enumerate(samples):
        entry = {"index": i}
        if paths is not None:
            entry["files"] = dict(paths[i])
        entry.update(sample.record())
        entries.append(entry)
    return {"master_seed": int(master_seed), "count": len(entries), "samples": entries}


def params_from_manifest(manifest):
    return [DegradationParams.from_dict(entry["params"]) for entry in manifest["samples"]]

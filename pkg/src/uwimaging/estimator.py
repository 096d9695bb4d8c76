"""Search-based estimation of degradation parameters from image + relative depth.

Every ordered (attenuation type, scattering type) pair of the water table is
tried at every depth scale of the grid. A candidate is scored by restoring
the image with it and measuring how plausible the restoration looks: its Lab
statistics under a reference prior, the fraction of pixels the inversion
cannot represent, and the spread of the three channel means.

The green background light is searched per candidate (the blue/green fit on
the degraded image is only a rough starting value), inside the interval where
the inversion stays in range. The best few candidates are then polished by
coordinate descent on (green background light, far depth).
"""

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, check_image, check_same_size
from .backlight import channel_stats, coupled_ratios, pre_backlight
from .colorstats import LabStatsModel, fit_model, rgb_to_lab_array
from .imaging import (
    RELATIVE,
    TRANSMISSION_FLOOR,
    DegradationParams,
    DepthMap,
    absolutize_depth,
    degrade,
    restore,
)
from .water import load_table

DEFAULT_GRID = tuple((0.5, d) for d in (2.0, 4.0, 6.0, 8.0, 10.0))
DEFAULT_WEIGHTS = (1.0, 5.0, 2.0)
_CHUNK = 20  # candidates per vectorised batch; fixed so results ignore n_jobs
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EstimatorConfig:
    """Search settings.

    ``b_inf_window`` bounds the green background light to that distance from
    the blue/green pre-estimate (always intersected with [0, 1]).
    ``search_size`` and ``work_size`` cap the longest image side used for the
    coarse screen and for refinement/final scoring; images are subsampled by
    an integer stride to fit.
    """

    depth_scale_grid: tuple = DEFAULT_GRID
    refine: bool = True
    refine_iters: int = 3
    b_inf_window: float = 1.0
    objective_weights: tuple = DEFAULT_WEIGHTS
    topk: int = 5
    refine_candidates: int = 10
    b_inf_starts: int = 5
    tol: float = 1e-3
    search_size: int = 32
    work_size: int = 128
    n_jobs: int = None

    def __post_init__(self):
        grid = tuple((float(a), float(b)) for a, b in self.depth_scale_grid)
        if not grid:
            raise DataError("depth_scale_grid must not be empty")
        for d_min, d_max in grid:
            if not (np.isfinite(d_min) and np.isfinite(d_max) and 0 <= d_min < d_max):
                raise DataError(f"invalid depth scale ({d_min}, {d_max}): need 0 <= d_min < d_max")
        if len(set(grid)) != len(grid):
            raise DataError("depth_scale_grid contains duplicates")
        weights = tuple(float(w) for w in self.objective_weights)
        if len(weights) != 3 or min(weights) < 0 or not all(np.isfinite(weights)):
            raise DataError("objective_weights must be three finite reals >= 0")
        if max(weights) == 0:
            raise DataError("objective_weights must not all be zero")
        if int(self.refine_iters) != self.refine_iters or self.refine_iters < 0:
            raise DataError("refine_iters must be an integer >= 0")
        if not self.b_inf_window > 0:
            raise DataError("b_inf_window must be > 0")
        for name in ("topk", "refine_candidates", "b_inf_starts", "search_size", "work_size"):
            if int(getattr(self, name)) < 1:
                raise DataError(f"{name} must be >= 1")
        if not self.tol > 0:
            raise DataError("tol must be > 0")
        object.__setattr__(self, "depth_scale_grid", grid)
        object.__setattr__(self, "objective_weights", weights)

    def to_dict(self):
        return {
            "depth_scale_grid": [list(s) for s in self.depth_scale_grid],
            "refine": bool(self.refine),
            "refine_iters": int(self.refine_iters),
            "b_inf_window": float(self.b_inf_window),
            "objective_weights": list(self.objective_weights),
            "topk": int(self.topk),
            "refine_candidates": int(self.refine_candidates),
            "b_inf_starts": int(self.b_inf_starts),
            "tol": float(self.tol),
            "search_size": int(self.search_size),
            "work_size": int(self.work_size),
        }


@dataclass
class Estimate:
    params: DegradationParams
    objective: float
    ranked_alternatives: list = field(default_factory=list)  # [(params, objective)], best first
    metadata: dict = field(default_factory=dict)

    def pairs(self):
        return [(p.attenuation_type, p.scattering_type) for p, _ in self.ranked_alternatives]

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "objective": float(self.objective),
            "ranked_alternatives": [
                {"params": p.to_dict(), "objective": float(o)} for p, o in self.ranked_alternatives
            ],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                params=DegradationParams.from_dict(data["params"]),
                objective=float(data["objective"]),
                ranked_alternatives=[
                    (DegradationParams.from_dict(a["params"]), float(a["objective"]))
                    for a in data.get("ranked_alternatives", [])
                ],
                metadata=dict(data.get("metadata", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed estimate record: {exc}") from None


# --- objective --------------------------------------------------------------

def _batch_objective(restored, clip_fraction, valid, lab_model, weights):
    """Objective of ``n`` restorations of shape (n, P, 3); stats over ``valid`` pixels.

    Candidates with no valid pixel score +inf.
    """
    w_lab, w_clip, w_gray = weights
    wv = valid.astype(np.float64)
    count = wv.sum(axis=1)
    denom = np.maximum(count, 1.0)[:, None]
    lab = rgb_to_lab_array(restored)
    mean = np.einsum("npc,np->nc", lab, wv) / denom
    var = np.einsum("npc,np->nc", (lab - mean[:, None, :]) ** 2, wv) / denom
    z = (np.concatenate([mean, np.sqrt(var)], axis=1) - lab_model.mu) / lab_model.sigma
    lab_term = 0.5 * np.sum(z * z, axis=1)
    m = np.einsum("npc,np->nc", restored, wv) / denom
    gray = (np.abs(m[:, 0] - m[:, 1]) + np.abs(m[:, 0] - m[:, 2]) + np.abs(m[:, 1] - m[:, 2])) / 3.0
    total = w_lab * lab_term + w_clip * np.asarray(clip_fraction, dtype=np.float64) + w_gray * gray
    return np.where(count > 0, total, np.inf)


def restoration_objective(restored, clip_fraction, lab_model, weights=DEFAULT_WEIGHTS, valid=None):
    """w_lab * Lab score + w_clip * clip fraction + w_gray * gray-world deviation.

    The gray-world deviation is the mean pairwise absolute difference of the
    three channel means. ``valid`` (H, W) restricts the colour statistics to
    a subset of pixels; by default all pixels count. Lower is better.
    """
    restored = check_image(restored, "restored image")
    if not isinstance(lab_model, LabStatsModel):
        raise DataError("restoration_objective needs a LabStatsModel")
    weights = tuple(float(w) for w in weights)
    if len(weights) != 3 or min(weights) < 0:
        raise DataError("weights must be three reals >= 0")
    clip_fraction = float(clip_fraction)
    if not 0.0 <= clip_fraction <= 1.0:
        raise DataError(f"clip_fraction must lie in [0, 1], got {clip_fraction}")
    flat = restored.reshape(1, -1, 3)
    if valid is None:
        mask = np.ones(flat.shape[:2], dtype=bool)
    else:
        mask = np.asarray(valid, dtype=bool)
        if mask.shape != restored.shape[:2]:
            raise DataError(f"valid mask shape {mask.shape} != image size {restored.shape[:2]}")
        mask = mask.reshape(1, -1)
    return float(_batch_objective(flat, [clip_fraction], mask, lab_model, weights)[0])


def candidate_objective(degraded, depth_rel, params, lab_model, weights=DEFAULT_WEIGHTS):
    """Score one parameter set the way the search does, at full resolution.

    Pixels saturated in the input, or where the transmission floor is
    active, count as clipped and are left out of the colour statistics.
    """
    img = check_image(degraded, "degraded image")
    rel = _relative_values(depth_rel)
    check_same_size(img, rel, ("degraded image", "depth map"))
    depth = absolutize_depth(rel, params.depth_scale)
    restored, flagged = restore(img, depth, params)
    floored = np.any(np.exp(-params.beta_d * depth.values[..., None]) < TRANSMISSION_FLOOR, axis=2)
    untrusted = floored | np.any((img >= 1.0) | (img <= 0.0), axis=2)
    clip = float((flagged | untrusted).mean())
    if untrusted.all():
        return np.inf
    return restoration_objective(restored, clip, lab_model, weights, valid=~untrusted)


# --- candidate evaluation ----------------------------------------------------

class _Problem:
    """Pixels of one (possibly subsampled) image plus candidate tables."""

    def __init__(self, img, rel, stride, lab_model, weights):
        self.I = img[::stride, ::stride].reshape(-1, 3)
        self.rel = rel[::stride, ::stride].reshape(-1)
        self.saturated = np.any((self.I >= 1.0) | (self.I <= 0.0), axis=1)
        self.lab_model = lab_model
        self.weights = weights

    def _transmissions(self, cand, d_max):
        d = cand.d_min[:, None] + self.rel[None, :] * (d_max - cand.d_min)[:, None]
        t = np.exp(-cand.beta_d[:, None, :] * d[..., None])
        bc = -np.expm1(-cand.beta_b[:, None, :] * d[..., None])
        return t, bc

    def evaluate(self, cand, d_max, b_inf_g):
        """Objective for each candidate row at the given (d_max, green light)."""
        t, bc = self._transmissions(cand, d_max)
        b_inf = np.clip(cand.ratios * b_inf_g[:, None], 0.0, 1.0)
        raw = (self.I[None] - b_inf[:, None, :] * bc) / np.maximum(t, TRANSMISSION_FLOOR)
        untrusted = np.any(t < TRANSMISSION_FLOOR, axis=2) | self.saturated[None]
        clamped = np.any((raw < 0.0) | (raw > 1.0), axis=2)
        clip = (clamped | untrusted).mean(axis=1)
        return _batch_objective(np.clip(raw, 0.0, 1.0), clip, ~untrusted, self.lab_model, self.weights)

    def feasible_interval(self, cand, d_max, lo_w, hi_w):
        """Green-light interval keeping every trusted pixel inside [0, 1] after inversion.

        Returns (a, b) per candidate clipped to the window; when no value is
        fully feasible the interval spans the two violated bounds.
        """
        t, bc = self._transmissions(cand, d_max)
        kbc = cand.ratios[:, None, :] * bc
        I = self.I[None]
        ok = (t >= TRANSMISSION_FLOOR) & ~self.saturated[None, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = np.where(kbc > 0, I / kbc, np.inf)
            lo = np.where(I > t, np.where(kbc > 0, (I - t) / kbc, np.inf), 0.0)
        n = len(d_max)
        h = np.where(ok, hi, np.inf).reshape(n, -1).min(axis=1)
        l = np.where(ok, lo, 0.0).reshape(n, -1).max(axis=1)
        a = np.clip(np.minimum(l, h), lo_w, hi_w)
        b = np.clip(np.maximum(l, h), lo_w, hi_w)
        return a, b


@dataclass
class _Candidates:
    beta_d: np.ndarray
    beta_b: np.ndarray
    ratios: np.ndarray
    d_min: np.ndarray

    def take(self, idx):
        idx = np.asarray(idx)
        return _Candidates(self.beta_d[idx], self.beta_b[idx], self.ratios[idx], self.d_min[idx])


def _golden(f, a, b, tol):
    """Vectorised golden-section minimisation of ``f`` over [a, b] per row."""
    a, b = a.astype(np.float64).copy(), b.astype(np.float64).copy()
    width = float(np.max(b - a)) if a.size else 0.0
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    steps = int(np.ceil(np.log(tol / width) / np.log(_GOLDEN))) if width > tol else 0
    for _ in range(steps):
        left = fc <= fe
        na, nb = np.where(left, a, c), np.where(left, e, b)
        nc = np.where(left, nb - _GOLDEN * (nb - na), e)
        ne = np.where(left, c, na + _GOLDEN * (nb - na))
        fn = f(np.where(left, nc, ne))
        fc, fe = np.where(left, fn, fe), np.where(left, fc, fn)
        a, b, c, e = na, nb, nc, ne
    x = 0.5 * (a + b)
    return x, f(x)


def _multistart(f, a, b, starts, tol):
    """Best of ``starts`` evenly spaced points, then golden section around it."""
    pts = np.array([a + (b - a) * (i + 0.5) / starts for i in range(starts)])
    vals = np.array([f(p) for p in pts])
    k = np.argmin(vals, axis=0)
    rows = np.arange(len(a))
    x0, f0 = pts[k, rows], vals[k, rows]
    span = (b - a) / starts
    x, fx = _golden(f, np.maximum(x0 - span, a), np.minimum(x0 + span, b), tol)
    better = fx < f0
    return np.where(better, x, x0), np.where(better, fx, f0)


def _stride(shape, size):
    return max(1, int(np.ceil(max(shape) / size)))


def _relative_values(depth_rel):
    if isinstance(depth_rel, DepthMap):
        if depth_rel.kind != RELATIVE:
            raise DataError("estimation expects a relative depth map")
        return depth_rel.values
    return DepthMap(depth_rel, RELATIVE).values


def _neighbour_spans(grid):
    """For each scale, the d_max interval spanned by its grid neighbours at the same d_min."""
    spans = []
    for d_min, d_max in grid:
        peers = sorted(b for a, b in grid if a == d_min)
        k = peers.index(d_max)
        spans.append((peers[max(k - 1, 0)], peers[min(k + 1, len(peers) - 1)]))
    return spans


def _parallel(n_jobs, tasks):
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(fn)(*args) for fn, *args in tasks)


def estimate(degraded, depth_rel, table=None, lab_model=None, cfg=None):
    """Estimate degradation parameters of ``degraded`` given its relative depth.

    Returns an :class:`Estimate` whose ``ranked_alternatives`` hold the best
    result of the ``cfg.topk`` best distinct water-type pairs, winner first.
    Ties are broken by candidate enumeration order (pair index, then scale).
    """
    cfg = cfg or EstimatorConfig()
    table = table if table is not None else load_table()
    if not isinstance(lab_model, LabStatsModel):
        raise DataError("estimate needs a LabStatsModel")
    img = check_image(degraded, "degraded image")
    rel = _relative_values(depth_rel)
    check_same_size(img, rel, ("degraded image", "depth map"))

    grid = cfg.depth_scale_grid
    n_types, n_scales = len(table), len(grid)
    n_pairs = n_types * n_types
    bd, bb = table.beta_d_array(), table.beta_b_array()
    pair_i = np.repeat(np.arange(n_types), n_types)
    pair_j = np.tile(np.arange(n_types), n_types)
    # candidate c = pair * n_scales + scale
    cand_pair = np.repeat(np.arange(n_pairs), n_scales)
    cand_scale = np.tile(np.arange(n_scales), n_pairs)
    ratios = np.array([coupled_ratios(bd[i], bb[j]) for i, j in zip(pair_i, pair_j)])
    scales = np.array(grid)
    cands = _Candidates(
        bd[pair_i][cand_pair], bb[pair_j][cand_pair], ratios[cand_pair], scales[cand_scale, 0]
    )
    grid_dmax = scales[cand_scale, 1]
    n_cand = len(cand_pair)

    g_pre = float(pre_backlight(channel_stats(img))[1])
    lo_w, hi_w = max(0.0, g_pre - cfg.b_inf_window), min(1.0, g_pre + cfg.b_inf_window)
    weights = cfg.objective_weights
    coarse = _Problem(img, rel, _stride(img.shape[:2], cfg.search_size), lab_model, weights)
    fine = _Problem(img, rel, _stride(img.shape[:2], cfg.work_size), lab_model, weights)
    chunks = [np.arange(s, min(s + _CHUNK, n_cand)) for s in range(0, n_cand, _CHUNK)]

    # stage 1: per-candidate green-light search on the coarse copy
    def screen(idx):
        sub, dm = cands.take(idx), grid_dmax[idx]
        a, b = coarse.feasible_interval(sub, dm, lo_w, hi_w)
        return _multistart(lambda g: coarse.evaluate(sub, dm, g), a, b, cfg.b_inf_starts, cfg.tol)

    screened = _parallel(cfg.n_jobs, [(screen, idx) for idx in chunks])
    g_screen = np.concatenate([g for g, _ in screened])
    f_screen = np.concatenate([f for _, f in screened])

    # stage 2: rescore the plain grid (pre-estimated light) and the screened
    # values on the working copy, so every grid point competes at one resolution
    def rescore(idx):
        sub, dm = cands.take(idx), grid_dmax[idx]
        return (
            fine.evaluate(sub, dm, np.full(len(idx), g_pre)),
            fine.evaluate(sub, dm, g_screen[idx]),
        )

    rescored = _parallel(cfg.n_jobs, [(rescore, idx) for idx in chunks])
    f_pre = np.concatenate([a for a, _ in rescored])
    f_scr = np.concatenate([b for _, b in rescored])
    use_scr = f_scr < f_pre
    best_f = np.where(use_scr, f_scr, f_pre)
    best_g = np.where(use_scr, g_screen, g_pre)
    best_d = grid_dmax.copy()

    # stage 3: coordinate descent on (green light, d_max) for the leading candidates
    if cfg.refine and cfg.refine_iters > 0:
        spans = _neighbour_spans(grid)
        leaders = np.lexsort((np.arange(n_cand), f_screen))[: cfg.refine_candidates]

        def polish(c):
            sub = cands.take([c])
            d_lo, d_hi = spans[cand_scale[c]]
            g, dm, cur = best_g[c], best_d[c], best_f[c]
            for _ in range(int(cfg.refine_iters)):
                prev = cur
                a, b = fine.feasible_interval(sub, np.array([dm]), lo_w, hi_w)
                x, fx = _multistart(
                    lambda v: fine.evaluate(cands.take(np.full(len(v), c)), np.full(len(v), dm), v),
                    a, b, cfg.b_inf_starts, cfg.tol,
                )
                if fx[0] < cur:
                    g, cur = float(x[0]), float(fx[0])
                if d_hi > d_lo:
                    x, fx = _golden(
                        lambda v: fine.evaluate(sub, v, np.array([g])),
                        np.array([d_lo]), np.array([d_hi]), cfg.tol,
                    )
                    if fx[0] < cur:
                        dm, cur = float(x[0]), float(fx[0])
                if not prev - cur > 1e-12:
                    break
            return g, dm, cur

        polished = _parallel(cfg.n_jobs, [(polish, int(c)) for c in leaders])
        for c, (g, dm, f) in zip(leaders, polished):
            if f < best_f[c]:
                best_g[c], best_d[c], best_f[c] = g, dm, f

    order = np.lexsort((np.arange(n_cand), best_f))
    if not np.isfinite(best_f[order[0]]):
        raise DataError("no candidate leaves any usable pixel; check the depth map and image")

    def params_of(c):
        i, j = pair_i[cand_pair[c]], pair_j[cand_pair[c]]
        b_inf = np.clip(ratios[cand_pair[c]] * best_g[c], 0.0, 1.0)
        return DegradationParams(
            beta_d=bd[i], beta_b=bb[j], b_inf=b_inf,
            depth_scale=(float(cands.d_min[c]), float(best_d[c])),
            attenuation_type=table[int(i)].name, scattering_type=table[int(j)].name,
        )

    alternatives, seen = [], set()
    for c in order:
        if cand_pair[c] in seen or not np.isfinite(best_f[c]):
            continue
        seen.add(cand_pair[c])
        alternatives.append((params_of(c), float(best_f[c])))
        if len(alternatives) == cfg.topk:
            break
    best_params, best_obj = alternatives[0]
    return Estimate(
        params=best_params,
        objective=best_obj,
        ranked_alternatives=alternatives,
        metadata={"b_inf_g_pre_estimate": g_pre, "config": cfg.to_dict()},
    )


def enhance(degraded, depth_rel, table=None, lab_model=None, cfg=None):
    """Estimate, restore at full resolution and re-degrade with the same parameters.

    Returns ``(restored, estimate, predicted_degraded)``.
    """
    est = estimate(degraded, depth_rel, table, lab_model, cfg)
    depth = absolutize_depth(_relative_values(depth_rel), est.params.depth_scale)
    restored, _ = restore(degraded, depth, est.params)
    predicted, _ = degrade(restored, depth, est.params)
    return restored, est, predicted


class DegradationEstimator(BaseEstimator):
    """Estimator-style wrapper.

    ``fit`` learns the Lab prior from reference images (skipped when a
    ``lab_model`` is given). ``predict`` and ``transform`` take a sequence
    of ``(degraded, depth_rel)`` pairs and return estimates and restored
    images respectively.
    """

    def __init__(self, lab_model=None, table=None, depth_scale_grid=DEFAULT_GRID, refine=True,
                 refine_iters=3, b_inf_window=1.0, objective_weights=DEFAULT_WEIGHTS, topk=5,
                 n_jobs=None):
        self.lab_model = lab_model
        self.table = table
        self.depth_scale_grid = depth_scale_grid
        self.refine = refine
        self.refine_iters = refine_iters
        self.b_inf_window = b_inf_window
        self.objective_weights = objective_weights
        self.topk = topk
        self.n_jobs = n_jobs

    def _config(self):
        return EstimatorConfig(
            depth_scale_grid=self.depth_scale_grid,
            refine=self.refine,
            refine_iters=self.refine_iters,
            b_inf_window=self.b_inf_window,
            objective_weights=self.objective_weights,
            topk=self.topk,
            n_jobs=self.n_jobs,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        if self.lab_model is not None:
            self.lab_model_ = self.lab_model
        elif X is None:
            raise DataError("fit needs reference images when no lab_model is given")
        else:
            self.lab_model_ = fit_model(X)
        self.table_ = self.table if self.table is not None else load_table()
        return self

    def predict(self, X):
        check_is_fitted(self, "lab_model_")
        return [estimate(img, depth, self.table_, self.lab_model_, self.config_) for img, depth in X]

    def transform(self, X):
        check_is_fitted(self, "lab_model_")
        return [
            enhance(img, depth, self.table_, self.lab_model_, self.config_)[0] for img, depth in X
        ]

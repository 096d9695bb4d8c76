import numpy as np
import pytest
from sklearn.base import clone

from scenes import balanced_clean, depth_map, underwater_source
from uwimaging import DataError
from uwimaging.backlight import channel_stats, coupled_backlight, pre_backlight
from uwimaging.colorstats import LabStatsModel, image_lab_stats
from uwimaging.estimator import (
    DegradationEstimator,
    Estimate,
    EstimatorConfig,
    candidate_objective,
    enhance,
    estimate,
    restoration_objective,
)
from uwimaging.imaging import DegradationParams, absolutize_depth, degrade, restore
from uwimaging.synthesis import synthesize_one

FAST = dict(depth_scale_grid=((0.5, 2.0), (0.5, 6.0), (0.5, 10.0)), refine_candidates=3, refine_iters=2)


@pytest.fixture(scope="module")
def sample():
    r = np.random.default_rng(5)
    from uwimaging.water import load_table

    table = load_table()
    clean, rel, src = balanced_clean(r, 32), depth_map(r, 32), underwater_source(r)
    s = synthesize_one(clean, rel, table, src, (0.5, 6.0), seed=1234)
    return s


@pytest.fixture(scope="module")
def fast_estimate(sample, lab_model):
    from uwimaging.water import load_table

    return estimate(sample.degraded, sample.depth_rel, load_table(), lab_model, EstimatorConfig(**FAST))


def _gray_scene(rng):
    lum = np.clip(0.5 + 0.2 * rng.standard_normal((12, 12)), 0.05, 0.95)
    return lum[..., None] * np.ones(3)


def test_objective_vanishes_at_prior_means(rng):
    img = _gray_scene(rng)
    model = LabStatsModel(image_lab_stats(img), np.ones(6))
    assert restoration_objective(img, 0.0, model) == pytest.approx(0.0, abs=1e-12)


def test_objective_linear_in_clip_weight(rng, lab_model):
    img = rng.random((12, 12, 3))
    base = restoration_objective(img, 0.3, lab_model, (1.0, 0.0, 2.0))
    one = restoration_objective(img, 0.3, lab_model, (1.0, 5.0, 2.0)) - base
    two = restoration_objective(img, 0.3, lab_model, (1.0, 10.0, 2.0)) - base
    assert two == pytest.approx(2 * one, rel=1e-12)
    values = [restoration_objective(img, c, lab_model) for c in np.linspace(0, 1, 11)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert np.isfinite(values[-1])


def test_objective_gray_term(rng):
    img = np.ones((12, 12, 3)) * np.array([0.2, 0.5, 0.8])
    model = LabStatsModel(image_lab_stats(img), np.ones(6))
    assert restoration_objective(img, 0.0, model, (0.0, 0.0, 1.0)) == pytest.approx(0.4, abs=1e-12)


def test_identity_candidate_scores_raw_image(rng, lab_model):
    raw = np.clip(rng.random((16, 16, 3)), 0.01, 0.99)
    rel = rng.random((16, 16))
    zero = DegradationParams(np.zeros(3), np.zeros(3), np.full(3, 0.4), (0.5, 10.0))
    restored, mask = restore(raw, absolutize_depth(rel, zero.depth_scale), zero)
    assert np.array_equal(restored, raw) and not mask.any()
    assert candidate_objective(raw, rel, zero, lab_model) == restoration_objective(raw, 0.0, lab_model)


def test_estimate_is_deterministic_and_parallelism_independent(sample, lab_model, table, fast_estimate):
    cfg = EstimatorConfig(**FAST, n_jobs=4)
    again = estimate(sample.degraded, sample.depth_rel, table, lab_model, cfg)
    assert again.to_dict() == fast_estimate.to_dict()


def test_estimate_structure(fast_estimate):
    est = fast_estimate
    objs = [o for _, o in est.ranked_alternatives]
    assert est.ranked_alternatives[0][0] == est.params
    assert est.objective == objs[0] and objs == sorted(objs)
    assert len(set(est.pairs())) == len(est.pairs()) == 5
    assert est.params.depth_scale[0] == 0.5
    g = est.params.b_inf[1]
    expected = coupled_backlight(g, est.params.beta_d, est.params.beta_b)[0]
    assert np.allclose(est.params.b_inf, expected)


def test_objective_reproduced_by_independent_scoring(sample, lab_model, fast_estimate):
    for params, obj in fast_estimate.ranked_alternatives:
        assert candidate_objective(sample.degraded, sample.depth_rel, params, lab_model) == pytest.approx(obj, rel=1e-9)


def test_optimal_over_plain_grid(sample, lab_model, table, fast_estimate):
    # independent re-scan: every pair x scale with the pre-estimated green light
    g = pre_backlight(channel_stats(sample.degraded))[1]
    best = np.inf
    for a in table:
        for b in table:
            b_inf = coupled_backlight(g, a.beta_d, b.beta_b)[0]
            for scale in FAST["depth_scale_grid"]:
                p = DegradationParams(a.beta_d, b.beta_b, b_inf, scale)
                best = min(best, candidate_objective(sample.degraded, sample.depth_rel, p, lab_model))
    assert fast_estimate.objective <= best + 1e-9


def test_refinement_never_increases_objective(sample, lab_model, table):
    objs = []
    for iters in range(4):
        cfg = EstimatorConfig(**{**FAST, "refine_iters": iters})
        objs.append(estimate(sample.degraded, sample.depth_rel, table, lab_model, cfg).objective)
    no_refine = estimate(
        sample.degraded, sample.depth_rel, table, lab_model, EstimatorConfig(**{**FAST, "refine": False})
    ).objective
    assert no_refine == objs[0]
    assert all(b <= a for a, b in zip(objs, objs[1:]))


def test_refined_depth_stays_within_neighbour_span(fast_estimate):
    for params, _ in fast_estimate.ranked_alternatives:
        assert 2.0 <= params.depth_scale[1] <= 10.0


def test_enhance_degradation_consistency(sample, lab_model, table):
    restored, est, predicted = enhance(sample.degraded, sample.depth_rel, table, lab_model, EstimatorConfig(**FAST))
    depth = absolutize_depth(sample.depth_rel, est.params.depth_scale)
    _, m1 = restore(sample.degraded, depth, est.params)
    _, m2 = degrade(restored, depth, est.params)
    ok = ~(m1 | m2)
    assert ok.mean() > 0.5
    assert np.max(np.abs(predicted - sample.degraded)[ok]) <= 1e-6


def test_estimate_json_roundtrip(fast_estimate):
    back = Estimate.from_dict(fast_estimate.to_dict())
    assert back.to_dict() == fast_estimate.to_dict()
    with pytest.raises(DataError):
        Estimate.from_dict({"objective": 1.0})


def test_errors(sample, lab_model, table):
    with pytest.raises(DataError):
        estimate(sample.degraded, sample.depth_rel.values[:-1], table, lab_model)
    with pytest.raises(DataError):
        EstimatorConfig(depth_scale_grid=())
    with pytest.raises(DataError):
        EstimatorConfig(objective_weights=(0, 0, 0))
    with pytest.raises(DataError):
        EstimatorConfig(refine_iters=-1)
    with pytest.raises(DataError):
        estimate(sample.degraded, sample.depth_rel, table, None)


def test_estimator_wrapper(sample, lab_model, fast_estimate):
    est = DegradationEstimator(lab_model=lab_model, depth_scale_grid=FAST["depth_scale_grid"], refine_iters=2)
    assert clone(est).get_params()["refine_iters"] == 2
    est.fit()
    # wrapper uses default refine_candidates, so only check it runs and restores
    [out] = est.transform([(sample.degraded, sample.depth_rel)])
    assert out.shape == sample.degraded.shape
    [pred] = est.predict([(sample.degraded, sample.depth_rel)])
    assert isinstance(pred, Estimate)
    with pytest.raises(DataError):
        DegradationEstimator().fit()

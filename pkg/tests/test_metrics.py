import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from oracles import sobel_loop, uciqe_loop, uiqm_loop
from scenes import balanced_clean, underwater_source
from uwimaging import DataError
from uwimaging.metrics import (
    PSNR_CAP,
    CombinedWeights,
    MetricReport,
    combined_loss,
    degradation_consistency_loss,
    evaluate,
    gradient_term,
    luma,
    proximity_from_depth,
    psnr,
    sobel_magnitude,
    ssim,
    uciqe,
    uciqe_terms,
    uiqm,
    uiqm_terms,
    weighted_l1,
    weighted_reference_loss,
)


def test_psnr_examples(rng):
    a = rng.random((8, 8, 3))
    assert psnr(a, a.copy()) == PSNR_CAP
    assert psnr(np.zeros((4, 4, 3)), np.full((4, 4, 3), 0.5)) == pytest.approx(6.0206, abs=1e-4)
    # the sentinel marks bit-identical inputs only; tiny differences are not clamped to it
    b = a.copy()
    b[0, 0, 0] += 1e-12
    assert psnr(a, b) != PSNR_CAP and psnr(a, b) > PSNR_CAP
    with pytest.raises(DataError):
        psnr(a, a[:4])


def test_ssim_matches_reference_implementation(rng):
    for shape in [(11, 11), (40, 33), (64, 64)]:
        a = rng.random(shape + (3,))
        b = np.clip(a + 0.08 * rng.standard_normal(a.shape), 0, 1)
        ref = structural_similarity(
            luma(a), luma(b), gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=1.0,
        )
        assert ssim(a, b) == pytest.approx(ref, abs=1e-12)


def test_ssim_noise_sweep(rng):
    a = balanced_clean(rng, 48)
    noise = rng.standard_normal(a.shape)
    scores = [ssim(a, np.clip(a + s * noise, 0, 1)) for s in (0.01, 0.05, 0.1)]
    assert scores[0] > scores[1] > scores[2]
    assert ssim(a, a) == 1.0


def test_ssim_size_checks(rng):
    with pytest.raises(DataError):
        ssim(rng.random((10, 20, 3)), rng.random((10, 20, 3)))
    with pytest.raises(DataError):
        ssim(rng.random((12, 12, 3)), rng.random((12, 13, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_symmetry_properties(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((16, 16, 3)), r.random((16, 16, 3))
    assert psnr(a, b) == psnr(b, a)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)
    assert degradation_consistency_loss(a, b) == pytest.approx(degradation_consistency_loss(b, a), abs=1e-15)
    assert degradation_consistency_loss(a, a) == 0.0


def test_sobel_matches_loop(rng):
    plane = rng.random((9, 12))
    assert np.allclose(sobel_magnitude(plane), sobel_loop(plane), atol=1e-12)


def test_uciqe_examples(rng):
    assert uciqe(np.full((8, 8, 3), 0.4)) == pytest.approx(0.0, abs=1e-12)
    gray = rng.random((16, 16, 1)) * np.ones(3)
    sigma_c, con_l, mu_s = uciqe_terms(gray)
    assert sigma_c == pytest.approx(0, abs=1e-12) and mu_s == pytest.approx(0, abs=1e-12)
    assert uciqe(gray) == pytest.approx(0.2745 * con_l, abs=1e-12)


def test_uiqm_examples(rng):
    gray = rng.random((16, 16, 1)) * np.ones(3)
    assert uiqm_terms(gray)[0] == pytest.approx(0.0, abs=1e-12)
    _, sharp, contrast = uiqm_terms(np.full((16, 16, 3), 0.3))
    assert sharp == 0.0 and contrast == 0.0


def test_no_reference_metrics_match_loop_oracles(rng):
    for img in [rng.random((32, 32, 3)), balanced_clean(rng, 32), underwater_source(rng, 35)]:
        assert uiqm(img) == pytest.approx(uiqm_loop(img), abs=1e-6)
        assert uciqe(img) == pytest.approx(uciqe_loop(img), abs=1e-6)


def test_flip_invariance_block_aligned(rng):
    img = balanced_clean(rng, 48)
    for flipped in (img[::-1], img[:, ::-1]):
        assert uiqm(flipped) == pytest.approx(uiqm(img), abs=1e-9)
        assert uciqe(flipped) == pytest.approx(uciqe(img), abs=1e-9)


def test_reference_loss_examples(rng):
    a = rng.random((16, 16, 3)) * 0.8
    prox = proximity_from_depth(rng.random((16, 16)))
    assert weighted_reference_loss(a, a, prox) == 0.0
    b = rng.random((16, 16, 3))
    assert weighted_reference_loss(a, b, np.zeros((16, 16))) == pytest.approx(1 - ssim(a, b), abs=1e-15)
    assert weighted_l1(a + 0.1, a, np.ones((16, 16))) == pytest.approx(0.1, abs=1e-12)
    assert weighted_reference_loss(a, b, prox) > 0
    with pytest.raises(DataError):
        weighted_l1(a, b, np.full((16, 16), 1.5))


def test_proximity_convention():
    depth = np.array([[0.0, 0.5], [1.0, 0.25]])
    assert np.allclose(proximity_from_depth(depth), [[1.0, 0.5], [0.0, 0.75]])


def test_degradation_loss_flat_comparand(rng):
    raw = rng.random((16, 16, 3))
    flat = np.full_like(raw, 0.5)
    assert gradient_term(raw, flat) == pytest.approx(sobel_magnitude(luma(raw)).mean(), abs=1e-12)


def test_combined_loss_examples():
    assert combined_loss(0, 0, 0, CombinedWeights(3, 4, 5)) == 0
    assert combined_loss(1, 1, 1) == pytest.approx(1.0, abs=1e-15)
    assert combined_loss(2, 4, 6) == pytest.approx(2 * combined_loss(1, 2, 3), abs=1e-15)
    with pytest.raises(DataError):
        CombinedWeights(-1, 0, 0)


def test_evaluate_report(rng):
    a = rng.random((16, 16, 3))
    rep = evaluate(a, a)
    assert isinstance(rep, MetricReport)
    assert rep.psnr == PSNR_CAP and rep.ssim == 1.0
    assert evaluate(a).to_dict()["psnr"] is None

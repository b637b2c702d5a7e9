import numpy as np
import pytest

from speckless.calibration import calibrate
from speckless.decomp import tt_reconstruct, tucker_reconstruct
from speckless.phantom import SpeckledPhantomSpec, make_phantom
from speckless.pipeline import (
    RankCorrectionWarning,
    correct_ml_rank,
    correct_tt_rank,
    cr_ml,
    cr_tt,
    despeckle_compress_ml,
    despeckle_compress_tt,
    natural_cr,
)
from speckless.prox import SpNorm

OCT_DIMS = (480, 512, 64)


def test_cr_tt_examples():
    assert cr_tt(OCT_DIMS, 100, 20) == pytest.approx(15728640 / 1073280)
    assert cr_tt(OCT_DIMS, 100, 20) == pytest.approx(14.655, abs=5e-4)
    assert cr_tt(OCT_DIMS, 480, 64) == pytest.approx(15728640 / 15963136)
    assert cr_tt(OCT_DIMS, 480, 64) < 1.0


def test_cr_ml_examples():
    assert cr_ml(OCT_DIMS, 100, 100, 30) == pytest.approx(15728640 / 401120)
    assert cr_ml(OCT_DIMS, 100, 100, 30) == pytest.approx(39.21, abs=5e-3)
    assert cr_ml(OCT_DIMS, 480, 512, 64) < 1.0
    assert cr_ml(OCT_DIMS, 1, 1, 1) == pytest.approx(15728640 / 1057)


def test_cr_validation():
    with pytest.raises(ValueError):
        cr_tt((480, 512), 1, 1)
    with pytest.raises(ValueError):
        cr_tt(OCT_DIMS, 0, 1)
    with pytest.raises(ValueError):
        cr_ml(OCT_DIMS, 1, 0, 1)


def test_correct_tt_rank_shrinks_the_max():
    # achieved ~14.66 < 20, so the larger rank (R1) is re-solved
    assert correct_tt_rank(OCT_DIMS, (100, 20), 20.0) == (73, 20)


def test_correct_tt_rank_fixed_point():
    target = cr_tt((4, 4, 4), 1, 1)
    assert correct_tt_rank((4, 4, 4), (1, 1), target) == (1, 1)


def test_correct_tt_rank_tie_corrects_r1():
    r1, r2 = correct_tt_rank(OCT_DIMS, (50, 50), 20.0)
    assert r2 == 50
    assert r1 == 30


def test_correct_ml_rank_example_with_clamp():
    # achieved ~39.2 > 20: the min rank (R3) grows, then clamps at I3 = 64
    assert correct_ml_rank(OCT_DIMS, (100, 100, 30), 20.0) == (100, 100, 64)


def test_correct_ml_rank_tie_corrects_r1():
    dims = (64, 64, 64)
    out = correct_ml_rank(dims, (8, 8, 8), cr_ml(dims, 8, 8, 8) * 2)
    assert out[1] == 8 and out[2] == 8
    assert out[0] != 8


def test_corrections_move_toward_target():
    rng = np.random.default_rng(301)
    for _ in range(50):
        dims = tuple(int(d) for d in rng.integers(24, 200, size=3))
        r = tuple(int(v) for v in rng.integers(1, 20, size=3))
        target = float(rng.uniform(2, 40))
        old = cr_ml(dims, *r)
        new = cr_ml(dims, *correct_ml_rank(dims, r, target))
        assert abs(new - target) <= abs(old - target) + 1e-9
        r2 = tuple(int(v) for v in rng.integers(1, 16, size=2))
        old_tt = cr_tt(dims, *r2)
        new_tt = cr_tt(dims, *correct_tt_rank(dims, r2, target))
        assert abs(new_tt - target) <= abs(old_tt - target) + 1e-9


def test_correction_warns_when_unreachable():
    with pytest.warns(RankCorrectionWarning):
        correct_tt_rank((8, 8, 8), (2, 2), 1e9)
    with pytest.warns(RankCorrectionWarning):
        correct_ml_rank((8, 8, 8), (2, 2, 2), 1e9)


@pytest.fixture(scope="module")
def small_case():
    spec = SpeckledPhantomSpec(dims=(40, 44, 12), kind="ml", ranks=(4, 3, 2), looks=1.0, seed=21)
    clean, noisy = make_phantom(spec)
    table = calibrate([noisy], "tt", SpNorm.S23, [3.0, 8.0, 20.0], rel_tol=0.3)
    table = calibrate([noisy], "ml", SpNorm.S23, [3.0, 8.0, 20.0], rel_tol=0.3, table=table)
    return clean, noisy, table


def test_tt_pipeline_end_to_end(small_case):
    clean, noisy, table = small_case
    out = despeckle_compress_tt(noisy, 8.0, SpNorm.S23, table)
    assert abs(out.achieved_cr - 8.0) / 8.0 <= 0.10
    assert out.requested_cr == 8.0
    assert out.approx_error > 0
    # achieved CR is exactly the parameter-count ratio of the emitted model
    assert out.achieved_cr == pytest.approx(
        noisy.size / out.model.param_count(), rel=1e-12
    )
    rec = tt_reconstruct(out.model)
    err_rec = np.linalg.norm(rec.array - clean.array) / clean.norm()
    err_noisy = np.linalg.norm(noisy.array - clean.array) / clean.norm()
    assert err_rec < err_noisy


def test_ml_pipeline_end_to_end(small_case):
    clean, noisy, table = small_case
    out = despeckle_compress_ml(noisy, 8.0, SpNorm.S23, table)
    assert abs(out.achieved_cr - 8.0) / 8.0 <= 0.10
    assert out.achieved_cr == pytest.approx(
        noisy.size / out.model.param_count(), rel=1e-12
    )
    rec = tucker_reconstruct(out.model)
    err_rec = np.linalg.norm(rec.array - clean.array) / clean.norm()
    err_noisy = np.linalg.norm(noisy.array - clean.array) / clean.norm()
    assert err_rec < err_noisy


def test_pipeline_rejects_bad_inputs(small_case):
    _, noisy, table = small_case
    with pytest.raises(ValueError):
        despeckle_compress_tt(noisy, 1.0, SpNorm.S23, table)
    with pytest.raises(ValueError):
        despeckle_compress_ml(noisy, 0.5, SpNorm.S23, table)
    with pytest.raises(ValueError):
        despeckle_compress_tt(np.ones((4, 5)), 5.0, SpNorm.S23, table)


def test_pipeline_decompose_denoised_switch(small_case):
    _, noisy, table = small_case
    out = despeckle_compress_tt(noisy, 8.0, SpNorm.S23, table, decompose_denoised=True)
    rec = tt_reconstruct(out.model)
    to_denoised = np.linalg.norm(rec.array - out.denoised.array) / out.denoised.norm()
    out0 = despeckle_compress_tt(noisy, 8.0, SpNorm.S23, table)
    rec0 = tt_reconstruct(out0.model)
    to_denoised0 = np.linalg.norm(rec0.array - out0.denoised.array) / out0.denoised.norm()
    assert to_denoised < to_denoised0  # the switch fits the denoised tensor


def test_pipeline_determinism(small_case):
    _, noisy, table = small_case
    a = despeckle_compress_tt(noisy, 8.0, SpNorm.S23, table)
    b = despeckle_compress_tt(noisy, 8.0, SpNorm.S23, table)
    assert a.achieved_cr == b.achieved_cr
    for ca, cb in zip(a.model.cores, b.model.cores):
        np.testing.assert_array_equal(ca, cb)
    np.testing.assert_array_equal(a.denoised.array, b.denoised.array)


def wide_open_table():
    """Huge penalties at every CR: thresholds are negligible, so the ADMM
    pass leaves a noiseless input untouched."""
    from speckless.calibration import CalibrationTable

    t = CalibrationTable()
    for mode in ("tt", "ml"):
        t.add(mode, SpNorm.S23, [(1.0, 1e9, 1e12), (100.0, 1e9, 1e12)])
    return t


def test_noiseless_tt_input_at_its_natural_cr():
    from speckless.phantom import SpeckledPhantomSpec, make_phantom

    spec = SpeckledPhantomSpec(dims=(48, 40, 12), kind="tt", ranks=(4, 3), seed=13)
    clean, _ = make_phantom(spec)
    target = cr_tt(clean.dims, 4, 3)
    out = despeckle_compress_tt(clean, target, SpNorm.S23, wide_open_table())
    assert out.approx_error <= 1e-6
    assert out.model.ranks == (4, 3)
    assert out.achieved_cr == pytest.approx(target, rel=1e-12)
    assert relative_error_ok(clean, tt_reconstruct(out.model))


def test_noiseless_ml_input_at_its_natural_cr():
    from speckless.phantom import SpeckledPhantomSpec, make_phantom

    spec = SpeckledPhantomSpec(dims=(48, 40, 12), kind="ml", ranks=(4, 3, 2), seed=15)
    clean, _ = make_phantom(spec)
    target = cr_ml(clean.dims, 4, 3, 2)
    out = despeckle_compress_ml(clean, target, SpNorm.S23, wide_open_table())
    assert out.approx_error <= 1e-6
    assert out.model.ranks == (4, 3, 2)
    assert out.achieved_cr == pytest.approx(target, rel=1e-12)
    assert relative_error_ok(clean, tucker_reconstruct(out.model))


def relative_error_ok(x, recon, tol=1e-6):
    return np.linalg.norm(recon.array - x.array) / x.norm() <= tol


def test_denoising_improves_cnr_and_snr(small_case):
    from speckless.metrics import cnr, snr

    clean, noisy, table = small_case
    out = despeckle_compress_tt(noisy, 8.0, SpNorm.S23, table)
    recon = tt_reconstruct(out.model)
    dims = clean.dims
    background = np.zeros(dims, bool)
    background[2:8] = True  # darkest layer interior
    signal = np.zeros(dims, bool)
    signal[dims[0] - 8 : dims[0] - 2] = True  # brightest layer interior
    assert cnr(recon, background) > cnr(noisy, background)
    assert snr(recon, signal, background) > snr(noisy, signal, background)


def test_natural_cr_modes(small_case):
    _, noisy, table = small_case
    from speckless.admm import AdmmConfig

    mu0, mu_max = table.interpolate("tt", SpNorm.S23, 8.0)
    cfg = AdmmConfig(mu0=mu0, mu_max=mu_max, norm=SpNorm.S23)
    assert natural_cr(noisy, "tt", cfg) > 1
    with pytest.raises(ValueError):
        natural_cr(noisy, "banana", cfg)

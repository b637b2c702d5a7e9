import numpy as np
import pytest

from speckless._svd import sign_normalize, thin_svd, use_gram
from speckless.prox import SpNorm, prox_array, prox_oracle, prox_scalar, svt

ALL_NORMS = list(SpNorm)


def dead_zone(tau, norm):
    if norm is SpNorm.S0:
        return np.sqrt(2.0 * tau)
    if norm is SpNorm.S12:
        return 1.5 * tau ** (2.0 / 3.0)
    if norm is SpNorm.S23:
        return (2.0 / 3.0) * (3.0 * (2.0 * tau) ** 3) ** 0.25
    return tau  # S1: soft threshold kills |x| <= tau


def test_soft_threshold_example():
    assert prox_scalar(3.0, 1.0, SpNorm.S1) == 2.0
    assert prox_scalar(-3.0, 1.0, SpNorm.S1) == -2.0
    assert prox_scalar(0.5, 1.0, SpNorm.S1) == 0.0


def test_hard_threshold_examples():
    assert prox_scalar(1.0, 1.0, SpNorm.S0) == 0.0  # |x| < sqrt(2)
    assert prox_scalar(2.0, 1.0, SpNorm.S0) == 2.0  # |x| > sqrt(2)
    # exact tie breaks toward sparsity
    assert prox_scalar(np.sqrt(2.0), 1.0, SpNorm.S0) == 0.0


@pytest.mark.parametrize("norm", ALL_NORMS)
def test_zero_maps_to_zero(norm):
    assert prox_scalar(0.0, 0.7, norm) == 0.0
    assert prox_oracle(0.0, 0.7, norm) == 0.0


@pytest.mark.parametrize("norm", ALL_NORMS)
def test_odd_symmetry_and_nonexpansive(norm):
    rng = np.random.default_rng(51)
    for _ in range(100):
        x = rng.uniform(-10, 10)
        tau = rng.uniform(1e-3, 5)
        out = prox_scalar(x, tau, norm)
        assert prox_scalar(-x, tau, norm) == -out
        assert abs(out) <= abs(x) + 1e-15


@pytest.mark.parametrize("norm", [SpNorm.S0, SpNorm.S12, SpNorm.S23])
def test_dead_zone(norm):
    rng = np.random.default_rng(53)
    for _ in range(100):
        tau = rng.uniform(1e-3, 5)
        phi = dead_zone(tau, norm)
        x = rng.uniform(-0.999, 0.999) * phi
        assert prox_scalar(x, tau, norm) == 0.0


def test_soft_threshold_is_piecewise_linear_slope_one():
    tau = 0.8
    xs = np.array([tau + 0.1, 2.0, 5.0, 9.0])
    outs = prox_array(xs, tau, SpNorm.S1)
    np.testing.assert_allclose(np.diff(outs), np.diff(xs), rtol=1e-15)
    np.testing.assert_allclose(outs, xs - tau, rtol=1e-15)


@pytest.mark.parametrize("norm", ALL_NORMS)
def test_closed_form_matches_oracle(norm):
    rng = np.random.default_rng(97)
    for _ in range(250):
        x = rng.uniform(-10, 10)
        tau = rng.uniform(1e-4, 5)
        assert prox_scalar(x, tau, norm) == pytest.approx(
            prox_oracle(x, tau, norm), abs=1e-4
        )


def test_oracle_self_consistency():
    assert prox_oracle(3.0, 1.0, SpNorm.S1) == pytest.approx(2.0, abs=1e-5)
    assert prox_oracle(2.0, 1.0, SpNorm.S0) == pytest.approx(2.0, abs=1e-5)
    assert prox_oracle(1.0, 1.0, SpNorm.S0) == 0.0


@pytest.mark.parametrize("norm", ALL_NORMS)
def test_prox_monotone_in_x(norm):
    xs = np.linspace(0.0, 12.0, 2000)
    outs = prox_array(xs, 1.3, norm)
    assert (np.diff(outs) >= -1e-12).all()


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        prox_scalar(1.0, 0.0, SpNorm.S1)
    with pytest.raises(ValueError):
        prox_scalar(1.0, -2.0, SpNorm.S0)


def test_spnorm_parse():
    assert SpNorm.parse("s23") is SpNorm.S23
    assert SpNorm.parse(SpNorm.S0) is SpNorm.S0
    assert SpNorm.parse(0.5) is SpNorm.S12
    assert SpNorm.parse(2 / 3) is SpNorm.S23
    assert SpNorm.parse(1) is SpNorm.S1
    with pytest.raises(ValueError):
        SpNorm.parse("s34")
    with pytest.raises(ValueError):
        SpNorm.parse(0.4)


def test_svt_diagonal_example():
    m = np.diag([5.0, 0.5])
    res = svt(m, 1.0, SpNorm.S1)
    np.testing.assert_allclose(res.matrix, np.diag([4.0, 0.0]), atol=1e-12)
    assert res.rank == 1
    np.testing.assert_allclose(res.singular_values, [4.0, 0.0], atol=1e-12)


def test_svt_zero_matrix():
    res = svt(np.zeros((4, 3)), 0.5, SpNorm.S23)
    assert res.rank == 0
    assert not res.matrix.any()


def test_svt_rejects_bad_input():
    with pytest.raises(ValueError):
        svt(np.array([[np.nan, 1.0]]), 1.0, SpNorm.S1)
    with pytest.raises(ValueError):
        svt(np.zeros(4), 1.0, SpNorm.S1)
    with pytest.raises(ValueError):
        svt(np.zeros((2, 2)), 0.0, SpNorm.S1)


def test_svt_soft_shrinks_exactly_tau():
    rng = np.random.default_rng(59)
    m = rng.standard_normal((6, 5))
    s = np.linalg.svd(m, compute_uv=False)
    tau = 0.5 * s[-1]
    out = svt(m, tau, SpNorm.S1)
    s_out = np.linalg.svd(out.matrix, compute_uv=False)
    np.testing.assert_allclose(s_out, s - tau, atol=1e-10)
    assert out.rank == 5


def test_svt_identity_in_small_tau_limit():
    rng = np.random.default_rng(61)
    m = rng.standard_normal((7, 4))
    out = svt(m, 1e-14, SpNorm.S1)
    np.testing.assert_allclose(out.matrix, m, atol=1e-10)


def test_svt_rank_non_increasing_in_tau():
    rng = np.random.default_rng(67)
    m = rng.standard_normal((8, 6))
    for norm in ALL_NORMS:
        ranks = [svt(m, tau, norm).rank for tau in np.geomspace(1e-3, 20, 12)]
        assert all(a >= b for a, b in zip(ranks, ranks[1:]))


def schatten_objective(x, a, tau, norm):
    s = np.linalg.svd(a, compute_uv=False)
    if norm is SpNorm.S0:
        pen = np.count_nonzero(s > 1e-12 * max(s[0], 1.0))
    else:
        pen = np.sum(s**norm.p)
    return 0.5 * np.linalg.norm(x - a) ** 2 + tau * pen


@pytest.mark.parametrize("norm", ALL_NORMS)
def test_svt_beats_oracle_spectrum_candidates(norm):
    rng = np.random.default_rng(71)
    x = rng.standard_normal((8, 6))
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    for tau in (0.2, 1.0, 3.0):
        res = svt(x, tau, norm)
        best = schatten_objective(x, res.matrix, tau, norm)
        oracle_spec = np.array([prox_oracle(si, tau, norm) for si in s])
        candidates = [(u * oracle_spec) @ vt]
        for r in range(len(s) + 1):  # every rank truncation of the spectrum
            spec = np.where(np.arange(len(s)) < r, s, 0.0)
            candidates.append((u * spec) @ vt)
        for cand in candidates:
            assert best <= schatten_objective(x, cand, tau, norm) + 1e-9


def test_svt_gram_route_matches_direct():
    rng = np.random.default_rng(73)
    wide = rng.standard_normal((64, 40000))  # triggers the Gram route
    assert use_gram(wide.shape)
    tall = wide.T
    s = np.linalg.svd(wide, compute_uv=False)
    tau = float(np.median(s))
    for a in (wide, tall):
        res = svt(a, tau, SpNorm.S1)
        u, sv, vt = np.linalg.svd(a, full_matrices=False)
        want = (u * np.maximum(sv - tau, 0.0)) @ vt
        np.testing.assert_allclose(res.matrix, want, atol=1e-8 * s[0])
        assert res.rank == int(np.count_nonzero(sv > tau))


def test_thin_svd_sign_convention_deterministic():
    rng = np.random.default_rng(79)
    a = rng.standard_normal((6, 4))
    u1, s1, vt1 = thin_svd(a)
    u2, s2, vt2 = thin_svd(a.copy())
    np.testing.assert_array_equal(u1, u2)
    np.testing.assert_array_equal(vt1, vt2)
    peaks = np.abs(u1).argmax(axis=0)
    assert (u1[peaks, np.arange(u1.shape[1])] >= 0).all()
    np.testing.assert_allclose((u1 * s1) @ vt1, a, atol=1e-12)


def test_sign_normalize_preserves_product():
    rng = np.random.default_rng(83)
    u, s, vt = np.linalg.svd(rng.standard_normal((5, 5)))
    u2, vt2 = sign_normalize(u.copy(), vt.copy())
    np.testing.assert_allclose((u2 * s) @ vt2, (u * s) @ vt, atol=1e-12)

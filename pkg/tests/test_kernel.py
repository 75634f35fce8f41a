import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coudesign.kernel import (
    CHANDLER,
    CONSTANT,
    Design,
    NormalizationError,
    OUParams,
    TrendParams,
    TrendSpec,
    covariance_inverse_closed,
    covariance_matrix,
    g_func,
    g_prime,
    kappa_func,
    phi_func,
    phi_prime,
    phi_second,
    psi_func,
    psi_prime,
    psi_second,
    r_func,
    rotation_block,
)

mp.mp.dps = 40

lams = st.floats(0.05, 5.0)
omegas = st.floats(-10.0, 10.0)
taus = st.floats(0.0, 20.0)


def random_design(rng, n, lo=0.01, hi=3.0):
    return Design.from_spacings(rng.uniform(lo, hi, n - 1), start=rng.uniform(0, 2))


# --- types -----------------------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        OUParams(0.0, 1.0)
    with pytest.raises(ValueError):
        OUParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        OUParams(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        OUParams(1.0, float("nan"))
    p = OUParams.from_sigma(2.0, 1.0, 2.0)
    assert p.sigma2_over_2lambda == pytest.approx(1.0)
    assert p.sigma == pytest.approx(2.0)


def test_unnormalized_rejected_by_information_formulas():
    p = OUParams(1.0, 1.0, 2.0)
    dz = Design([0.0, 1.0])
    with pytest.raises(NormalizationError):
        covariance_matrix(p, dz)
    with pytest.raises(NormalizationError):
        covariance_inverse_closed(p, dz)


@pytest.mark.parametrize("times", [[0.0], [0.0, 0.0], [1.0, 0.5], [-1.0, 1.0], [0.0, np.inf]])
def test_design_rejects_bad_times(times):
    with pytest.raises(ValueError):
        Design(times)


def test_design_spacings_exact():
    dz = Design([0.25, 1.0, 3.5])
    np.testing.assert_array_equal(dz.spacings, [0.75, 2.5])
    assert dz.n == 3
    np.testing.assert_allclose(Design.from_spacings([0.75, 2.5], 0.25).times, dz.times)
    with pytest.raises(ValueError):
        dz.times[0] = 1.0


def test_trend_presets():
    t = np.array([0.0, 0.25, 0.5])
    f1, f2 = CONSTANT.evaluate(t)
    np.testing.assert_array_equal(f1, 1.0)
    np.testing.assert_array_equal(f2, 0.0)
    f1, f2 = CHANDLER.evaluate(t)
    np.testing.assert_allclose(f1, [1.0, 0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(f2, [0.0, 1.0, 0.0], atol=1e-15)
    assert TrendSpec.preset("Chandler") is CHANDLER
    with pytest.raises(ValueError):
        TrendSpec.preset("quadratic")


def test_trend_mean_structure():
    mean = TrendParams(2.0, -1.0).mean(CHANDLER, [0.25])
    # f = i at t = 1/4, so m f = (2 - i) i = 1 + 2i
    np.testing.assert_allclose(mean, [[1.0, 2.0]], atol=1e-15)


# --- rotation block --------------------------------------------------------

def test_rotation_identity_at_zero():
    np.testing.assert_array_equal(rotation_block(OUParams(1, 1), 0.0), np.eye(2))


def test_rotation_at_pi():
    np.testing.assert_allclose(rotation_block(OUParams(1, 1), math.pi),
                               -math.exp(-math.pi) * np.eye(2), atol=1e-12)


def test_rotation_matches_extended_precision():
    lam, om, tau = mp.mpf("0.3"), 2 * mp.pi, mp.mpf("0.25")
    env = mp.exp(-lam * tau)
    expected = [[env * mp.cos(om * tau), -env * mp.sin(om * tau)],
                [env * mp.sin(om * tau), env * mp.cos(om * tau)]]
    got = rotation_block(OUParams(0.3, 2 * math.pi), 0.25)
    np.testing.assert_allclose(got, np.array(expected, dtype=float), rtol=1e-14, atol=1e-16)


@given(lams, omegas, taus, taus)
def test_rotation_semigroup(lam, om, t1, t2):
    p = OUParams(lam, om)
    np.testing.assert_allclose(rotation_block(p, t1 + t2),
                               rotation_block(p, t1) @ rotation_block(p, t2), atol=1e-12)


@given(lams, omegas, taus)
def test_rotation_structure(lam, om, tau):
    b = rotation_block(OUParams(lam, om), tau)
    assert b[0, 0] == b[1, 1] and b[0, 1] == -b[1, 0]
    assert np.linalg.det(b) == pytest.approx(math.exp(-2 * lam * tau), rel=1e-12, abs=1e-300)


# --- covariance and its inverse --------------------------------------------

def test_covariance_scalar_case():
    c = covariance_matrix(OUParams(1.0, 0.0), Design([0.0, math.log(2)]))
    expected = np.array([[1, 0, .5, 0], [0, 1, 0, .5], [.5, 0, 1, 0], [0, .5, 0, 1]])
    np.testing.assert_allclose(c, expected, atol=1e-15)


def test_covariance_orientation_follows_dynamics():
    # E[Y(t2) Y(t1)^T] = exp(A d): block (row 2, col 1)
    p = OUParams(0.4, 1.3)
    c = covariance_matrix(p, Design([0.0, 0.7]))
    np.testing.assert_allclose(c[2:, :2], rotation_block(p, 0.7), atol=1e-15)
    np.testing.assert_allclose(c[:2, 2:], rotation_block(p, 0.7).T, atol=1e-15)


def test_covariance_dense_cap():
    with pytest.raises(ValueError, match="dense"):
        covariance_matrix(OUParams(1, 1), Design(np.arange(10.0)), max_n=5)


@settings(max_examples=50, deadline=None)
@given(lams, omegas, st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_covariance_symmetric_positive_definite(lam, om, n, seed):
    dz = random_design(np.random.default_rng(seed), n)
    c = covariance_matrix(OUParams(lam, om), dz)
    np.testing.assert_array_equal(c, c.T)
    np.linalg.cholesky(c)


@pytest.mark.parametrize("n", range(2, 11))
def test_closed_inverse_against_dense(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(5):
        p = OUParams(rng.uniform(0.05, 5), rng.uniform(-10, 10))
        dz = random_design(rng, n, 0.05, 3.0)
        c = covariance_matrix(p, dz)
        ci = covariance_inverse_closed(p, dz)
        np.testing.assert_allclose(c @ ci, np.eye(2 * n), atol=1e-10)
        np.testing.assert_allclose(ci, np.linalg.inv(c), rtol=1e-10, atol=1e-10)


def test_closed_inverse_scalar_case():
    ci = covariance_inverse_closed(OUParams(1.0, 0.0), Design([0.0, math.log(2)]))
    a, b = 4 / 3, -2 / 3
    expected = np.array([[a, 0, b, 0], [0, a, 0, b], [b, 0, a, 0], [0, b, 0, a]])
    np.testing.assert_allclose(ci, expected, atol=1e-14)


def test_closed_inverse_decorrelated_limit():
    ci = covariance_inverse_closed(OUParams(1.0, 2.0), Design([0.0, 60.0]))
    np.testing.assert_allclose(ci, np.eye(4), atol=1e-25)


def test_closed_inverse_tridiagonal():
    ci = covariance_inverse_closed(OUParams(0.5, 3.0), Design.equidistant(6, 0.4))
    for j in range(6):
        for k in range(6):
            if abs(j - k) > 1:
                assert not ci[2 * j:2 * j + 2, 2 * k:2 * k + 2].any()


# --- scalar information functions ------------------------------------------

def mp_g(lam, om, x):
    lam, om, x = mp.mpf(lam), mp.mpf(om), mp.mpf(x)
    return (1 - 2 * mp.exp(-lam * x) * mp.cos(om * x) + mp.exp(-2 * lam * x)) / (1 - mp.exp(-2 * lam * x))


def mp_phi(lam, x):
    lam, x = mp.mpf(lam), mp.mpf(x)
    return x**2 * mp.exp(-lam * x) * mp.cosh(lam * x) / mp.sinh(lam * x) ** 2


def mp_psi(lam, x):
    lam, x = mp.mpf(lam), mp.mpf(x)
    return x**2 * mp.exp(-lam * x) / mp.sinh(lam * x)


def test_g_at_zero():
    assert g_func(OUParams(1.0, 3.0), 0.0) == 0.0


def test_g_real_case():
    assert g_func(OUParams(1.0, 0.0), math.log(3)) == pytest.approx(0.5, rel=1e-14)
    x = np.linspace(0.01, 10, 50)
    np.testing.assert_allclose(g_func(OUParams(1.0, 0.0), x),
                               (1 - np.exp(-x)) / (1 + np.exp(-x)), rtol=1e-13)


def test_g_value_extended_precision():
    # 40-digit evaluation of the defining formula
    assert float(mp_g(1, 1, 1)) == pytest.approx(0.85328225870662446, rel=1e-14)
    assert g_func(OUParams(1.0, 1.0), 1.0) == pytest.approx(0.85328225870662446, rel=1e-14)


@pytest.mark.parametrize("lam,om", [(1, 1), (0.05, 9.0), (5.0, -0.3), (2.0, 0.0)])
def test_g_against_mpmath_grid(lam, om):
    xs = np.geomspace(1e-6, 100, 60)
    got = g_func(OUParams(lam, om), xs)
    want = np.array([float(mp_g(lam, om, x)) for x in xs])
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-300)


def test_phi_psi_at_zero():
    assert phi_func(OUParams(2.0, 1.0), 0.0) == 0.25
    assert psi_func(OUParams(3.0, 1.0), 0.0) == 0.0


def test_phi_psi_value_at_one():
    p = OUParams(1.0, 1.0)
    assert phi_func(p, 1.0) == pytest.approx(float(mp_phi(1, 1)), rel=1e-12)
    assert psi_func(p, 1.0) == pytest.approx(float(mp_psi(1, 1)), rel=1e-12)


@pytest.mark.parametrize("lam", [0.05, 1.0, 4.0])
def test_phi_psi_forms_agree_on_log_grid(lam):
    xs = np.geomspace(1e-6, 100, 80)
    p = OUParams(lam, 1.0)
    np.testing.assert_allclose(phi_func(p, xs), [float(mp_phi(lam, x)) for x in xs], rtol=1e-12)
    np.testing.assert_allclose(psi_func(p, xs), [float(mp_psi(lam, x)) for x in xs], rtol=1e-12)


@pytest.mark.parametrize("lam,om", [(1.0, 1.0), (0.3, 5.0), (4.0, -2.0)])
def test_continuity_at_zero(lam, om):
    p = OUParams(lam, om)
    assert abs(g_func(p, 1e-8) - 0.0) < 1e-6
    assert abs(phi_func(p, 1e-8) - 1 / lam**2) < 1e-6
    assert abs(psi_func(p, 1e-8) - 0.0) < 1e-6


@given(lams, st.floats(0.01, 10.0) | st.floats(-10.0, -0.01))
def test_g_tends_to_one(lam, om):
    assert abs(g_func(OUParams(lam, om), 50 / lam) - 1.0) < 1e-10


def test_no_overflow_for_large_arguments():
    p = OUParams(10.0, 1.0)
    xs = np.array([50.0, 400.0, 1e4])
    for f in (g_func, phi_func, psi_func):
        assert np.all(np.isfinite(f(p, xs)))


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        g_func(OUParams(1, 1), -0.1)


# --- r, kappa and derivatives ----------------------------------------------

def test_r_limit_of_g_prime_at_zero():
    for lam, om in [(1.0, 1.0), (0.5, 3.0), (2.0, -1.5)]:
        p = OUParams(lam, om)
        x = 1e-6
        ratio = r_func(p, x) / math.sinh(lam * x) ** 2
        assert ratio == pytest.approx(om**2 / (2 * lam) + lam / 2, rel=1e-4)


def test_r_matches_definition():
    for lam, om, x in [(1.0, 1.0, 0.7), (0.2, 4.0, 3.3), (3.0, -2.0, 1.1)]:
        want = lam * math.cosh(lam * x) * math.cos(om * x) + om * math.sinh(lam * x) * math.sin(om * x) - lam
        assert r_func(OUParams(lam, om), x) == pytest.approx(want, rel=1e-12, abs=1e-13)


def test_r_root_at_standard_optimum():
    assert abs(r_func(OUParams(1.0, 1.0), 2.1835380577759187)) < 1e-6


@pytest.mark.parametrize("om", [0.5, 1.0, 4.0, -7.0])
def test_r_sign_changes(om):
    p = OUParams(1.0, om)
    xs = np.linspace(1e-3, 20 * math.pi / abs(om), 20001)
    s = np.sign(r_func(p, xs))
    assert np.count_nonzero(s[1:] != s[:-1]) >= 3


def test_kappa_limits():
    assert kappa_func(1e-4) == pytest.approx(1.0, abs=1e-3)
    assert kappa_func(50.0) == pytest.approx(-1.0, abs=1e-3)


def test_kappa_decreasing():
    v = kappa_func(np.linspace(0.01, 10, 2000))
    assert np.all(np.diff(v) < 0)


def test_kappa_rejects_nonpositive():
    with pytest.raises(ValueError):
        kappa_func(0.0)


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("x", [0.05, 0.4930, 1.2, 4.0])
def test_derivatives_against_mpmath(lam, x):
    p = OUParams(lam, 1.0)

    def phi(v):
        return mp_phi(lam, v)

    def psi(v):
        return mp_psi(lam, v)

    assert phi_prime(p, x) == pytest.approx(float(mp.diff(phi, x)), rel=1e-9)
    assert phi_second(p, x) == pytest.approx(float(mp.diff(phi, x, 2)), rel=1e-8)
    assert psi_prime(p, x) == pytest.approx(float(mp.diff(psi, x)), rel=1e-9)
    assert psi_second(p, x) == pytest.approx(float(mp.diff(psi, x, 2)), rel=1e-8)
    assert g_prime(OUParams(lam, 2.0), x) == pytest.approx(
        float(mp.diff(lambda v: mp_g(lam, 2, v), x)), rel=1e-9, abs=1e-14)

import math

import pytest
from scipy import special

from loschmidt import analysis, planar
from loschmidt.echo import ABC, ChainSpec, ZeroProximityError, log_amplitude
from loschmidt.numerics import IMAGINARY_TIME, REAL_TIME

# first zero of J_0, so the single-spin amplitude J_0(2t) vanishes at half of it
J0_FIRST_ZERO = 2.404825557695773
# zero of the N=3 brute-force eigenvalue integral (Brent on a 512^3 grid)
N3_ZERO_T = 1.9158529851039108


def test_error_E_vanishes_at_zero():
    for n in range(1, 9):
        for ell in (2, 3, 4):
            assert analysis.error_E(n, ell, 0.0) == 0.0
            assert analysis.error_E(n, ell, 0.0, IMAGINARY_TIME, ABC) == 0.0


def test_error_E_exponentially_small():
    assert abs(analysis.error_E(4, 4, 0.2)) < 1e-8


@pytest.mark.parametrize("n,tau", [(4, 0.25), (4, 0.2), (6, 0.2)])
def test_error_E_decreases_with_ell(n, tau):
    e = [abs(analysis.error_E(n, ell, tau)) for ell in (2, 3, 4)]
    assert e[0] > e[1] > e[2]


@pytest.mark.parametrize("n", [4, 6])
def test_error_E_fit_quality(n):
    fit = analysis.decay_rate_vs_ell(n, 0.2, [2, 3, 4])
    assert fit.rate > 0 and fit.r_squared > 0.95


def test_error_E_rational_ell():
    assert abs(analysis.error_E(4, 2.5, 0.2)) > 0
    with pytest.raises(ValueError):
        analysis.error_E(4, 2.3, 0.2)


def test_decay_rates_positive():
    assert analysis.decay_rate_vs_ell(4, 0.2, [2, 2.5, 3, 3.5, 4]).rate > 0
    assert analysis.decay_rate_vs_ell(6, 0.3, [2, 3, 4]).rate > 0
    assert analysis.decay_rate_vs_ell(6, 0.1, [2, 3, 4]).rate > 0
    assert analysis.decay_rate_vs_ell(4, 0.2, [2, 3, 4], ABC).rate > 0
    with pytest.raises(ValueError):
        analysis.decay_rate_vs_ell(4, 0.2, [1.5, 2, 3])


def test_error_R_shrinks_with_n():
    assert abs(analysis.error_R(10, 3, 0.25)) < abs(analysis.error_R(6, 3, 0.25))


def test_error_R_sign_and_size():
    # f_{N,L} sits below tau^2, so 1 - tau^2/f_{N,L} is negative
    r = analysis.error_R(10, 3, 0.25)
    assert -0.3 < r < 0


def test_error_R_domain():
    with pytest.raises(ValueError):
        analysis.error_R(10, 3, 0.01)
    with pytest.raises(ValueError):
        analysis.error_R(10, 3, 0.32)


@pytest.mark.parametrize("n", [6, 10])
def test_first_phase_below_planar(n):
    for k in range(11):
        tau = 0.1 + 0.02 * k
        assert analysis.first_phase_deviation(n, 3 * n, tau) < 0


def test_first_phase_deviation_matches_double_precision():
    # where the deviation is large enough to resolve in doubles, both agree
    d = analysis.first_phase_deviation(10, 30, 0.3)
    f = analysis.finite_free_energy(10, 30, 0.3)
    assert abs(d - (f - 0.09)) < 1e-14


# --- QSL -----------------------------------------------------------------------


def test_qsl_single_spin():
    rec = analysis.qsl_time(1)
    assert abs(rec.t_zero - J0_FIRST_ZERO / 2) < 1e-10
    assert rec.tau_qsl == rec.t_zero


def test_qsl_three_spins_matches_brute_force_zero():
    rec = analysis.qsl_time(3)
    assert abs(rec.t_zero - N3_ZERO_T) < 1e-9
    assert rec.tau_qsl > planar.critical_time()
    assert rec.refinement_width <= 1e-10 and rec.dip < -25


@pytest.mark.parametrize("n", [2, 4, 6])
def test_qsl_even_n_has_no_zero(n):
    with pytest.raises(analysis.NoZeroInWindow):
        analysis.qsl_time(n)


def test_qsl_sequence_properties():
    recs = analysis.qsl_sequence(6)
    tc = planar.critical_time()
    taus = [r.tau_qsl for r in recs]
    assert all(x > tc for x in taus)
    assert abs(taus[-1] - tc) < abs(taus[0] - tc)
    assert all(tc < x < 1.3 for x in taus[:5])
    s = analysis.qsl_summary(recs)
    assert s.last_step_sign == -1 and s.last_gap < s.first_gap and s.minimum == taus[-1]


def test_qsl_sequence_domain():
    with pytest.raises(ValueError):
        analysis.qsl_sequence(0)


def test_qsl_zero_is_a_sign_change():
    # the amplitude is real up to a fixed phase, so it changes sign at the zero
    rec = analysis.qsl_time(5)
    a = log_amplitude(ChainSpec(5), REAL_TIME, rec.t_zero - 1e-3)
    b = log_amplitude(ChainSpec(5), REAL_TIME, rec.t_zero + 1e-3)
    assert math.cos(a.phase - b.phase) < -0.99


# --- identities ----------------------------------------------------------------


def test_toda_residual_is_finite():
    r2 = analysis.toda_residual(2, 0.3)
    assert 0 <= r2 < 1e-6


def test_toda_residual_small_time():
    assert analysis.toda_residual(8, 1e-3) < 1e-6


def test_toda_residual_decreases_with_n():
    r2 = analysis.toda_residual(2, 0.3)
    assert analysis.toda_residual(8, 0.3) < r2
    assert analysis.toda_residual(10, 0.3) * 3 <= r2


@pytest.mark.parametrize("t", [0.3, 0.8])
def test_toda_holds_to_differentiation_error(t):
    # the ABC determinants satisfy the bilinear relation exactly, so only the
    # finite-difference error of the second derivative remains
    for n in (1, 3, 6):
        assert analysis.toda_residual(n, t) < 1e-6


@pytest.mark.parametrize("n", [4, 6, 8])
@pytest.mark.parametrize("tau", [0.1, 0.2, 0.3])
def test_factorization_check(n, tau):
    assert analysis.factorization_check(n, tau) < 1e-4


def test_factorization_domain():
    with pytest.raises(ValueError):
        analysis.factorization_check(3, 0.1)
    with pytest.raises(ValueError):
        analysis.factorization_check(4, 0.4)


def test_jacobi_first_moment_single_spin():
    # d/dt ln J0(2t) = -2 J1(2t)/J0(2t)
    t = 0.45
    m = analysis._jacobi_first_moment(1, t)
    assert abs(m - (-2 * special.j1(2 * t) / special.j0(2 * t))) < 1e-13


def test_second_derivative_small_tau():
    assert abs(analysis.second_tau_derivative(4, 1e-3) - 2) < 1e-3


def test_second_derivative_scaling_with_n():
    r4 = analysis.second_tau_derivative(4, 0.2) / 16
    r8 = analysis.second_tau_derivative(8, 0.2) / 64
    assert 3.5 < r4 / r8 < 4.5


def test_error_E_reference_zero_guard():
    # N=1 at the J0 zero: the infinite-chain reference vanishes
    with pytest.raises(ZeroProximityError):
        analysis.error_E(1, 4, J0_FIRST_ZERO / 2)

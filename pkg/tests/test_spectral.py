from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from speclab import special
from speclab import testfunctions as tf
from speclab.defaults import DEFAULTS
from speclab.dirac import Trajectory, integrate
from speclab.kernel import PotentialTable, build_potential_table
from speclab.special import PoleError
from speclab.spectral import (PLANCHEREL_CALIBRATION, IsometricExpansion, MatchedEigensolution,
                              ScanResolutionWarning, bound_state_norm, calibrate_plancherel,
                              counting_comparison, density_trend, eigenvector_ratio,
                              find_bound_states, isometric_forward, isometric_inverse,
                              m_bound, m_scattering, matched_eigensolution, orthogonality_matrix,
                              plancherel_check, reproducing_projection, scan_grid,
                              scattering_measure, scattering_psi, scattering_transform,
                              trajectory_norm, weyl_m_by_integration)
from speclab.structure import evaluator_norm_critical, structure

finite = dict(allow_nan=False, allow_infinity=False)


@pytest.fixture(scope="module")
def spectrum_small():
    return find_bound_states(0.3, 12.0)


# scan grid and zeros

def test_scan_grid_shape():
    g = scan_grid(1.0, 40.0)
    assert g[0] == 0 and g[-1] == 40.0
    low = np.diff(g[g <= 20])
    assert np.allclose(low[:-1], 0.05)
    assert np.all(np.diff(g[g > 21]) < 0.05)
    with pytest.raises(ValueError):
        scan_grid(1.0, -1.0)


def test_spectrum_symmetric_and_simple(spectrum_a1, spectrum_small):
    for spec in (spectrum_a1, spectrum_small):
        assert spec.is_symmetric()
        ev = structure(spec.a0)
        for e in spec.eigenvalues:
            local = np.max(np.abs(ev.critical(np.linspace(e - 0.5, e + 0.5, 11))[1]))
            assert abs(ev.critical(e)[1]) > 1e-2 * local
        assert np.all(spec.norms > 0)


def test_first_zero_at_unit_a(spectrum_a1):
    assert len(spectrum_a1.first(5)) == 5
    assert abs(spectrum_a1.positive[0] - 19.10) < 0.01


def test_zeros_are_zeros(spectrum_small):
    # the Newton correction |A / A'| bounds the distance to the true zero
    ev = structure(0.3)
    e = spectrum_small.eigenvalues
    h = 1e-5
    big_a = ev.critical(e)[0]
    slope = (ev.critical(e + h)[0] - ev.critical(e - h)[0]) / (2 * h)
    assert np.max(np.abs(big_a / slope)) <= DEFAULTS["bisect_tol"]


def test_interlacing(spectrum_a1, spectrum_small):
    assert spectrum_a1.interlaces()
    assert spectrum_small.interlaces()
    assert len(spectrum_small.positive) >= 4


def test_scan_resolution_warning():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        find_bound_states(0.3, 30.0, step=1.0, with_norms=False)
    assert any(issubclass(r.category, ScanResolutionWarning) for r in rec)


def test_no_scan_warning_at_default_step():
    with warnings.catch_warnings():
        warnings.simplefilter("error", ScanResolutionWarning)
        find_bound_states(0.3, 30.0, with_norms=False)


def test_find_bound_states_validates():
    with pytest.raises(ValueError):
        find_bound_states(-1.0, 10.0)
    with pytest.raises(ValueError):
        find_bound_states(1.0, 0.0)


# norms

def test_norm_positive_first_three(spectrum_a1):
    for e in spectrum_a1.first(3):
        assert bound_state_norm(1.0, e) > 0


def test_norm_matches_evaluator_norm(spectrum_a1):
    for e in spectrum_a1.first(5):
        n1 = bound_state_norm(1.0, e)
        assert abs(n1 - evaluator_norm_critical(1.0, e)) < 1e-5 * n1


def test_norm_matches_ratio_form(spectrum_small):
    # 2 B^2 d/dE (A/B) at a zero of A
    ev = structure(0.3)
    for e in spectrum_small.first(3):
        h = 1e-4 * (1 + e)
        r = [float(np.divide(*ev.critical(x))) for x in (e - 2 * h, e - h, e + h, e + 2 * h)]
        d = (8 * (r[2] - r[1]) - (r[3] - r[0])) / (12 * h)
        b = float(ev.critical(e)[1])
        n1 = bound_state_norm(0.3, e)
        assert abs(2 * b * b * d - n1) < 1e-5 * n1


def test_norm_matches_trajectory_integral(spectrum_a1):
    e = spectrum_a1.first(1)[0]
    quad, end = trajectory_norm(1.0, e)
    assert end > 0
    assert abs(quad / bound_state_norm(1.0, e) - 1) < 1e-2


def test_norm_rejects_non_zero():
    with pytest.raises(ValueError):
        bound_state_norm(1.0, 5.0)


def test_orthogonality(spectrum_a1):
    gram = orthogonality_matrix(1.0, spectrum_a1.first(5))
    off = gram - np.diag(np.diag(gram))
    assert np.allclose(np.diag(gram), 1.0)
    assert np.max(np.abs(off)) < 1e-3


def test_eigenvector_ratio_constant(spectrum_a1):
    ratio, expected = eigenvector_ratio(1.0, spectrum_a1.first(1)[0])
    assert np.max(np.abs(ratio / expected - 1)) < 1e-6


# m-functions

@pytest.mark.parametrize("E", [1 + 0.5j, 3 + 0.2j])
def test_m_bound_herglotz_examples(E):
    assert m_bound(1.0, E).imag > 0


def test_m_bound_real_on_axis():
    m = m_bound(1.0, 4.0)
    assert abs(m.imag) < 1e-8 * abs(m)


def test_m_bound_pole_error(spectrum_small):
    with pytest.raises(PoleError):
        m_bound(0.3, spectrum_small.positive[0])


def test_m_bound_poles_match_spectrum(spectrum_small):
    for e in spectrum_small.first(3):
        def inv(x):
            try:
                return 1.0 / m_bound(0.3, x).real
            except PoleError:
                return 0.0
        pole = brentq(inv, e - 0.01, e + 0.01, xtol=1e-13)
        assert abs(pole - e) < 1e-8


def test_m_scattering_free():
    for E in (0.0, 2.0, 5.0 + 1j):
        assert abs(m_scattering(1.0, E, free=True) - 1j) < 1e-14
    dens = scattering_measure(1.0, [0.0, 3.0], free=True).density
    assert np.allclose(dens, 1 / np.pi, rtol=1e-14)


@pytest.mark.parametrize("E", [0.0, 2.0, 5.0])
def test_m_scattering_herglotz_examples(E):
    assert m_scattering(1.0, E + 0.3j).imag > 0


def test_density_equals_im_m():
    grid = np.linspace(0, 20, 9)
    dens = scattering_measure(1.0, grid).density
    im_m = np.array([m_scattering(1.0, e).imag for e in grid]) / np.pi
    assert np.all(dens > 0)
    assert np.max(np.abs(dens - im_m) / dens) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10, **finite), st.floats(0.05, 3.0, **finite))
def test_herglotz_property(x, y):
    E = complex(x, y)
    assert m_bound(1.0, E).imag > 0
    assert m_scattering(1.0, E).imag > 0


def test_m_scattering_by_ode_integration():
    table = build_potential_table(-6.0, -0.5, 256)
    for E in (2 + 1.5j, 5 + 2j):
        direct = m_scattering(math.exp(-1.0), E)
        ode = weyl_m_by_integration(-1.0, E, table, -6.0)
        assert abs(ode - direct) < 1e-7 * abs(direct)


def test_m_by_integration_free():
    m = weyl_m_by_integration(0.0, 1 + 1j, PotentialTable.zero(-6.0, 0.0), -6.0)
    assert abs(m - 1j) < 1e-8


# scattering solutions

def test_psi_boundary_and_realness():
    u0 = 0.0
    u = np.linspace(-2.0, u0, 5)
    psi = scattering_psi(1.0, [0.0, 1.5, 4.0], u)
    assert np.array_equal(psi[-1], np.array([[1.0, 0.0]] * 3))
    assert psi.dtype == float


def test_psi_parity_in_E():
    u = np.linspace(-2.0, 0.0, 5)
    plus = scattering_psi(1.0, [2.5], u)[:, 0]
    minus = scattering_psi(1.0, [-2.5], u)[:, 0]
    assert np.allclose(plus[:, 0], minus[:, 0], atol=1e-12)
    assert np.allclose(plus[:, 1], -minus[:, 1], atol=1e-12)


def test_psi_solves_the_system(table_full):
    # the direct J/K construction against ODE integration from [1; 0]
    u0, E = -0.5, 3.0
    traj = integrate(u0, -2.5, E, (1.0, 0.0), table_full)
    direct = scattering_psi(math.exp(u0), [E], [traj.u_grid[-1]])[0, 0]
    assert abs(traj.alpha[-1].real - direct[0]) < 1e-7
    assert abs(traj.beta[-1].real - direct[1]) < 1e-7


# matched eigensolutions

def test_right_piece_square_integrable_at_eigenvalue(spectrum_a1):
    e = spectrum_a1.first(1)[0]
    sol = matched_eigensolution(1.0, e, 0.0, 1.0, right_span=0.6)
    tails = sol.tail_norms(6)
    assert np.all(np.diff(tails[2:]) < 0)
    off = matched_eigensolution(1.0, e + 0.7, 0.0, 1.0, right_span=0.6).tail_norms(6)
    assert off[-1] > 10 * tails[-1]


def test_left_piece_boundary():
    sol = matched_eigensolution(1.0, 3.0, 1.0, 0.0)
    lv, rv = sol.one_sided()
    assert lv[1] == 0.0 and lv[0] == 1.0
    assert np.all(rv == 0)


def test_left_piece_solves_system(table_full):
    sol = matched_eigensolution(math.exp(-0.5), 3.0, 1.0, 0.0, left_span=2.0, left_points=801)
    res = sol.left.residual(table_full)
    scale = np.max(np.abs(sol.left.values))
    assert res < 1e-4 * scale


def test_pairings_of_bound_state(spectrum_a1):
    sol = matched_eigensolution(1.0, spectrum_a1.first(1)[0], 0.0, 1.0)
    p0, p1 = sol.pairings()
    assert p0 == 0.0 and p1 == 0.5
    assert sol.satisfies_matching()


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3, **finite), st.floats(-3, 3, **finite))
def test_matching_holds_for_any_coefficients(lam, mu_r):
    sol = matched_eigensolution(0.5, 2.0, lam, mu_r, left_span=0.5, left_points=3, right_span=0.05)
    assert sol.satisfies_matching(1e-12)


def test_matching_fails_without_boundary_conditions():
    u = np.array([-1.0, 0.0])
    left = Trajectory(u, np.array([0.3, 1.0 + 0j]), np.array([0.1, 0.4 + 0j]), 1.0)
    right = Trajectory(np.array([0.0, 1.0]), np.array([0.2 + 0j, 0.0]), np.array([1.0 + 0j, 0.0]), 1.0)
    sol = MatchedEigensolution(1.0, 1.0, 1.0, 1.0, left, right)
    c0, c1 = sol.singular_residual()
    # residual -l1 delta0 - r0 delta1
    assert abs(c0 + 0.4) < 1e-15 and abs(c1 + 0.2) < 1e-15
    assert not sol.satisfies_matching()


# isometric expansion

@pytest.mark.parametrize("name", ["gaussian", "x2_gaussian", "log_gaussian"])
def test_parseval(full_line_expansion, name):
    item = tf.full_line_tests()[name]
    assert abs(full_line_expansion.norm_F(item.F) / item.norm2 - 1) < 1e-3
    assert full_line_expansion.parseval_defect(item.F) < 0.01


@pytest.mark.parametrize("name", ["gaussian", "x2_gaussian", "log_gaussian"])
def test_round_trip(full_line_expansion, name):
    assert full_line_expansion.round_trip_defect(tf.full_line_tests()[name].F) < 0.01


def test_cosine_transform_flips_beta(full_line_expansion):
    item = tf.full_line_tests()["x2_gaussian"]
    a1, b1 = full_line_expansion.forward(item.F)
    a2, b2 = full_line_expansion.forward(item.F_reflect)
    scale = np.max(np.abs(a1)) + np.max(np.abs(b1))
    assert np.max(np.abs(a1 - a2)) < 1e-12 * scale
    assert np.max(np.abs(b1 + b2)) < 1e-12 * scale


def test_forward_inverse_wrappers():
    u = np.linspace(-3, -1, 21)
    F = tf.full_line_tests()["gaussian"].F
    alpha, beta = isometric_forward(F, u, 5.0, 0.5)
    E, back = isometric_inverse(alpha, beta, u, 5.0, 0.5)
    ex = IsometricExpansion(u, 5.0, 0.5)
    assert np.array_equal(E, ex.E)
    assert np.allclose(back, ex.inverse(*ex.forward(F)))


def test_projection_by_truncation():
    a0 = 0.5
    u0 = math.log(a0)
    u = np.arange(u0, 0.8 + 1e-9, 0.02)
    ex = IsometricExpansion(u, 30.0, 0.05)
    F = tf.full_line_tests()["gaussian"].F
    alpha, beta = ex.forward(F)
    targets = np.array([0.512, 3.237])
    proj = reproducing_projection(a0, F, ex.E, targets)
    for et, p in zip(targets, proj):
        ab = np.array([structure(math.exp(x)).critical(et) for x in u])
        trunc = np.sum(ex.wu / 2 * (alpha * 2 * ab[:, 0] + beta * 2 * ab[:, 1]))
        assert abs(trunc - p) < 1e-2 * abs(p)


# scattering transform

def test_plancherel_calibration_is_one():
    assert PLANCHEREL_CALIBRATION == 1.0
    assert abs(calibrate_plancherel() - 1) < 1e-4


@pytest.mark.parametrize("name", ["alpha_bump", "mixed_bump"])
def test_plancherel_bumps(name):
    u, alpha, beta = tf.left_bumps(0.0)[name]
    lhs, rhs = plancherel_check(alpha, beta, u, 1.0)
    assert abs(lhs - rhs) / lhs < 0.01


def test_scattering_transform_even_odd_split():
    u, alpha, beta = tf.left_bumps(0.0)["mixed_bump"]
    t_plus = scattering_transform(alpha, beta, u, 1.0, [1.7])
    t_minus = scattering_transform(alpha, beta, u, 1.0, [-1.7])
    t_alpha = scattering_transform(alpha, 0 * beta, u, 1.0, [1.7])
    assert abs((t_plus + t_minus) / 2 - t_alpha) < 1e-12 * abs(t_alpha)


def test_scattering_transform_domain_warning():
    u = np.linspace(-1, 0.5, 11)
    with pytest.warns(Warning):
        scattering_transform(np.ones(11), np.zeros(11), u, 1.0, [1.0])


# counting

def test_counting_staircase(spectrum_small):
    T = np.linspace(1.0, 12.0, 45)
    counts, ratios = density_trend(spectrum_small, T)
    assert np.all(np.diff(counts) >= 0)
    neg = [int(np.sum((spectrum_small.eigenvalues < 0) & (spectrum_small.eigenvalues >= -t))) for t in T]
    assert list(counts) == neg


def test_counting_ratio(spectrum_a1):
    count, ratio = counting_comparison(spectrum_a1, 30.0)
    assert count == int(np.sum((spectrum_a1.positive <= 30.0)))
    assert ratio == pytest.approx(count / special.rvm_count(30.0))
    with pytest.raises(ValueError):
        counting_comparison(spectrum_a1, 50.0)

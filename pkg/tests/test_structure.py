from __future__ import annotations

import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from speclab import special
from speclab.kernel import solve_phi
from speclab.special import PoleError
from speclab.structure import (TRACE_HEADER, E_hat_tail, PoleProximityWarning, StructureEvaluator,
                               evaluator_inner, evaluator_norm_critical, j_hat, k_hat, structure,
                               write_trace_csv)

finite = dict(allow_nan=False, allow_infinity=False)


def _mellin_quad(sol, s):
    """int_0^a phi(x) x^(-s) dx by adaptive quadrature (Re s < 1)."""
    def part(f):
        return quad(f, 0, sol.a, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    re = part(lambda x: sol(x) * x ** (-s.real) * math.cos(s.imag * math.log(x)))
    im = part(lambda x: -sol(x) * x ** (-s.real) * math.sin(s.imag * math.log(x)))
    return complex(re, im)


# j_hat, k_hat

@pytest.mark.parametrize("s", [0.5 + 0j, 0.3 + 2j, -0.4 + 5j])
def test_jk_termwise_sum_matches_quadrature(s):
    a = 0.6
    plus, minus = solve_phi(a, "+", 64), solve_phi(a, "-", 64)
    j_ref = a ** (0.5 - s) - math.sqrt(a) * _mellin_quad(plus, s)
    k_ref = 1j * a ** (0.5 - s) + 1j * math.sqrt(a) * _mellin_quad(minus, s)
    ev = StructureEvaluator.at(a, 64)
    j, k = ev.jk(s)
    assert abs(j - j_ref) < 1e-9 * abs(j_ref)
    assert abs(k - k_ref) < 1e-9 * abs(k_ref)


def test_small_a_asymptotics():
    a = 1e-4
    assert abs(j_hat(a, 0.5) - 1) < 1e-3
    assert abs(j_hat(a, 0.5 + 5j) - a ** (-5j)) < 1e-3
    assert abs(k_hat(a, 0.5) - 1j) < 1e-3


def test_real_s_values():
    assert abs(j_hat(1.0, 0.3).imag) < 1e-14
    assert abs(k_hat(1.0, 0.3).real) < 1e-14


def test_k_hat_conjugation():
    s = 0.5 + 2j
    assert abs(np.conj(k_hat(1.0, np.conj(s))) + k_hat(1.0, s)) < 1e-12


def test_mellin_pole_error():
    with pytest.raises(PoleError):
        j_hat(0.5, 1.0)


def test_pole_proximity_warning():
    ev = structure(0.5)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        ev.ab(1.0 + 1e-8)
    assert any(issubclass(r.category, PoleProximityWarning) for r in rec)


def test_ab_pole_collision():
    with pytest.raises(PoleError):
        structure(0.5).ab(3.0)


# A, B

def test_critical_line_realness_example():
    big_a, big_b = structure(1.0).ab(0.5 + 3j)
    assert abs(big_a.imag) < 1e-8
    assert abs(big_b.imag) < 1e-8


@pytest.mark.parametrize("a", [0.5, 1.0])
def test_critical_line_realness_grid(a):
    big_a, big_b = structure(a).ab(0.5 + 1j * np.linspace(-12, 12, 25))
    assert np.all(np.abs(big_a.imag) <= 1e-8 * (1 + np.abs(big_a)))
    assert np.all(np.abs(big_b.imag) <= 1e-8 * (1 + np.abs(big_b)))


def test_functional_symmetry_example():
    ev = structure(1.0)
    s = 0.3 + 2j
    a_s, b_s = ev.ab(s)
    a_r, b_r = ev.ab(1 - s)
    assert abs(a_s - a_r) < 1e-8 * abs(a_s)
    assert abs(b_s + b_r) < 1e-8 * abs(b_s)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, 3.0, **finite), st.floats(-15, 15, **finite))
def test_functional_symmetry_property(x, y):
    s = complex(x, y)
    if abs(y) < 0.05:
        return
    ev = structure(0.5)
    a_s, b_s = ev.ab(s)
    a_r, b_r = ev.ab(1 - s)
    assert abs(a_s - a_r) <= 1e-8 * abs(a_s)
    assert abs(b_s + b_r) <= 1e-8 * abs(b_s)


def test_extended_and_double_paths_agree():
    s = np.array([0.5 + 4j, 0.2 - 1j])
    ext = StructureEvaluator.at(0.7, 64, 128)
    dbl = StructureEvaluator.at(0.7, 64, 53)
    for x, y in zip(ext.ab(s), dbl.ab(s)):
        assert np.max(np.abs(x - y) / np.abs(x)) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(0.55, 3.0, **finite), st.floats(-10, 10, **finite))
def test_herglotz_precursor(x, y):
    if abs(y) < 0.05:
        return
    big_a, big_b = structure(0.8).ab(complex(x, y))
    assert (big_b / big_a).imag > 0


# E_hat

def test_E_hat_real_for_real_s():
    assert abs(structure(1.0).E_hat(0.7).imag) < 1e-12


def test_E_hat_dual_route():
    s = 0.8 + 1.5j
    primary = structure(1.0).E_hat(s)
    oracle = E_hat_tail(1.0, s)
    assert abs(primary - oracle) < 1e-5 * abs(primary)


def test_E_hat_tail_domain():
    with pytest.raises(ValueError):
        E_hat_tail(0.5, -0.2 + 1j)


def test_E_dominates_reflection_right_of_line():
    ev = structure(1.0)
    s = 0.8 + 2j
    assert abs(ev.cal_E(s)) > abs(ev.cal_E(1 - s))
    lhs = abs(ev.E_hat(s) * special.gamma_factor(s))
    rhs = abs(ev.E_hat(1 - s) * special.gamma_factor(1 - s))
    assert lhs > rhs


def test_F_hat_is_reflected_E_hat():
    ev = structure(0.6)
    s = 0.35 + 1.2j
    e1 = ev.E_hat(1 - s) * special.gamma_factor(1 - s)
    f = ev.F_hat(s) * special.gamma_factor(s)
    assert abs(e1 - f) < 1e-10 * abs(f)


# evaluator inner products and norms

def test_evaluator_symmetry():
    z, w = 0.6 + 1j, 0.7 - 2j
    assert abs(evaluator_inner(1.0, z, w) - evaluator_inner(1.0, w, z)) < 1e-9


def test_evaluator_diagonal_positive():
    for E in (0.0, 1.0, 5.0):
        z = 0.5 + 1j * E
        v = evaluator_inner(1.0, z, np.conj(z))
        assert abs(v.imag) < 1e-9 * abs(v)
        assert v.real > 0


def test_removable_limit_is_continuous():
    ev = structure(0.5)
    z = 0.5 + 2j
    w = np.conj(z)
    at = ev.evaluator_inner(z, w)
    near = ev.evaluator_inner(z, w + 1e-3j, limit=False)
    assert abs(at - near) < 1e-2 * abs(at)
    forced = ev.evaluator_inner(z, w + 1e-7, limit=True)
    assert abs(forced - at) < 1e-5 * abs(at)


@pytest.mark.parametrize("E", [0.0, 1.0, 5.0])
def test_norm_critical_matches_inner_limit(E):
    s = 0.5 + 1j * E
    inner = evaluator_inner(1.0, s, np.conj(s)).real
    scaled = abs(special.gamma_factor(s)) ** 2 * inner
    norm = evaluator_norm_critical(1.0, E)
    assert norm > 0
    assert abs(norm - scaled) < 1e-6 * norm


def test_norm_critical_positive_grid():
    ev = structure(0.4)
    assert all(ev.evaluator_norm_critical(E) > 0 for E in np.linspace(-20, 20, 17))


# trace emitter

def test_trace_csv(tmp_path):
    ev = structure(0.5)
    path = write_trace_csv(tmp_path / "trace.csv", ev, [0.0, 1.5])
    rows = list(csv.reader(path.open()))
    assert rows[0] == TRACE_HEADER
    assert len(rows) == 3
    big_a, _ = ev.ab(0.5 + 1.5j)
    assert abs(float(rows[2][1]) - big_a.real) < 1e-14

"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, shown in the terminal summary under
"acceptance criteria".  Criterion 9 is expected to fail at a0 = 1 (see the
README) and is marked as a strict expected failure.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from speclab import special
from speclab import testfunctions as tf
from speclab.dirac import ab_trajectory, integrate, w1_identity, wronskian_AJ
from speclab.kernel import PotentialTable, log_det, log_det_dirichlet, mu, mu_finite_difference, mu_resolvent
from speclab.spectral import (bound_state_norm, calibrate_plancherel, density_trend,
                              find_bound_states, m_scattering, orthogonality_matrix,
                              plancherel_check, weyl_m_by_integration)
from speclab.structure import evaluator_inner, evaluator_norm_critical, structure


def test_01_chi_identity(acceptance):
    rng = np.random.default_rng(1)
    s = rng.uniform(-4, 5, 50) + 1j * rng.uniform(-40, 40, 50)
    err = float(np.max(np.abs(special.chi(s) * special.chi(1 - s) - 1)))
    assert acceptance(1, "chi(s) chi(1-s) = 1 on 50 random s", err < 1e-10,
                      f"max error {err:.2e} < 1e-10")


def test_02_free_system(acceptance):
    zero = PotentialTable.zero(-7.0, 3.0)
    err = 0.0
    for E in (0.5, 1.0, 3.0):
        for du in (math.pi / 2, 1.0, -2.0):
            psi = integrate(0.0, du, E, (1.0, 0.0), zero).at_end()
            phi = integrate(0.0, du, E, (0.0, 1.0), zero).at_end()
            c, s = math.cos(E * du), math.sin(E * du)
            err = max(err, abs(psi.alpha - c), abs(psi.beta - s), abs(phi.alpha + s), abs(phi.beta - c))
    m_err = max(abs(m_scattering(1.0, E, free=True) - 1j) for E in (0.0, 2.0, 4.0 + 1j))
    m_ode = max(abs(weyl_m_by_integration(0.0, E, zero, -7.0) - 1j) for E in (1 + 1j, 4 + 2j))
    worst = max(err, m_err, m_ode)
    assert acceptance(2, "free rotation solutions and m = +i", worst < 1e-8,
                      f"rotation {err:.2e}, m direct {m_err:.2e}, m by integration {m_ode:.2e} < 1e-8")


def test_03_determinant_factorization(acceptance):
    gaps = {a: abs(log_det(a, "+") + log_det(a, "-") - log_det_dirichlet(a)) for a in (0.25, 0.5, 1.0, 1.5)}
    worst = max(gaps.values())
    assert acceptance(3, "log det(1+C) + log det(1-C) vs Dirichlet kernel", worst < 1e-7,
                      f"max gap {worst:.2e} < 1e-7 over a in {sorted(gaps)}")


def test_04_mu_cross_validation(acceptance):
    us = np.linspace(-3.0, 0.7, 12)
    rel = max(abs(mu_resolvent(u) - mu_finite_difference(u)) / mu_resolvent(u) for u in us)
    tail = np.linspace(-8.0, -3.0, 11)
    slope = float(np.polyfit(-tail, np.log([mu(u) for u in tail]), 1)[0])
    ok = rel < 1e-6 and slope < 0
    assert acceptance(4, "mu resolvent vs finite differences, left-tail decay", ok,
                      f"max rel gap {rel:.2e} < 1e-6 on [-3, 0.7]; log mu slope vs -u {slope:.3f} < 0")


S_VALUES = [0.5 + 0j, 0.5 + 1j, 0.5 + 3j, 0.5 + 7j, 0.5 + 12j, 0.7 + 0j, 0.3 + 2j, 0.8 - 1.5j,
            0.1 + 5j, 1.2 + 0.5j]


def test_05_dirac_propagation(acceptance):
    worst = 0.0
    for s in S_VALUES:
        traj = ab_trajectory(1.0, 2.0, s, method="exact")
        big_a, big_b = structure(2.0).ab(s)
        # B vanishes at s = 1/2, so measure relative to the vector norm
        scale = math.hypot(abs(big_a), abs(big_b))
        err = math.hypot(abs(traj.alpha[-1] - big_a), abs(traj.beta[-1] - big_b)) / scale
        assert math.isfinite(err)
        worst = max(worst, err)
    assert acceptance(5, "[A; B] propagated from a = 1 to a = 2", worst < 1e-5,
                      f"max rel error {worst:.2e} < 1e-5 at 10 values of s")


def test_06_wronskian_identities(acceptance):
    pairs = [(0.5, 0.5), (1.0, 0.5), (2.0, 0.5), (0.3, 0.3 + 2j), (1.0, 0.3 + 2j), (0.7, 0.9 - 4j),
             (1.5, 0.2 + 6j), (0.1, 0.5 + 10j), (1.2, -0.5 + 1j), (2.0, 0.6 + 3j)]
    w_err = max(abs(wronskian_AJ(a, s) - 1j * special.gamma_factor(1 - s)) / abs(special.gamma_factor(1 - s))
                for a, s in pairs)
    w1_err = max(abs(w1_identity(math.exp(u), E) - 1)
                 for u in np.linspace(-2.0, 1.0, 7) for E in np.linspace(0.0, 10.0, 6))
    ok = w_err < 1e-6 and w1_err < 1e-6
    assert acceptance(6, "A K - B J = i gamma(1-s) and Im(-J conj K) = 1", ok,
                      f"wronskian rel {w_err:.2e}, W1 {w1_err:.2e} < 1e-6")


def test_07_reproducing_structure(acceptance, spectrum_a1):
    pts = [(0.6 + 1j, 0.7 - 2j), (0.2 + 3j, 0.9 + 0.5j), (0.5 + 5j, 1.3 - 1j)]
    sym = max(abs(evaluator_inner(1.0, z, w) - evaluator_inner(1.0, w, z)) / abs(evaluator_inner(1.0, z, w))
              for z, w in pts)
    diag = [evaluator_inner(1.0, z, np.conj(z)).real for z in (0.5 + 0j, 0.5 + 2j, 0.7 + 1j, 0.5 + 9j)]
    first = spectrum_a1.first(5)
    match = max(abs(bound_state_norm(1.0, e) - evaluator_norm_critical(1.0, e)) / bound_state_norm(1.0, e)
                for e in first)
    ok = sym < 1e-9 and min(diag) > 0 and len(first) == 5 and match < 1e-5
    assert acceptance(7, "evaluator symmetry, positivity, norms at first 5 states", ok,
                      f"symmetry {sym:.2e} < 1e-9, min diagonal {min(diag):.2e} > 0, "
                      f"norm match {match:.2e} < 1e-5")


def test_08_bound_states(acceptance, spectrum_a1):
    low = find_bound_states(1.0, 20.0)
    ev = structure(1.0)
    simple = all(abs(ev.critical(e)[1]) > 0 and n > 0 for e, n in zip(low.eigenvalues, low.norms))
    gram = orthogonality_matrix(1.0, spectrum_a1.first(5))
    off = float(np.max(np.abs(gram - np.diag(np.diag(gram)))))
    ok = simple and low.is_symmetric() and low.interlaces() and off < 1e-3
    assert acceptance(8, "zeros of A on [0, 20] simple, symmetric, interlacing; orthogonality", ok,
                      f"{len(low.positive)} zero(s) on (0, 20], symmetric={low.is_symmetric()}, "
                      f"interlacing={low.interlaces()}, max |cos| {off:.2e} < 1e-3")


@pytest.mark.xfail(strict=True, reason="a0 = 1 has no zeros of A below E = 19.1; see README")
def test_09_density_trend(acceptance):
    E_max = 20.0
    spectrum = find_bound_states(1.0, E_max, with_norms=False)
    T = np.linspace(10.0, E_max, 21)
    _, ratio = density_trend(spectrum, T)
    in_band = bool(np.all((ratio >= 0.8) & (ratio <= 1.2)))
    top = np.abs(ratio[T >= 0.5 * (10.0 + E_max)] - 1)
    monotone = bool(np.all(np.diff(top) <= 1e-12))
    ok = in_band and monotone
    acceptance(9, "N(T) / rvm_count(T) in [0.8, 1.2], approaching 1", ok,
               f"ratio range [{ratio.min():.3f}, {ratio.max():.3f}], "
               f"distance to 1 non-increasing on top half: {monotone}")
    assert ok


def test_10_expansion_isometry(acceptance, full_line_expansion):
    parseval = {name: full_line_expansion.parseval_defect(item.F)
                for name, item in tf.full_line_tests().items()}
    calib = calibrate_plancherel()
    planch = {}
    for name, (u, alpha, beta) in tf.left_bumps(0.0).items():
        lhs, rhs = plancherel_check(alpha, beta, u, 1.0)
        planch[name] = abs(lhs - rhs) / lhs
    ok = max(parseval.values()) < 0.01 and max(planch.values()) < 0.01 and abs(calib - 1) < 1e-3
    assert acceptance(10, "Parseval (3 functions) and scattering Plancherel (2 functions)", ok,
                      f"Parseval max {max(parseval.values()):.2e}, Plancherel max "
                      f"{max(planch.values()):.2e} < 1e-2, free calibration {calib:.6f}")

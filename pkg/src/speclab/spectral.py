"""Spectral theory of the Dirac system split at u0 = log a0.

On (u0, oo) with boundary condition alpha(u0) = 0 the spectrum is discrete and
sits at the zeros E_n of E -> A_{a0}(1/2 + iE); the eigenvectors are

    Z_n(u) = 2 [A(u, rho_n); B(u, rho_n)] = 2 B(u0, rho_n) T_n(u),

with T_n(u0) = [0; 1].  On (-oo, u0) the spectrum is absolutely continuous
with m(E) = -J(u0, s) / K(u0, s) and density 1 / (pi |K(u0, s)|^2).

Inner products on two-component functions use the measure du/2 unless stated
otherwise.  Right half-line profiles are taken by direct evaluation of A and B
at every u rather than by forward integration, which would amplify rounding
through the growing mode (see :mod:`speclab.dirac`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import special
from .defaults import DEFAULTS
from .dirac import Trajectory, _exact_potential, free_jk, integrate, integrate_exact
from .kernel import PotentialTable
from .special import PoleError
from .structure import StructureEvaluator

__all__ = [
    "BoundStateSpectrum",
    "ScatteringMeasure",
    "MatchedEigensolution",
    "IsometricExpansion",
    "NonPositiveNormError",
    "ScanResolutionWarning",
    "GridResolutionWarning",
    "TruncationDomainWarning",
    "PLANCHEREL_CALIBRATION",
    "scan_grid",
    "critical_zeros",
    "find_bound_states",
    "bound_state_norm",
    "trajectory_norm",
    "z_profile",
    "orthogonality_matrix",
    "eigenvector_ratio",
    "m_bound",
    "m_scattering",
    "scattering_measure",
    "weyl_m_by_integration",
    "matched_eigensolution",
    "isometric_forward",
    "isometric_inverse",
    "reproducing_projection",
    "scattering_psi",
    "scattering_transform",
    "plancherel_check",
    "calibrate_plancherel",
    "counting_comparison",
    "density_trend",
]

# Ratio of the two sides of the scattering Plancherel identity measured on the
# free system (mu = 0) by calibrate_plancherel; frozen here.
PLANCHEREL_CALIBRATION = 1.0


class NonPositiveNormError(ArithmeticError):
    """A bound-state norm came out <= 0, so the zero is probably misidentified."""


class ScanResolutionWarning(RuntimeWarning):
    pass


class GridResolutionWarning(RuntimeWarning):
    pass


class TruncationDomainWarning(RuntimeWarning):
    pass


def _evaluator(a: float, n: int | None = None) -> StructureEvaluator:
    return StructureEvaluator.at(a, n)


# -- zero finding -------------------------------------------------------------

def scan_grid(a0: float, E_max: float, step: float | None = None) -> np.ndarray:
    """Non-negative scan abscissae up to E_max.

    Constant step up to E = 20, then shrinking like 1/ln(E a0^2 + e) so the
    grid keeps pace with the logarithmically growing zero density.
    """
    h0 = DEFAULTS["scan_step"] if step is None else float(step)
    if E_max <= 0 or h0 <= 0:
        raise ValueError("E_max and step must be positive")
    knee = 20.0
    pts = list(np.arange(0.0, min(E_max, knee), h0))
    e = pts[-1] + h0 if E_max > knee else None
    ref = math.log(knee * a0 * a0 + math.e)
    while e is not None and e < E_max:
        pts.append(e)
        e += h0 * ref / math.log(e * a0 * a0 + math.e)
    pts.append(float(E_max))
    return np.unique(np.asarray(pts, dtype=float))


def critical_zeros(ev: StructureEvaluator, which: str, E_lo: float, E_hi: float,
                   grid: np.ndarray | None = None, xtol: float | None = None
                   ) -> tuple[np.ndarray, list[tuple[float, float]], float]:
    """Zeros of A or B (``which`` in {"A", "B"}) on [E_lo, E_hi].

    Returns (zeros, brackets, smallest grid step).  Sign changes on the grid
    are refined by Brent's method to ``xtol``, by default the tighter of
    ``DEFAULTS['bisect_tol']`` and 1e-13 (pole detection in :func:`m_bound`
    needs near machine-level zeros); exact grid hits are kept as they are.
    """
    if which not in ("A", "B"):
        raise ValueError("which must be 'A' or 'B'")
    if grid is None:
        pos = scan_grid(ev.a, max(abs(E_lo), abs(E_hi)))
        grid = np.unique(np.concatenate([-pos, pos]))
    grid = grid[(grid >= E_lo) & (grid <= E_hi)]
    idx = 0 if which == "A" else 1
    if xtol is None:
        xtol = min(float(DEFAULTS["bisect_tol"]), 1e-13)

    def f(e: float) -> float:
        return float(ev.critical(e)[idx])

    vals = ev.critical(grid)[idx]
    zeros: list[float] = []
    brackets: list[tuple[float, float]] = []
    for k in range(len(grid)):
        if vals[k] == 0.0:
            zeros.append(float(grid[k]))
            brackets.append((float(grid[k]), float(grid[k])))
        if k + 1 < len(grid) and vals[k] * vals[k + 1] < 0:
            lo, hi = float(grid[k]), float(grid[k + 1])
            zeros.append(brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))
            brackets.append((lo, hi))
    h_min = float(np.min(np.diff(grid))) if len(grid) > 1 else float("inf")
    return np.asarray(zeros), brackets, h_min


@dataclass(frozen=True)
class BoundStateSpectrum:
    """Zeros E_n of A_{a0} on [-E_max, E_max] with their norms (Z_n|Z_n)."""

    a0: float
    E_max: float
    eigenvalues: np.ndarray
    norms: np.ndarray
    brackets: tuple
    b_zeros: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > 0]

    def first(self, count: int) -> np.ndarray:
        """The ``count`` smallest positive eigenvalues."""
        return self.positive[:count]

    def is_symmetric(self, tol: float = 1e-8) -> bool:
        e = np.sort(self.eigenvalues)
        return len(e) == len(-e[::-1]) and bool(np.all(np.abs(e + e[::-1]) < tol))

    def interlaces(self) -> bool:
        """Between two consecutive zeros of A on [0, E_max] lies exactly one zero of B."""
        za = self.eigenvalues[self.eigenvalues >= 0]
        zb = self.b_zeros[self.b_zeros >= 0]
        if len(za) == 0:
            return True
        merged = sorted([(x, "A") for x in za] + [(x, "B") for x in zb])
        tags = [t for _, t in merged]
        return all(tags[k] != tags[k + 1] for k in range(len(tags) - 1))


def find_bound_states(a0: float, E_max: float, *, step: float | None = None,
                      with_norms: bool = True, n: int | None = None) -> BoundStateSpectrum:
    """Zeros of E -> A_{a0}(1/2 + iE) in [-E_max, E_max].

    Both half-lines are scanned independently so that symmetry is a genuine
    check.  Each zero is confirmed simple by B != 0 there.
    """
    if not a0 > 0:
        raise ValueError(f"a0 must be positive, got {a0!r}")
    if not E_max > 0:
        raise ValueError(f"E_max must be positive, got {E_max!r}")
    ev = _evaluator(a0, n)
    pos = scan_grid(a0, E_max, step)
    grid = np.unique(np.concatenate([-pos, pos]))
    zeros, brackets, _ = critical_zeros(ev, "A", -E_max, E_max, grid)
    b_zeros, _, _ = critical_zeros(ev, "B", -E_max, E_max, grid)
    order = np.argsort(zeros)
    zeros = zeros[order]
    brackets = tuple(brackets[k] for k in order)
    steps = np.diff(grid)
    for lo, hi in zip(zeros[:-1], zeros[1:]):
        # widest scan step touching [lo, hi]
        k0 = max(int(np.searchsorted(grid, lo)) - 1, 0)
        k1 = min(int(np.searchsorted(grid, hi)) + 1, len(steps))
        if hi - lo < 2 * float(np.max(steps[k0:k1])):
            warnings.warn(f"zeros {lo:.6g} and {hi:.6g} are closer than twice the scan step; "
                          "refine the grid", ScanResolutionWarning, stacklevel=2)
            break
    _, big_b = ev.critical(zeros)
    scale = float(np.max(np.abs(ev.critical(grid)[1]))) if len(grid) else 1.0
    for e, b in zip(zeros, np.atleast_1d(big_b)):
        if abs(b) <= 1e-13 * scale:
            raise ArithmeticError(f"B vanishes at the zero E = {e}; zero not simple")
    norms = np.array([bound_state_norm(a0, e, n=n) for e in zeros]) if with_norms else np.full(len(zeros), np.nan)
    return BoundStateSpectrum(float(a0), float(E_max), zeros, norms, brackets, np.sort(b_zeros))


def _dA_dE_contour(ev: StructureEvaluator, E: float, radius: float = 0.25, points: int = 32) -> float:
    """dA/dE at s = 1/2 + iE by the Cauchy integral over a circle in s.

    A'(s) = (1 / 2 pi i) int A(z) / (z - s)^2 dz; the trapezoid rule on the
    circle converges geometrically for entire A.  dA/dE = i A'(s).
    """
    s = 0.5 + 1j * E
    r = min(radius, 0.45 * min(abs(s), abs(s - 1))) if E != 0 else radius
    theta = 2 * np.pi * (np.arange(points) + 0.5) / points
    z = s + r * np.exp(1j * theta)
    big_a, _ = ev.ab(z)
    deriv = np.mean(big_a * np.exp(-1j * theta)) / r
    return float((1j * deriv).real)


def bound_state_norm(a0: float, En: float, *, n: int | None = None, check: bool = True) -> float:
    """(Z_n|Z_n) = 2 i A'(rho_n) B(rho_n) = 2 B dA/dE at E = E_n.

    The derivative is taken by a contour integral, independent of the
    finite differences behind :func:`speclab.structure.evaluator_norm_critical`.
    """
    ev = _evaluator(a0, n)
    big_a, big_b = ev.critical(float(En))
    da = _dA_dE_contour(ev, float(En))
    if check and abs(big_a) > 1e-6 * abs(da) * (1 + abs(En)):
        raise ValueError(f"E = {En} is not a zero of A_{a0} (A = {big_a:.3e})")
    norm = float(2.0 * big_b * da)
    if not norm > 0:
        raise NonPositiveNormError(f"norm {norm:.3e} at E = {En}: zero misidentified upstream")
    return norm


# -- right half-line profiles ------------------------------------------------------

def _gl(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def z_profile(a0: float, energies, u) -> np.ndarray:
    """Z_n(u) = 2 [A(u, rho_n); B(u, rho_n)]; shape (len(u), len(energies), 2)."""
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty((len(u), len(e), 2))
    for i, uu in enumerate(u):
        big_a, big_b = _evaluator(math.exp(uu)).critical(e)
        out[i, :, 0] = 2 * np.atleast_1d(big_a)
        out[i, :, 1] = 2 * np.atleast_1d(big_b)
    return out


def _right_gram(a0: float, energies, panel: float, nodes: int, rel: float,
                max_panels: int) -> tuple[np.ndarray, float]:
    """Gram matrix of Z_n on [u0, U] with du/2, U grown panel by panel.

    Stops once the last panel adds less than ``rel`` of the accumulated
    diagonal for every state.
    """
    u0 = math.log(a0)
    t, w = _gl(nodes)
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    gram = np.zeros((len(e), len(e)))
    for k in range(max_panels):
        lo = u0 + k * panel
        uu = lo + panel * t
        z = z_profile(a0, e, uu)
        contrib = np.einsum("u,uni,umi->nm", panel * w / 2, z, z)
        gram += contrib
        if k > 0 and np.all(np.diag(contrib) < rel * np.diag(gram)):
            return gram, lo + panel
    warnings.warn("right half-line integral not converged; increase max_panels",
                  TruncationDomainWarning, stacklevel=3)
    return gram, u0 + max_panels * panel


def trajectory_norm(a0: float, En: float, *, panel: float = 0.1, nodes: int = 10,
                    rel: float = 1e-4, max_panels: int = 40) -> tuple[float, float]:
    """int_{u0}^{U} |Z_n|^2 du/2 and the truncation point U."""
    gram, end = _right_gram(a0, [En], panel, nodes, rel, max_panels)
    return float(gram[0, 0]), end


def orthogonality_matrix(a0: float, energies, *, panel: float = 0.1, nodes: int = 10,
                         rel: float = 1e-4, max_panels: int = 40) -> np.ndarray:
    """Normalized Gram matrix (Z_n|Z_m) / (|Z_n| |Z_m|)."""
    gram, _ = _right_gram(a0, energies, panel, nodes, rel, max_panels)
    d = np.sqrt(np.diag(gram))
    return gram / np.outer(d, d)


def eigenvector_ratio(a0: float, En: float, span: float = 0.3, samples: int = 6
                      ) -> tuple[np.ndarray, float]:
    """Z_n(u) / T_n(u) along [u0, u0 + span] and the expected constant 2 B(u0, rho_n).

    T_n is integrated from [0; 1] by the arb Taylor integrator; ``span`` is
    kept short because an error dE in E_n grows like the growing mode.
    The ratio uses the beta components, which stay away from zero near u0.
    """
    u0 = math.log(a0)
    s = 0.5 + 1j * En
    traj = integrate_exact(u0, u0 + span, s, (0.0, 1.0), _exact_potential(u0, u0 + span, 40, None))
    pick = np.unique(np.linspace(1, len(traj) - 1, samples).astype(int))
    uu = traj.u_grid[pick]
    z = z_profile(a0, [En], uu)[:, 0, :]
    t_vec = np.column_stack([traj.alpha[pick].real, traj.beta[pick].real])
    ratio = np.where(np.abs(t_vec[:, 1]) > np.abs(t_vec[:, 0]), z[:, 1] / t_vec[:, 1], z[:, 0] / t_vec[:, 0])
    expected = 2 * float(_evaluator(a0).critical(En)[1])
    return ratio, expected


# -- m-functions ---------------------------------------------------------------

def m_bound(a0: float, E: complex) -> complex:
    """-B_{a0}(s) / A_{a0}(s), s = 1/2 + iE."""
    ev = _evaluator(a0)
    s = 0.5 + 1j * complex(E)
    big_a, big_b = ev.ab(s)
    if abs(big_a) <= 1e-14 * abs(big_b):
        raise PoleError(f"m_bound has a pole at E = {E} (zero of A)")
    return ev.exact_quantity(s, "m_bound")


def m_scattering(a0: float, E: complex, *, free: bool = False) -> complex:
    """-J(u0, s) / K(u0, s); with ``free`` the mu = 0 solutions are used."""
    s = 0.5 + 1j * complex(E)
    if free:
        j, k = free_jk(math.log(a0), s)
        return -j / k
    return _evaluator(a0).exact_quantity(s, "m_scattering")


@dataclass(frozen=True)
class ScatteringMeasure:
    """Density of the absolutely continuous spectral measure on (-oo, u0)."""

    a0: float
    E_grid: np.ndarray
    density: np.ndarray

    def to_rows(self) -> list[tuple[float, float]]:
        return [(float(e), float(d)) for e, d in zip(self.E_grid, self.density)]


def _k_at(a0: float, E: np.ndarray, free: bool) -> np.ndarray:
    s = 0.5 + 1j * E
    if free:
        return np.array([free_jk(math.log(a0), v)[1] for v in s])
    return np.asarray(_evaluator(a0).k_hat(s)) * 1.0


def scattering_measure(a0: float, E_grid, *, free: bool = False) -> ScatteringMeasure:
    """density(E) = 1 / (pi |K(u0, 1/2 + iE)|^2)."""
    e = np.atleast_1d(np.asarray(E_grid, dtype=float))
    k = np.atleast_1d(_k_at(a0, e, free))
    return ScatteringMeasure(float(a0), e, 1.0 / (np.pi * np.abs(k) ** 2))


def weyl_m_by_integration(u0: float, E: complex, table: PotentialTable, u_end: float) -> complex:
    """m from the canonical solutions on (-oo, u0], Im E > 0.

    psi and phi start at [1; 0] and [0; 1]; phi - m psi is the solution
    decaying at -oo, which matches m = -J/K.  At u_end < u0 both are dominated
    by the growing mode, so m is their ratio there (error ~ exp(-2 Im E (u0 - u_end))).
    """
    psi = integrate(u0, u_end, E, (1.0, 0.0), table)
    phi = integrate(u0, u_end, E, (0.0, 1.0), table)
    pa, pb = psi.at_end()
    qa, qb = phi.at_end()
    return (qa * np.conj(pa) + qb * np.conj(pb)) / (abs(pa) ** 2 + abs(pb) ** 2)


# -- matched eigensolutions ----------------------------------------------------------

def scattering_psi(a0: float, E, u, *, free: bool = False) -> np.ndarray:
    """psi(u, 1/2 + iE) with psi(u0) = [1; 0]; shape (len(u), len(E), 2), real.

    psi_0 = Im(-conj(K0) J(u)), psi_1 = Im(-conj(K0) K(u)), K0 = K(u0, s).
    psi_0 is even and psi_1 odd in E.
    """
    e = np.atleast_1d(np.asarray(E, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    s = 0.5 + 1j * e
    u0 = math.log(a0)
    k0 = _k_at(a0, e, free)
    out = np.empty((len(u), len(e), 2))
    for i, uu in enumerate(u):
        if free:
            pairs = np.array([free_jk(uu, v) for v in s])
            j, k = pairs[:, 0], pairs[:, 1]
        else:
            j, k = _evaluator(math.exp(uu)).jk(s)
        out[i, :, 0] = np.imag(-np.conj(k0) * j)
        out[i, :, 1] = np.imag(-np.conj(k0) * k)
    if np.any(np.abs(u - u0) < 1e-14):
        out[np.abs(u - u0) < 1e-14] = np.array([1.0, 0.0])
    return out


@dataclass(frozen=True)
class MatchedEigensolution:
    """T_E = lam L_E 1_{u<u0} + mu_R R_E 1_{u>u0}, L_E(u0) = [1; 0], R_E(u0) = [0; 1].

    H(T) = H_0(T) - (delta_1|T) delta_0 - (delta_0|T) delta_1 with
    delta_0 = [2 delta; 0], delta_1 = [0; 2 delta] and pairings taken with
    du/2 as half-sums of one-sided limits.  The singular part of H(T) - E T
    is -l_1 delta_0 - r_0 delta_1 (l = lam L(u0-), r = mu_R R(u0+)).
    """

    E: float
    a0: float
    coeff_left: float
    coeff_right: float
    left: Trajectory
    right: Trajectory

    @property
    def u0(self) -> float:
        return math.log(self.a0)

    def one_sided(self) -> tuple[np.ndarray, np.ndarray]:
        lv = self.coeff_left * np.array([self.left.alpha[-1], self.left.beta[-1]])
        rv = self.coeff_right * np.array([self.right.alpha[0], self.right.beta[0]])
        return np.real(lv), np.real(rv)

    def pairings(self) -> tuple[float, float]:
        """((delta_0|T), (delta_1|T))."""
        lv, rv = self.one_sided()
        return 0.5 * float(lv[0] + rv[0]), 0.5 * float(lv[1] + rv[1])

    def singular_residual(self) -> tuple[float, float]:
        """Coefficients of delta_0 and delta_1 in H(T) - E T."""
        lv, rv = self.one_sided()
        p0, p1 = self.pairings()
        jump = rv - lv
        c0 = 0.5 * jump[1] - p1
        c1 = -0.5 * jump[0] - p0
        return float(c0), float(c1)

    def satisfies_matching(self, tol: float = 1e-10) -> bool:
        c0, c1 = self.singular_residual()
        return abs(c0) < tol and abs(c1) < tol

    def tail_norms(self, pieces: int = 4) -> np.ndarray:
        """int |R|^2 du/2 over consecutive equal pieces of the right trajectory."""
        u = self.right.u_grid
        dens = (np.abs(self.right.alpha) ** 2 + np.abs(self.right.beta) ** 2) / 2
        edges = np.linspace(u[0], u[-1], pieces + 1)
        fine = np.linspace(u[0], u[-1], 8 * len(u))
        vals = np.interp(fine, u, dens)
        out = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            m = (fine >= lo) & (fine <= hi)
            out.append(np.trapezoid(vals[m], fine[m]))
        return self.coeff_right ** 2 * np.asarray(out)


def matched_eigensolution(a0: float, E: float, coeff_left: float, coeff_right: float, *,
                          left_span: float = 4.0, right_span: float = 0.3,
                          left_points: int = 81) -> MatchedEigensolution:
    """Assemble the full-line eigensolution of H for real E.

    The left piece is the scattering solution psi, evaluated directly from J
    and K on [u0 - left_span, u0].  The right piece starts at [0; 1] and is
    integrated in arb on [u0, u0 + right_span].
    """
    E = float(E)
    u0 = math.log(a0)
    ul = np.linspace(u0 - left_span, u0, left_points)
    psi = scattering_psi(a0, [E], ul)[:, 0, :]
    left = Trajectory(ul, psi[:, 0].astype(complex), psi[:, 1].astype(complex), E,
                      {"method": "direct J/K", "init": [1.0, 0.0]})
    right = integrate_exact(u0, u0 + right_span, 0.5 + 1j * E, (0.0, 1.0),
                            _exact_potential(u0, u0 + right_span, 40, None))
    return MatchedEigensolution(E, float(a0), float(coeff_left), float(coeff_right), left, right)


# -- isometric expansion on the full line ---------------------------------------------

class IsometricExpansion:
    """Theorem-15 style identifications on a fixed (u, E) grid.

    forward:  [alpha; beta](u) = int F(s) [2A; 2B](u, s) dE / (2 pi |gamma(s)|^2)
    inverse:  F(s) = int alpha 2A + beta 2B du/2

    A is even and B odd in E on the critical line, so only E >= 0 is
    evaluated.  Both integrals use the trapezoid rule; the integrands are
    smooth and decay, so the E-spacing must only resolve oscillations of
    period ~ 2 pi / (u-extent).
    """

    def __init__(self, u_grid, E_max: float = 30.0, dE: float = 0.05):
        self.u = np.asarray(u_grid, dtype=float)
        half = np.arange(0.0, E_max + 0.5 * dE, dE)
        self.E = np.concatenate([-half[:0:-1], half])
        self.s = 0.5 + 1j * self.E
        nh = len(half)
        a_half = np.empty((len(self.u), nh))
        b_half = np.empty((len(self.u), nh))
        for i, uu in enumerate(self.u):
            big_a, big_b = _evaluator(math.exp(uu)).critical(half)
            a_half[i], b_half[i] = big_a, big_b
        self.A = np.concatenate([a_half[:, :0:-1], a_half], axis=1)
        self.B = np.concatenate([-b_half[:, :0:-1], b_half], axis=1)
        self.g2 = np.abs(special.gamma_factor(self.s)) ** 2
        self.wE = np.full(len(self.E), dE)
        self.wE[[0, -1]] *= 0.5
        du = np.diff(self.u)
        self.wu = np.zeros(len(self.u))
        self.wu[:-1] += du / 2
        self.wu[1:] += du / 2

    def forward(self, F) -> tuple[np.ndarray, np.ndarray]:
        f = self._values(F)
        weight = self.wE / (2 * np.pi * self.g2)
        alpha = (2 * self.A) @ (f * weight)
        beta = (2 * self.B) @ (f * weight)
        return alpha, beta

    def inverse(self, alpha, beta, mask=None) -> np.ndarray:
        """F on the E grid; ``mask`` restricts the u-integral."""
        w = self.wu / 2 if mask is None else np.where(mask, self.wu / 2, 0.0)
        return (np.asarray(alpha) * w) @ (2 * self.A) + (np.asarray(beta) * w) @ (2 * self.B)

    def _values(self, F) -> np.ndarray:
        return np.asarray(F(self.s), dtype=complex) if callable(F) else np.asarray(F, dtype=complex)

    def norm_F(self, F) -> float:
        f = self._values(F)
        return float(np.sum(np.abs(f) ** 2 * self.wE / (2 * np.pi * self.g2)))

    def norm_u(self, alpha, beta, u_min: float = -np.inf) -> float:
        m = self.u >= u_min - 1e-12
        w = np.where(m, self.wu / 2, 0.0)
        return float(np.sum((np.abs(alpha) ** 2 + np.abs(beta) ** 2) * w))

    def parseval_defect(self, F) -> float:
        alpha, beta = self.forward(F)
        lhs = self.norm_u(alpha, beta)
        rhs = self.norm_F(F)
        defect = abs(lhs - rhs) / rhs
        if defect > 0.01:
            warnings.warn(f"Parseval defect {defect:.2e}: refine the u or E grid",
                          GridResolutionWarning, stacklevel=2)
        return defect

    def round_trip_defect(self, F) -> float:
        f = self._values(F)
        back = self.inverse(*self.forward(f))
        weight = self.wE / (2 * np.pi * self.g2)
        return float(np.sqrt(np.sum(np.abs(back - f) ** 2 * weight) / np.sum(np.abs(f) ** 2 * weight)))


def isometric_forward(F, u_grid, E_max: float = 30.0, dE: float = 0.05):
    """(alpha, beta) on u_grid for F given as a callable of s or values on the E grid."""
    return IsometricExpansion(u_grid, E_max, dE).forward(F)


def isometric_inverse(alpha, beta, u_grid, E_max: float = 30.0, dE: float = 0.05):
    """(E grid, F on it) from (alpha, beta) sampled on u_grid."""
    exp = IsometricExpansion(u_grid, E_max, dE)
    return exp.E, exp.inverse(alpha, beta)


def reproducing_projection(a: float, F, E_grid, E_targets) -> np.ndarray:
    """P_{K_a} F at s = 1/2 + iE_t via the reproducing kernel.

    Z_z(s) = -2 (A(z) B(s) - B(z) A(s)) / (E - E_t) on the critical line, and
    (P F)(z) = int Z_z(s) F(s) dE / (2 pi |gamma(s)|^2).  Targets should sit
    off the E grid.
    """
    ev = _evaluator(a)
    e = np.asarray(E_grid, dtype=float)
    s = 0.5 + 1j * e
    f = np.asarray(F(s) if callable(F) else F, dtype=complex)
    big_a, big_b = ev.critical(e)
    w = np.gradient(e) / (2 * np.pi * np.abs(special.gamma_factor(s)) ** 2)
    out = []
    for et in np.atleast_1d(E_targets):
        a_t, b_t = ev.critical(float(et))
        kern = -2 * (a_t * big_b - b_t * big_a) / (e - et)
        out.append(np.sum(kern * f * w))
    return np.asarray(out)


# -- scattering transform on (-oo, u0) ------------------------------------------------

def _transform_parts(alpha, beta, u: np.ndarray, a0: float, E, free: bool):
    psi = scattering_psi(a0, E, u, free=free)
    du = np.diff(u)
    wu = np.zeros(len(u))
    wu[:-1] += du / 2
    wu[1:] += du / 2
    part0 = np.einsum("u,ue->e", wu * np.asarray(alpha), psi[:, :, 0])
    part1 = np.einsum("u,ue->e", wu * np.asarray(beta), psi[:, :, 1])
    return part0, part1


def scattering_transform(alpha, beta, u_grid, a0: float, E_grid, *, free: bool = False) -> np.ndarray:
    """T~(E) = int alpha psi_0 + beta psi_1 du over the u grid (trapezoid)."""
    u = np.asarray(u_grid, dtype=float)
    if u.max() > math.log(a0) + 1e-12:
        warnings.warn("u grid extends past u0; the transform lives on (-oo, u0]",
                      TruncationDomainWarning, stacklevel=2)
    part0, part1 = _transform_parts(alpha, beta, u, a0, E_grid, free)
    return part0 + part1


def plancherel_check(alpha, beta, u_grid, a0: float, E_max: float = 60.0, dE: float = 0.05,
                     *, free: bool = False) -> tuple[float, float]:
    """(int |T|^2 du/2, C/(2 pi) int |T~|^2 dE / |K0|^2) with C = PLANCHEREL_CALIBRATION."""
    u = np.asarray(u_grid, dtype=float)
    half = np.arange(0.0, E_max + 0.5 * dE, dE)
    # psi_0 is even and psi_1 odd in E, and |K0| is even, so T~(-E) = I0 - I1.
    part0, part1 = _transform_parts(alpha, beta, u, a0, half, free)
    k0 = np.atleast_1d(_k_at(a0, half, free))
    dens = (np.abs(part0 + part1) ** 2 + np.abs(part0 - part1) ** 2) / np.abs(k0) ** 2
    rhs = PLANCHEREL_CALIBRATION * np.trapezoid(dens, half) / (2 * np.pi)
    lhs = np.trapezoid((np.abs(alpha) ** 2 + np.abs(beta) ** 2) / 2, u)
    return float(lhs), float(rhs)


def calibrate_plancherel(points: int = 401) -> float:
    """Ratio lhs / rhs of the scattering Plancherel identity for mu = 0.

    Uses a smooth bump in alpha on [-3, -1] with u0 = 0 and the constant
    frozen at 1 removed; PLANCHEREL_CALIBRATION should equal the result.
    """
    u = np.linspace(-3.0, -1.0, points)
    x = (u + 2.0)
    bump = np.where(np.abs(x) < 1, np.exp(-1.0 / np.maximum(1 - x * x, 1e-300)), 0.0)
    lhs, rhs = plancherel_check(bump, np.zeros_like(bump), u, 1.0, free=True)
    return lhs / (rhs / PLANCHEREL_CALIBRATION)


# -- zero counting ------------------------------------------------------------------

def counting_comparison(spectrum: BoundStateSpectrum, T: float) -> tuple[int, float]:
    """N(T) = #{E_n in (0, T]} and N(T) / rvm_count(T)."""
    if T > spectrum.E_max + 1e-12:
        raise ValueError(f"T = {T} exceeds the spectrum range {spectrum.E_max}")
    count = int(np.sum((spectrum.eigenvalues > 0) & (spectrum.eigenvalues <= T)))
    ref = special.rvm_count(T)
    return count, (count / ref if ref > 0 else float("nan"))


def density_trend(spectrum: BoundStateSpectrum, T_grid) -> tuple[np.ndarray, np.ndarray]:
    """(N(T), ratio) along T_grid."""
    rows = [counting_comparison(spectrum, float(t)) for t in T_grid]
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])

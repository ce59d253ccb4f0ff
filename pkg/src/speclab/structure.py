"""Entire structure functions built from the Fredholm solutions phi_a^+-.

With S^+-(s) = a^(s-1) * int_0^a phi_a^+-(x) x^(-s) dx,

    j_hat(s) = a^(1/2 - s) * (1 - a S^+(s))
    k_hat(s) = i a^(1/2 - s) * (1 + a S^-(s))

and with gamma(s) = pi^(-s/2) Gamma(s/2)

    2 A(s) = gamma(s) j_hat(s) + gamma(1-s) j_hat(1-s)
    2 B(s) = gamma(s) k_hat(s) - gamma(1-s) k_hat(1-s)
    E_hat = (A - iB) / gamma,   F_hat = (A + iB) / gamma.

The finite Mellin integrals are evaluated term by term from the Taylor
expansion of the Nystrom extension, phi(a t) = sum_k c_k t^(2k), which gives

    S(s) = sum_k c_k / (2k + 1 - s).

This is exact up to truncation of a rapidly convergent series and is the
meromorphic continuation to all s, with simple poles at s = 1, 3, 5, ...
On the extended-precision path the sums and the gamma factors run in acb
ball arithmetic and only the final combinations are rounded to doubles.
"""
from __future__ import annotations

import csv
import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from flint import acb, arb, ctx

from . import special
from .defaults import DEFAULTS
from .kernel import HP_LOCK, PhiSolution, solve_phi
from .special import PoleError

__all__ = [
    "StructureEvaluator",
    "PoleProximityWarning",
    "TailTruncationError",
    "structure",
    "j_hat",
    "k_hat",
    "cal_A",
    "cal_B",
    "E_hat",
    "F_hat",
    "E_hat_tail",
    "evaluator_inner",
    "evaluator_norm_critical",
    "write_trace_csv",
    "TRACE_HEADER",
]

TRACE_HEADER = ["E", "ReA", "ImA", "ReB", "ImB", "ReJ", "ImJ", "ReK", "ImK"]


class PoleProximityWarning(RuntimeWarning):
    pass


class TailTruncationError(ArithmeticError):
    """The tail-integral route could not reach the requested tolerance."""


def _odd_pole_distance(s: np.ndarray) -> np.ndarray:
    # distance to the nearest of 1, 3, 5, ...
    k = np.maximum(np.round((s.real - 1.0) / 2.0), 0.0)
    return np.abs(s - (2.0 * k + 1.0))


def _check_mellin_poles(s: np.ndarray) -> None:
    d = _odd_pole_distance(s)
    if np.any(d < 1e-12):
        raise PoleError("finite Mellin transform has a pole at s in {1, 3, 5, ...}")
    if np.any(d < 1e-6):
        warnings.warn("s is within 1e-6 of a Mellin pole; expect cancellation",
                      PoleProximityWarning, stacklevel=3)


@dataclass(frozen=True)
class StructureEvaluator:
    """All structure functions at a fixed a.

    Methods accept scalars or arrays of complex ``s`` and return numpy values of
    the same shape.
    """

    a: float
    phi_plus: PhiSolution
    phi_minus: PhiSolution

    @classmethod
    def at(cls, a: float, n: int | None = None, prec: int | None = None) -> "StructureEvaluator":
        return _structure_memo(float(a), n, prec)

    @property
    def extended(self) -> bool:
        return self.phi_plus.extended

    @property
    def u(self) -> float:
        return math.log(self.a)

    # -- finite Mellin sums -------------------------------------------------

    def _sums_double(self, s: np.ndarray, sol: PhiSolution) -> np.ndarray:
        c = sol.taylor
        k = np.arange(len(c))
        return (c[None, :] / (2 * k[None, :] + 1 - s.reshape(-1, 1))).sum(axis=1).reshape(s.shape)

    @staticmethod
    def _sum_exact(s: acb, coeffs: tuple) -> acb:
        acc = acb(0)
        for k, ck in enumerate(coeffs):
            acc += ck / (2 * k + 1 - s)
        return acc

    # -- double path ----------------------------------------------------------

    def _jk_double(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.a
        pw = np.exp((0.5 - s) * math.log(a))
        j = pw * (1.0 - a * self._sums_double(s, self.phi_plus))
        k = 1j * pw * (1.0 + a * self._sums_double(s, self.phi_minus))
        return j, k

    # -- extended path --------------------------------------------------------

    def _jk_exact(self, s: acb) -> tuple[acb, acb]:
        big_a = arb(self.a)
        pw = ((acb(0.5) - s) * big_a.log()).exp()
        j = pw * (1 - big_a * self._sum_exact(s, self.phi_plus.taylor))
        k = acb(0, 1) * pw * (1 + big_a * self._sum_exact(s, self.phi_minus.taylor))
        return j, k

    @staticmethod
    def _gamma_exact(s: acb) -> acb:
        return (-s / 2 * acb.pi().log()).exp() * (s / 2).gamma()

    def _bundle_exact(self, z: acb, reflect: bool) -> dict:
        j, k = self._jk_exact(z)
        out = {"j": j, "k": k}
        if reflect:
            z1 = 1 - z
            j1, k1 = self._jk_exact(z1)
            g, g1 = self._gamma_exact(z), self._gamma_exact(z1)
            out.update(j1=j1, k1=k1, g=g, g1=g1,
                       A=(g * j + g1 * j1) / 2, B=(g * k - g1 * k1) / 2)
        return out

    def _combine_exact(self, s: complex, want: str) -> tuple[complex, ...]:
        with HP_LOCK, ctx.workprec(self.phi_plus.prec):
            d = self._bundle_exact(acb(s.real, s.imag), want != "jk")
            if want == "jk":
                return complex(d["j"]), complex(d["k"])
            if want == "ab":
                return complex(d["A"]), complex(d["B"])
            iu = acb(0, 1)
            e_hat = (d["A"] - iu * d["B"]) / d["g"]
            f_hat = (d["A"] + iu * d["B"]) / d["g"]
            return complex(d["A"]), complex(d["B"]), complex(e_hat), complex(f_hat)

    def ab_exact(self, s: complex) -> tuple:
        """(A(s), B(s)) as acb balls at the working precision (arb path only)."""
        if not self.extended:
            big_a, big_b = self.ab(s)
            return acb(complex(big_a).real, complex(big_a).imag), acb(complex(big_b).real, complex(big_b).imag)
        s = complex(s)
        with HP_LOCK, ctx.workprec(self.phi_plus.prec):
            d = self._bundle_exact(acb(s.real, s.imag), True)
            return d["A"], d["B"]

    _QUANTITIES = ("wronskian", "w1", "pair", "m_scattering", "m_bound")

    def exact_quantity(self, s: complex, name: str) -> complex:
        """Combinations that cancel heavily, formed before rounding.

        ``wronskian``: A K - B J.  ``w1``: Im(-J conj K) (returned as a real
        complex).  ``pair``: J(s)(-K(1-s)) - K(s) J(1-s).  ``m_scattering``:
        -J/K.  ``m_bound``: -B/A.
        """
        if name not in self._QUANTITIES:
            raise ValueError(f"unknown quantity {name!r}")
        s = complex(s)
        reflect = name in ("wronskian", "pair", "m_bound")
        with self._arith():
            if self.extended:
                d = self._bundle_exact(acb(s.real, s.imag), reflect)
                conj = acb.conjugate
            else:
                d = self._bundle_double(s, reflect)
                conj = np.conj
            if name == "wronskian":
                val = d["A"] * d["k"] - d["B"] * d["j"]
            elif name == "w1":
                val = (-d["j"] * conj(d["k"])).imag
            elif name == "pair":
                val = -d["j"] * d["k1"] - d["k"] * d["j1"]
            elif name == "m_scattering":
                val = -d["j"] / d["k"]
            else:
                val = -d["B"] / d["A"]
            return complex(val)

    @contextmanager
    def _arith(self):
        if not self.extended:
            yield
            return
        with HP_LOCK, ctx.workprec(self.phi_plus.prec):
            yield

    def _bundle_double(self, s: complex, reflect: bool) -> dict:
        j, k = self._jk_double(np.array(s))
        out = {"j": j, "k": k}
        if reflect:
            j1, k1 = self._jk_double(np.array(1 - s))
            g, g1 = special.gamma_factor(s), special.gamma_factor(1 - s)
            out.update(j1=j1, k1=k1, A=0.5 * (g * j + g1 * j1), B=0.5 * (g * k - g1 * k1))
        return out

    # -- public evaluation -----------------------------------------------------

    def jk(self, s):
        """(j_hat(s), k_hat(s))."""
        z = np.asarray(s, dtype=complex)
        _check_mellin_poles(z)
        if self.extended:
            out = np.array([self._combine_exact(complex(v), "jk") for v in z.reshape(-1)])
            j, k = out[:, 0].reshape(z.shape), out[:, 1].reshape(z.shape)
        else:
            j, k = self._jk_double(z)
        return _shape(j), _shape(k)

    def j_hat(self, s):
        return self.jk(s)[0]

    def k_hat(self, s):
        return self.jk(s)[1]

    def _check_ab_poles(self, z: np.ndarray) -> None:
        # Both terms singular together at s in {1,3,...} and s in {0,-2,...}.
        bad = (_odd_pole_distance(z) < 1e-12) | (_odd_pole_distance(1 - z) < 1e-12)
        if np.any(bad):
            raise PoleError("both terms of the A/B combination are singular at this s")
        near = (_odd_pole_distance(z) < 1e-6) | (_odd_pole_distance(1 - z) < 1e-6)
        if np.any(near):
            warnings.warn("s is within 1e-6 of a removable pole collision",
                          PoleProximityWarning, stacklevel=3)

    def ab(self, s):
        """(A(s), B(s))."""
        z = np.asarray(s, dtype=complex)
        self._check_ab_poles(z)
        if self.extended:
            out = np.array([self._combine_exact(complex(v), "ab") for v in z.reshape(-1)])
            big_a, big_b = out[:, 0].reshape(z.shape), out[:, 1].reshape(z.shape)
        else:
            j, k = self._jk_double(z)
            j1, k1 = self._jk_double(1 - z)
            g, g1 = special.gamma_factor(z), special.gamma_factor(1 - z)
            big_a = 0.5 * (g * j + g1 * j1)
            big_b = 0.5 * (g * k - g1 * k1)
        return _shape(big_a), _shape(big_b)

    def cal_A(self, s):
        return self.ab(s)[0]

    def cal_B(self, s):
        return self.ab(s)[1]

    def cal_E(self, s):
        """A - iB."""
        big_a, big_b = self.ab(s)
        return big_a - 1j * big_b

    def ef(self, s):
        """(E_hat(s), F_hat(s)) = ((A - iB)/gamma, (A + iB)/gamma)."""
        z = np.asarray(s, dtype=complex)
        self._check_ab_poles(z)
        if self.extended:
            out = np.array([self._combine_exact(complex(v), "all") for v in z.reshape(-1)])
            e, f = out[:, 2].reshape(z.shape), out[:, 3].reshape(z.shape)
        else:
            big_a, big_b = self.ab(z)
            g = special.gamma_factor(z)
            e, f = (big_a - 1j * big_b) / g, (big_a + 1j * big_b) / g
        return _shape(e), _shape(f)

    def E_hat(self, s):
        return self.ef(s)[0]

    def F_hat(self, s):
        return self.ef(s)[1]

    def critical(self, E):
        """Real (A, B) at s = 1/2 + iE for real E."""
        big_a, big_b = self.ab(0.5 + 1j * np.asarray(E, dtype=float))
        return np.real(big_a), np.real(big_b)

    def critical_derivatives(self, E, step: float | None = None):
        """(A, B, dA/dE, dB/dE) on the critical line.

        Central differences with h = step * (1 + |E|), one Richardson step.
        """
        e = np.asarray(E, dtype=float)
        rel = DEFAULTS["deriv_step"] if step is None else step
        h = rel * (1.0 + np.abs(e))
        pts = np.stack([e - 2 * h, e - h, e, e + h, e + 2 * h])
        big_a, big_b = self.critical(pts)

        def diff(f):
            d1 = (f[3] - f[1]) / (2 * h)
            d2 = (f[4] - f[0]) / (4 * h)
            return (4 * d1 - d2) / 3

        return big_a[2], big_b[2], diff(big_a), diff(big_b)

    # -- reproducing structure -----------------------------------------------

    def evaluator_inner(self, z, w, *, limit: bool | None = None):
        """(E(z)E(w) - F(z)F(w)) / (z + w - 1), with the removable limit."""
        z = complex(z)
        w = complex(w)
        gap = z + w - 1
        use_limit = abs(gap) < DEFAULTS["limit_tol"] if limit is None else limit
        if not use_limit:
            (ez, ew), (fz, fw) = self.ef(np.array([z, w]))
            return complex((ez * ew - fz * fw) / gap)
        # Numerator g(t) at w + t vanishes where z + w + t = 1; the limit is
        # g'(t0) with t0 = -gap, taken by a 4-point central difference.
        h = DEFAULTS["limit_step"]
        t0 = -gap
        ts = t0 + h * np.array([-2, -1, 1, 2])
        e_all, f_all = self.ef(np.concatenate([[z], w + ts]))
        g = e_all[0] * e_all[1:] - f_all[0] * f_all[1:]
        return complex((8 * (g[2] - g[1]) - (g[3] - g[0])) / (12 * h))

    def evaluator_norm_critical(self, E: float) -> float:
        """-2 A dB/dE + 2 B dA/dE at s = 1/2 + iE.

        Equals |gamma(s)|^2 times the z = conj(w) limit of
        :meth:`evaluator_inner` (normalization constant 1).
        """
        big_a, big_b, da, db = self.critical_derivatives(float(E))
        return float(-2 * big_a * db + 2 * big_b * da)


def _shape(x):
    x = np.asarray(x)
    return x if x.ndim else x[()]


@lru_cache(maxsize=1024)
def _structure_memo(a: float, n: int | None, prec: int | None) -> StructureEvaluator:
    plus = solve_phi(a, "+", n, prec)
    # a must be the (rounded) value the Fredholm problem was solved at: the
    # combinations amplify any mismatch enormously.
    return StructureEvaluator(plus.a, plus, solve_phi(a, "-", n, prec))


def structure(a: float, n: int | None = None) -> StructureEvaluator:
    return StructureEvaluator.at(a, n)


def j_hat(a: float, s, n: int | None = None):
    return structure(a, n).j_hat(s)


def k_hat(a: float, s, n: int | None = None):
    return structure(a, n).k_hat(s)


def cal_A(a: float, s, n: int | None = None):
    return structure(a, n).cal_A(s)


def cal_B(a: float, s, n: int | None = None):
    return structure(a, n).cal_B(s)


def E_hat(a: float, s, n: int | None = None):
    return structure(a, n).E_hat(s)


def F_hat(a: float, s, n: int | None = None):
    return structure(a, n).F_hat(s)


def evaluator_inner(a: float, z, w, n: int | None = None, limit: bool | None = None) -> complex:
    return structure(a, n).evaluator_inner(z, w, limit=limit)


def evaluator_norm_critical(a: float, E: float, n: int | None = None) -> float:
    return structure(a, n).evaluator_norm_critical(E)


def E_hat_tail(a: float, s: complex, n: int | None = None, dps: int = 20,
               tol: float = 1e-12) -> complex:
    """E_hat by the tail integral, an oracle independent of the A/B route.

    E_hat(s) = sqrt(a) (a^(-s) + 1/2 int_a^inf (phi^+ - phi^-)(x) x^(-s) dx).
    Beyond a, (phi^+ - phi^-)(x) = -int_0^a 2cos(2 pi x y) g(y) dy with
    g = phi^+ + phi^-.  Swapping the integrals, the x-integral is closed form,

        int_a^inf 2cos(w x) x^(-s) dx = sum_(+-) (-+i w)^(s-1) Gamma(1-s, -+i w a),

    and the remaining y-integral over (0, a), singular like y^(s-1) at 0, is
    done by tanh-sinh quadrature.  Needs Re s > 0.
    """
    import mpmath

    s = complex(s)
    if s.real <= 0:
        raise ValueError("tail route needs Re(s) > 0")
    plus = solve_phi(a, "+", n)
    minus = solve_phi(a, "-", n)
    a = plus.a
    with mpmath.workdps(dps):
        ms = mpmath.mpc(s.real, s.imag)
        one_minus = 1 - ms

        def inner(y):
            om = 2 * mpmath.pi * y
            total = mpmath.mpc(0)
            for sgn in (1, -1):
                z = mpmath.mpc(0, -sgn) * om
                total += mpmath.power(z, -one_minus) * mpmath.gammainc(one_minus, z * a)
            return total

        def integrand(y):
            g = plus(float(y)) + minus(float(y))
            return g * inner(y)

        value, err = mpmath.quad(integrand, mpmath.linspace(0, a, 5), error=True)
        if not mpmath.isfinite(value) or err > tol * max(1.0, abs(value)):
            raise TailTruncationError(f"tail quadrature error estimate {float(err):.2e}")
        out = mpmath.sqrt(a) * (mpmath.power(a, -ms) - value / 2)
    return complex(out)


def write_trace_csv(path: str | Path, ev: StructureEvaluator, E_grid) -> Path:
    """One row per E: A, B, J, K at s = 1/2 + iE (header TRACE_HEADER)."""
    e = np.asarray(E_grid, dtype=float)
    s = 0.5 + 1j * e
    big_a, big_b = ev.ab(s)
    j, k = ev.jk(s)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRACE_HEADER)
        for row in zip(e, big_a, big_b, j, k):
            wr.writerow([repr(float(row[0]))] + [
                repr(float(v)) for z in row[1:] for v in (z.real, z.imag)
            ])
    return path

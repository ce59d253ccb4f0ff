"""The two-component system in u = log a,

    alpha' = -mu alpha - E beta,     beta' = mu beta + E alpha,

with s = 1/2 + iE.  The Wronskian alpha_1 beta_2 - beta_1 alpha_2 of two
solutions is constant in u.

Two integrators are provided.  :func:`integrate` is classical RK4 with
step-doubling error control and the potential taken from a cubic-spline
:class:`~speclab.kernel.PotentialTable`; it is the workhorse for E-sweeps.
Where mu > |E| the system has an exponentially growing and a decaying mode, so
propagating the decaying solution [A; B] forward amplifies every rounding error
by exp(2 int sqrt(mu^2 - |E|^2) du); from a = 1 to a = 2 at E = 3 that factor is
about 1e17.  :func:`integrate_exact` handles those cases: mu is interpolated
at Chebyshev points from extended-precision Fredholm solves and the system is
advanced by Taylor series in arb arithmetic.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from flint import acb, arb, arb_poly, ctx

from .defaults import DEFAULTS
from .kernel import (HP_LOCK, PotentialTable, build_potential_table, default_nodes,
                     solve_phi, working_precision)
from .kernel import mu as kernel_mu
from .structure import StructureEvaluator

__all__ = [
    "TwoVector",
    "Trajectory",
    "StepUnderflowError",
    "TableRangeError",
    "ExactPotential",
    "energy",
    "integrate",
    "integrate_many",
    "integrate_exact",
    "canonical_psi_phi",
    "ab_trajectory",
    "growth_exponent",
    "wronskian",
    "wronskian_AJ",
    "w1_identity",
    "free_jk",
    "gamma_pair_check",
    "potential_table",
    "TRAJECTORY_HEADER",
]

TRAJECTORY_HEADER = ["u", "ReAlpha", "ImAlpha", "ReBeta", "ImBeta"]


class StepUnderflowError(ArithmeticError):
    pass


class TableRangeError(ValueError):
    pass


@dataclass(frozen=True)
class TwoVector:
    alpha: complex
    beta: complex

    def __iter__(self):
        yield self.alpha
        yield self.beta

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)


def energy(s: complex) -> complex:
    """E with s = 1/2 + iE."""
    return complex(-1j * (complex(s) - 0.5))


def wronskian(y1, y2) -> complex:
    """alpha_1 beta_2 - beta_1 alpha_2."""
    a1, b1 = y1
    a2, b2 = y2
    return a1 * b2 - b1 * a2


@dataclass(frozen=True)
class Trajectory:
    u_grid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    E: complex
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def values(self) -> np.ndarray:
        return np.column_stack([self.alpha, self.beta])

    def at_end(self) -> TwoVector:
        return TwoVector(complex(self.alpha[-1]), complex(self.beta[-1]))

    def __len__(self) -> int:
        return len(self.u_grid)

    def residual(self, mu_fn) -> float:
        """Max |Y' - M Y| at interior points, Y' by 3-point non-uniform differences."""
        u = self.u_grid
        if len(u) < 3:
            return 0.0
        h0 = u[1:-1] - u[:-2]
        h1 = u[2:] - u[1:-1]
        out = 0.0
        m = np.asarray(mu_fn(u[1:-1]))
        e = self.E
        for y, rhs in ((self.alpha, lambda a, b: -m * a - e * b),
                       (self.beta, lambda a, b: m * b + e * a)):
            d = (-(h1 / (h0 * (h0 + h1))) * y[:-2]
                 + ((h1 - h0) / (h0 * h1)) * y[1:-1]
                 + (h0 / (h1 * (h0 + h1))) * y[2:])
            r = d - rhs(self.alpha[1:-1], self.beta[1:-1])
            out = max(out, float(np.max(np.abs(r))))
        return out

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(TRAJECTORY_HEADER)
            for u, a, b in zip(self.u_grid, self.alpha, self.beta):
                wr.writerow([repr(float(u)), repr(float(a.real)), repr(float(a.imag)),
                             repr(float(b.real)), repr(float(b.imag))])
        return path


@lru_cache(maxsize=16)
def potential_table(u_min: float, u_max: float, steps: int | None = None,
                    n: int | None = None) -> PotentialTable:
    """Memoized :func:`build_potential_table`."""
    return build_potential_table(u_min, u_max, steps, n)


# -- double precision RK4 -------------------------------------------------------

def _rhs(mu_val, e, y):
    a, b = y
    return np.array([-mu_val * a - e * b, mu_val * b + e * a])


def _rk4(mu_fn, u, h, e, y):
    m0 = mu_fn(u)
    mh = mu_fn(u + 0.5 * h)
    m1 = mu_fn(u + h)
    k1 = _rhs(m0, e, y)
    k2 = _rhs(mh, e, y + 0.5 * h * k1)
    k3 = _rhs(mh, e, y + 0.5 * h * k2)
    k4 = _rhs(m1, e, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_many(u0: float, u1: float, E, init, table: PotentialTable,
                   h: float | None = None, tol: float | None = None,
                   record: bool = True):
    """RK4 with step doubling for an array of energies at once.

    ``init`` has shape (2,) or (2, len(E)).  Steps never exceed ``h``; a step
    is halved whenever the step-doubling estimate |y_2h - y_h|/15 exceeds
    ``tol * (1 + |y|)`` for any energy.  Returns (u_grid, values) with values of
    shape (len(u_grid), 2, len(E)), or only the end state if ``record`` is False.
    """
    if not table.covers(u0, u1):
        raise TableRangeError(
            f"[{u0}, {u1}] outside potential table [{table.u_min}, {table.u_max}]")
    h_max = DEFAULTS["rk_step"] if h is None else h
    tol = DEFAULTS["rk_tol"] if tol is None else tol
    h_min = DEFAULTS["rk_min_step"]
    e = np.atleast_1d(np.asarray(E, dtype=complex))
    y = np.asarray(init, dtype=complex)
    if y.ndim == 1:
        y = np.repeat(y[:, None], len(e), axis=1)
    y = y.copy()
    direction = 1.0 if u1 >= u0 else -1.0
    spline = table._spline

    def mu_fn(u):
        return float(spline(u))

    u = u0
    grid = [u0]
    values = [y.copy()] if record else None
    step = h_max
    total = abs(u1 - u0)
    while abs(u - u0) < total - 1e-14 * (1 + total):
        rem = total - abs(u - u0)
        # absorb a leftover sliver into this step rather than taking it alone
        last = rem <= step * (1 + 1e-6)
        if last:
            step = rem
        hs = direction * step
        full = _rk4(mu_fn, u, hs, e, y)
        half = _rk4(mu_fn, u, 0.5 * hs, e, y)
        half = _rk4(mu_fn, u + 0.5 * hs, 0.5 * hs, e, half)
        err = np.max(np.abs(half - full) / 15.0 / (1.0 + np.abs(half)))
        if err > tol:
            step *= 0.5
            if step < h_min:
                raise StepUnderflowError(f"step below {h_min} at u={u}")
            continue
        y = half + (half - full) / 15.0
        u = u1 if last else u + hs
        if record:
            grid.append(u)
            values.append(y.copy())
        if err < tol / 64:
            step = min(2 * step, h_max)
    if record:
        return np.array(grid), np.array(values)
    return np.array([u]), y[None, ...]


def integrate(u0: float, u1: float, E: complex, init, table: PotentialTable,
              h: float | None = None, tol: float | None = None) -> Trajectory:
    """Solve the system from u0 to u1 (either direction) starting at ``init``."""
    init = np.asarray(tuple(init), dtype=complex)
    grid, vals = integrate_many(u0, u1, np.array([E]), init, table, h, tol)
    return Trajectory(grid, vals[:, 0, 0], vals[:, 1, 0], complex(E), {
        "init": [complex(init[0]), complex(init[1])],
        "method": "rk4-step-doubling",
        "h": DEFAULTS["rk_step"] if h is None else h,
        "tol": DEFAULTS["rk_tol"] if tol is None else tol,
    })


def canonical_psi_phi(u0: float, E: complex, table: PotentialTable,
                      u_end: float | None = None) -> tuple[Trajectory, Trajectory]:
    """Solutions with psi(u0) = [1, 0] and phi(u0) = [0, 1], integrated to u_end.

    u_end defaults to the table end farther from u0.
    """
    if u_end is None:
        u_end = table.u_min if (u0 - table.u_min) > (table.u_max - u0) else table.u_max
    psi = integrate(u0, u_end, E, (1.0, 0.0), table)
    phi = integrate(u0, u_end, E, (0.0, 1.0), table)
    return psi, phi


def growth_exponent(u0: float, u1: float, E: complex, table: PotentialTable) -> float:
    """int max(0, sqrt(mu^2 - |E|^2)) du: log of the growing/decaying mode ratio, halved."""
    lo, hi = min(u0, u1), max(u0, u1)
    u = np.linspace(lo, hi, 257)
    m = np.asarray(table(u))
    g = np.sqrt(np.maximum(m * m - abs(E) ** 2, 0.0))
    return float(np.trapezoid(g, u))


# -- extended precision Taylor integrator ------------------------------------------

class ExactPotential:
    """mu on [u0, u1] as a Chebyshev interpolant with arb coefficients.

    Samples come from extended-precision Fredholm solves at the Chebyshev
    points; :meth:`error_estimate` compares the interpolant against fresh
    solves at off-node points.
    """

    def __init__(self, u0: float, u1: float, points: int = 40, n: int | None = None):
        self.u0, self.u1 = float(min(u0, u1)), float(max(u0, u1))
        a_hi = math.exp(self.u1)
        self.n = default_nodes(a_hi) if n is None else n
        self.prec = working_precision(a_hi) + 64
        self.points = points
        with HP_LOCK, ctx.workprec(self.prec):
            self._mid = arb(0.5 * (self.u0 + self.u1))
            self._half = arb(0.5 * (self.u1 - self.u0))
            xs, ys = [], []
            for k in range(points):
                x = math.cos(math.pi * (k + 0.5) / points)
                val, uu = self._sample(0.5 * (self.u0 + self.u1) + 0.5 * (self.u1 - self.u0) * x)
                xs.append((uu - self._mid) / self._half)
                ys.append(val)
            self.poly = arb_poly.interpolate(xs, ys)

    def _sample(self, u: float):
        a = math.exp(u)
        p = solve_phi(a, "+", self.n, self.prec)
        m = solve_phi(a, "-", self.n, self.prec)
        with HP_LOCK, ctx.workprec(self.prec):
            big_a = arb(p.a)
            return big_a * (p.edge_value + m.edge_value), big_a.log()

    def x_of(self, u) -> arb:
        return (arb(u) - self._mid) / self._half

    def __call__(self, u: float) -> float:
        with HP_LOCK, ctx.workprec(self.prec):
            return float(self.poly(self.x_of(u)))

    def error_estimate(self, samples: int = 3) -> float:
        worst = 0.0
        for k in range(samples):
            u = self.u0 + (self.u1 - self.u0) * (k + 0.37) / samples
            val, uu = self._sample(u)
            with HP_LOCK, ctx.workprec(self.prec):
                x = (uu - self._mid) / self._half
                worst = max(worst, float(abs(self.poly(x) - val) / abs(val)))
        return worst


@lru_cache(maxsize=8)
def _exact_potential(u0: float, u1: float, points: int, n: int | None) -> ExactPotential:
    return ExactPotential(u0, u1, points, n)


def integrate_exact(u0: float, u1: float, s: complex, init, potential: ExactPotential | None = None,
                    reach: float = 2.0, points: int = 40) -> Trajectory:
    """Taylor-series integration in arb from u0 to u1 (u0 < u1 or u0 > u1).

    ``init`` may hold acb values (full precision is then carried through) or
    numbers.  Each step has length h with h * (max mu + |E|) <= ``reach``; the
    series on a step is summed until terms fall below the working precision.
    """
    lo, hi = min(u0, u1), max(u0, u1)
    pot = potential or _exact_potential(lo, hi, points, None)
    if not (pot.u0 - 1e-12 <= lo and hi <= pot.u1 + 1e-12):
        raise TableRangeError("integration range outside the exact potential")
    prec = pot.prec
    s = complex(s)
    e_num = energy(s)
    mu_max = max(abs(pot(u)) for u in np.linspace(lo, hi, 9))
    total = abs(u1 - u0)
    nsteps = max(1, int(math.ceil(total * (mu_max + abs(e_num)) / reach)))
    grid = [u0]
    alphas, betas = [], []
    with HP_LOCK, ctx.workprec(prec):
        big_e = -acb(0, 1) * (acb(s.real, s.imag) - acb(0.5))
        ya, yb = (v if isinstance(v, acb) else acb(complex(v).real, complex(v).imag) for v in init)
        alphas.append(complex(ya))
        betas.append(complex(yb))
        u_start = arb(u0)
        h = (arb(u1) - arb(u0)) / nsteps
        tiny = arb(2) ** (-prec)
        for step in range(nsteps):
            ua = u_start + step * h
            # mu(ua + h y) as a polynomial in y
            xpoly = arb_poly([(ua - pot._mid) / pot._half, h / pot._half])
            m = pot.poly(xpoly).coeffs()
            m = [c * h for c in m]
            eh = big_e * h
            a_terms = [ya]
            b_terms = [yb]
            sa, sb = ya, yb
            scale = max(abs(float(ya.real)) + abs(float(ya.imag)), abs(float(yb.real)) + abs(float(yb.imag)), 1e-300)
            k = 0
            while True:
                na = -eh * b_terms[k]
                nb = eh * a_terms[k]
                for i in range(min(k, len(m) - 1) + 1):
                    na -= m[i] * a_terms[k - i]
                    nb += m[i] * b_terms[k - i]
                na /= (k + 1)
                nb /= (k + 1)
                a_terms.append(na)
                b_terms.append(nb)
                sa += na
                sb += nb
                k += 1
                mag = abs(float(na.real)) + abs(float(na.imag)) + abs(float(nb.real)) + abs(float(nb.imag))
                if k > 8 and mag < float(tiny) * scale and k > len(m) // 4:
                    break
                if k > 4000:
                    raise StepUnderflowError("Taylor series failed to converge on a step")
            ya, yb = sa, sb
            grid.append(float(ua + h))
            alphas.append(complex(ya))
            betas.append(complex(yb))
        final = (ya, yb)
    traj = Trajectory(np.array(grid), np.array(alphas), np.array(betas), e_num, {
        "init": [alphas[0], betas[0]],
        "method": "taylor-arb",
        "prec": prec,
        "steps": nsteps,
        "potential_points": pot.points,
    })
    object.__setattr__(traj, "_exact_end", final)
    return traj


def _coarse_growth(u0: float, u1: float, E: complex, samples: int = 9) -> float:
    # Same quantity as growth_exponent, from a few unvalidated mu samples.
    u = np.linspace(min(u0, u1), max(u0, u1), samples)
    m = np.array([kernel_mu(v, validate=False) for v in u])
    g = np.sqrt(np.maximum(m * m - abs(E) ** 2, 0.0))
    return float(np.trapezoid(g, u))


def ab_trajectory(a0: float, a1: float, s: complex, table: PotentialTable | None = None,
                  method: str = "auto", tol: float = 1e-7) -> Trajectory:
    """Propagate [A; B](u, s) by the differential system from a0 to a1.

    The initial vector comes from direct evaluation at a0.  ``method`` is
    ``"rk4"`` (double precision, spline potential), ``"exact"`` (arb Taylor
    series) or ``"auto"``, which picks rk4 unless the growing mode would
    amplify double rounding beyond ``tol``.
    """
    u0, u1 = math.log(a0), math.log(a1)
    ev = StructureEvaluator.at(a0)
    if method == "auto":
        if table is not None:
            amp = 2.0 * growth_exponent(u0, u1, energy(s), table)
        else:
            amp = 2.0 * _coarse_growth(u0, u1, energy(s))
        method = "rk4" if amp < math.log(tol / 1e-15) else "exact"
    if method == "rk4":
        table = table or potential_table(min(u0, u1), max(u0, u1), 256)
        big_a, big_b = ev.ab(s)
        traj = integrate(u0, u1, energy(s), (big_a, big_b), table)
        traj.provenance["start"] = "direct [A; B] at a0"
        return traj
    if method == "exact":
        init = ev.ab_exact(s)
        if u1 >= u0:
            traj = integrate_exact(u0, u1, s, init)
        else:
            traj = integrate_exact(u0, u1, s, init, _exact_potential(u1, u0, 40, None))
        traj.provenance["start"] = "direct [A; B] at a0"
        return traj
    raise ValueError(f"unknown method {method!r}")


def wronskian_AJ(a: float, s: complex) -> complex:
    """A K - B J at (u = log a, s); equals i gamma(1 - s)."""
    return StructureEvaluator.at(a).exact_quantity(s, "wronskian")


def w1_identity(a: float, E: float) -> float:
    """Im(-J conj(K)) at s = 1/2 + iE; equals 1 for real E."""
    return float(StructureEvaluator.at(a).exact_quantity(0.5 + 1j * E, "w1").real)


def free_jk(u: float, s: complex) -> tuple[complex, complex]:
    """J and K of the free system (mu = 0): a^(1/2-s) and i a^(1/2-s)."""
    v = complex(np.exp((0.5 - complex(s)) * u))
    return v, 1j * v


def gamma_pair_check(a: float, s: complex) -> complex:
    """Wronskian of ([J; K] at s, [J; -K] at 1 - s); equals -2i."""
    return StructureEvaluator.at(a).exact_quantity(s, "pair")


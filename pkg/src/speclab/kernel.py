"""Finite cosine kernel on (0, a): Fredholm solutions, determinants, potential.

The kernel 2cos(2*pi*x*y) restricted to (0, a) is conjugate to
2a*cos(2*pi*a^2*t*tau) on (0, 1).  Everything here is discretized with a
Gauss-Legendre rule on (0, 1) whose nodes do not depend on ``a``; the matrix is
symmetrized with square roots of the weights.

Two arithmetics are used.  For small ``a`` numpy doubles suffice.  Beyond
``DEFAULTS['hp_threshold']`` the eigenvalues of C_a approach +/-1
super-exponentially (1 - |lambda_1| is ~1e-5 at a = 1 and ~1e-20 at a = 2), the
solutions phi_a^+- reach 1e11 inside (0, a) and the quantities derived from them
are small differences of huge numbers.  There the linear algebra runs in arb
ball arithmetic (python-flint) at a working precision that grows like a^2.
"""
from __future__ import annotations

import json
import math
import os
import threading
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from flint import arb, arb_mat, ctx
from scipy.interpolate import CubicSpline
from scipy.linalg import cho_factor, cho_solve

from .defaults import DEFAULTS

__all__ = [
    "KernelOperator",
    "PhiSolution",
    "PotentialTable",
    "PhiCache",
    "CrossValidationError",
    "IllConditionedWarning",
    "default_nodes",
    "working_precision",
    "uses_extended",
    "gauss_legendre_unit",
    "build_discretization",
    "solve_phi",
    "set_default_cache",
    "log_det",
    "log_det_dirichlet",
    "mu",
    "mu_resolvent",
    "mu_finite_difference",
    "build_potential_table",
]

TWO_PI = 2.0 * math.pi

# python-flint keeps its precision in a process-global context.
HP_LOCK = threading.RLock()


class CrossValidationError(RuntimeError):
    """The resolvent and finite-difference routes for mu disagree."""


class IllConditionedWarning(RuntimeWarning):
    pass


def _check_sign(sign: str) -> int:
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return 1 if sign == "+" else -1


def _check_a(a: float) -> float:
    if not (a > 0 and math.isfinite(a)):
        raise ValueError(f"a must be positive and finite, got {a!r}")
    return float(a)


def default_nodes(a: float) -> int:
    """Node count: DEFAULTS['n'] up to a = 2, then growing like a^2."""
    base = int(DEFAULTS["n"])
    if a <= 2.0:
        return base
    return int(math.ceil(base * (a / 2.0) ** 2))


def uses_extended(a: float) -> bool:
    return a > DEFAULTS["hp_threshold"]


def working_precision(a: float) -> int:
    """Bits for the arb path.

    The interior of phi grows like exp(2 pi a^2) and the Mellin sums cancel a
    further exp(2 pi a^2) against results of size exp(-13 a^2 / 2); 28 a^2
    extra bits cover both with margin.  Rounded up to a multiple of 64.
    """
    bits = 128 + 28.0 * a * a
    return int(64 * math.ceil(bits / 64))


@lru_cache(maxsize=64)
def gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * w
    t.setflags(write=False)
    wt.setflags(write=False)
    return t, wt


@lru_cache(maxsize=16)
def _gauss_legendre_arb(n: int, prec: int) -> tuple[tuple, tuple]:
    with HP_LOCK, ctx.workprec(prec):
        roots = [arb.legendre_p_root(n, k, weight=True) for k in range(n)]
        # legendre_p_root orders roots from +1 down; flip to ascending t.
        t = tuple((1 + x) / 2 for x, _ in reversed(roots))
        w = tuple(wt / 2 for _, wt in reversed(roots))
    return t, w


@dataclass(frozen=True)
class _HPSystem:
    a: float
    n: int
    prec: int
    t: tuple
    w: tuple
    sw: tuple
    cmat: arb_mat
    rhs: tuple  # 2cos(2 pi a^2 t_j)


@lru_cache(maxsize=8)
def _hp_system(a: float, n: int, prec: int) -> _HPSystem:
    t, w = _gauss_legendre_arb(n, prec)
    with HP_LOCK, ctx.workprec(prec):
        big_a = arb(a)
        c = 2 * arb.pi() * big_a * big_a
        sw = tuple(x.sqrt() for x in w)
        two_a = 2 * big_a
        entries = [None] * (n * n)
        for i in range(n):
            ci = c * t[i]
            si = two_a * sw[i]
            for j in range(i, n):
                v = si * sw[j] * (ci * t[j]).cos()
                entries[i * n + j] = v
                entries[j * n + i] = v
        cmat = arb_mat(n, n, entries)
        rhs = tuple(2 * (c * x).cos() for x in t)
    return _HPSystem(a, n, prec, t, w, sw, cmat, rhs)


def _identity(n: int) -> arb_mat:
    return arb_mat(n, n, [1 if i == j else 0 for i in range(n) for j in range(n)])


@dataclass(frozen=True)
class KernelOperator:
    """Symmetrized discretization of 2a*cos(2*pi*a^2*t*tau) on (0, 1)."""

    a: float
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues sorted by decreasing modulus (double precision)."""
        lam = np.linalg.eigvalsh(self.matrix)
        return lam[np.argsort(-np.abs(lam))]

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues[0]))


def build_discretization(a: float, n: int | None = None) -> KernelOperator:
    a = _check_a(a)
    n = default_nodes(a) if n is None else int(n)
    if n < 8:
        raise ValueError(f"node count must be >= 8, got {n}")
    t, w = gauss_legendre_unit(n)
    sw = np.sqrt(w)
    mat = 2.0 * a * np.cos(TWO_PI * a * a * np.outer(t, t)) * np.outer(sw, sw)
    mat = 0.5 * (mat + mat.T)
    mat.setflags(write=False)
    return KernelOperator(a=a, nodes=t, weights=w, matrix=mat)


@dataclass(frozen=True)
class PhiSolution:
    """Solution of phi(x) +/- int_0^a 2cos(2 pi x y) phi(y) dy = 2cos(2 pi a x).

    ``x`` and ``w`` are the quadrature nodes and weights on (0, a) and
    ``values`` the solution there, rounded to doubles.  Calling the object
    evaluates the Nystrom extension, which is even in x and reproduces
    ``values`` at the nodes.  When ``prec > 53`` the arb node values are kept in
    ``exact`` and used for every evaluation.
    """

    a: float
    sign: str
    x: np.ndarray
    w: np.ndarray
    values: np.ndarray
    residual: float = field(default=0.0, compare=False)
    condition: float = field(default=1.0, compare=False)
    prec: int = 53
    exact: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def extended(self) -> bool:
        return self.exact is not None

    @property
    def _sgn(self) -> int:
        return 1 if self.sign == "+" else -1

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        if self.extended:
            out = np.array([self._eval_exact(v) for v in xa.reshape(-1)])
        else:
            flat = xa.reshape(-1)
            out = np.empty(flat.shape)
            wv = self.w * self.values
            step = 4096
            for i in range(0, len(flat), step):
                blk = flat[i:i + step]
                k = 2.0 * np.cos(TWO_PI * np.outer(blk, self.x))
                out[i:i + step] = 2.0 * np.cos(TWO_PI * self.a * blk) - self._sgn * (k @ wv)
        out = out.reshape(xa.shape)
        return out if out.ndim else float(out)

    def _system(self) -> _HPSystem:
        return _hp_system(self.a, self.n, self.prec)

    def _eval_exact(self, x: float) -> float:
        sysd = self._system()
        with HP_LOCK, ctx.workprec(self.prec):
            big_a = arb(self.a)
            c = 2 * arb.pi() * big_a * arb(x)
            acc = arb(0)
            for tj, wj, pj in zip(sysd.t, sysd.w, self.exact):
                acc += wj * pj * (c * big_a * tj).cos()
            return float(2 * c.cos() - self._sgn * 2 * big_a * acc)

    def at_edge(self) -> float:
        """phi(a), the resolvent diagonal entering mu."""
        return float(self.edge_value)

    @cached_property
    def edge_value(self):
        """phi(a) as a float, or as an arb ball on the extended path."""
        if not self.extended:
            return self(self.a)
        sysd = self._system()
        with HP_LOCK, ctx.workprec(self.prec):
            big_a = arb(self.a)
            acc = arb(0)
            for rj, wj, pj in zip(sysd.rhs, sysd.w, self.exact):
                acc += wj * pj * rj
            return 2 * (2 * arb.pi() * big_a * big_a).cos() - self._sgn * big_a * acc

    @cached_property
    def taylor(self):
        """Coefficients c_k with phi(a t) = sum_k c_k t^(2k) for |t| <= 1.

        numpy array on the double path, tuple of arb balls on the arb path.
        """
        if self.extended:
            return self._taylor_exact()
        t = self.x / self.a
        c = TWO_PI * self.a * self.a
        wv = self.w * self.values
        scale = 1.0 + float(np.sum(np.abs(wv)))
        coeffs = []
        pk = wv.copy()
        t2 = t * t
        k = 0
        head = 1.0  # c^(2k)/(2k)!
        while True:
            coeffs.append(2.0 * (-1) ** k * head * (1.0 - self._sgn * float(pk.sum())))
            k += 1
            head *= c * c / ((2 * k - 1) * (2 * k))
            pk = pk * t2
            if k > 8 and head * scale < 1e-18 * max(abs(v) for v in coeffs):
                break
        return np.array(coeffs)

    def _taylor_exact(self) -> tuple:
        sysd = self._system()
        sg = self._sgn
        with HP_LOCK, ctx.workprec(self.prec):
            big_a = arb(self.a)
            c2 = (2 * arb.pi() * big_a * big_a) ** 2
            pk = [big_a * wj * pj for wj, pj in zip(sysd.w, self.exact)]
            t2 = [tj * tj for tj in sysd.t]
            scale = 1.0 + sum(abs(float(v)) for v in pk)
            log_c2 = math.log(float(c2))
            coeffs = []
            head = arb(1)
            log_head = 0.0
            log_peak = -math.inf
            k = 0
            while True:
                m = arb(0)
                for v in pk:
                    m += v
                term = 2 * head * (1 - sg * m)
                coeffs.append(-term if k % 2 else term)
                log_peak = max(log_peak, math.log(max(abs(float(term)), 1e-300)))
                k += 1
                head = head * c2 / ((2 * k - 1) * (2 * k))
                log_head += log_c2 - math.log((2 * k - 1) * (2 * k))
                pk = [v * s for v, s in zip(pk, t2)]
                if k > 8 and log_head + math.log(scale) < log_peak - self.prec * math.log(2) - 8:
                    break
        return tuple(coeffs)


class PhiCache:
    """On-disk cache of Fredholm solutions.

    Layout: ``<root>/phi/<a>_<sign>_<n>.bin`` holds n rows of three
    little-endian float64 values (node, weight, phi) in node order; the
    sibling ``.json`` holds metadata and, for extended-precision solutions,
    the node values as decimal strings.  Writes are serialized with a file lock
    and land atomically.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self._lock = threading.Lock()

    @staticmethod
    def key(a: float, sign: str, n: int) -> str:
        sign_tag = "p" if sign == "+" else "m"
        return f"{round(a, 12):.12e}_{sign_tag}_{n}"

    def paths(self, a: float, sign: str, n: int) -> tuple[Path, Path]:
        base = self.root / "phi"
        key = self.key(a, sign, n)
        return base / f"{key}.bin", base / f"{key}.json"

    def load(self, a: float, sign: str, n: int, prec: int = 53) -> PhiSolution | None:
        bin_path, meta_path = self.paths(a, sign, n)
        if not (bin_path.exists() and meta_path.exists()):
            return None
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError:
            return None
        if (meta.get("n") != n or meta.get("prec", 53) != prec
                or meta.get("sign") != sign or meta.get("a") != round(a, 12)):
            return None
        data = np.fromfile(bin_path, dtype="<f8")
        if data.size != 3 * n:
            return None
        data = data.reshape(n, 3)
        exact = None
        if prec > 53:
            with HP_LOCK, ctx.workprec(prec):
                exact = tuple(arb(v) for v in meta["exact"])
        return PhiSolution(
            a=meta["a"], sign=sign, x=data[:, 0].copy(), w=data[:, 1].copy(),
            values=data[:, 2].copy(), residual=meta["residual"],
            condition=meta["condition"], prec=prec, exact=exact,
        )

    def store(self, sol: PhiSolution) -> None:
        from filelock import FileLock

        bin_path, meta_path = self.paths(sol.a, sol.sign, sol.n)
        bin_path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "schema": 1,
            "a": sol.a,
            "sign": sol.sign,
            "n": sol.n,
            "prec": sol.prec,
            "layout": "node-major rows (node, weight, phi), little-endian float64",
            "residual": sol.residual,
            "condition": sol.condition,
        }
        if sol.extended:
            digits = int(sol.prec * 0.30103) + 8
            with HP_LOCK, ctx.workprec(sol.prec):
                meta["exact"] = [v.mid().str(digits, radius=False) for v in sol.exact]
        data = np.column_stack([sol.x, sol.w, sol.values]).astype("<f8")
        with self._lock, FileLock(str(bin_path) + ".lock"):
            tmp_bin = bin_path.with_name(bin_path.name + ".tmp")
            tmp_meta = meta_path.with_name(meta_path.name + ".tmp")
            data.tofile(tmp_bin)
            tmp_meta.write_text(json.dumps(meta, sort_keys=True, indent=1))
            os.replace(tmp_bin, bin_path)
            os.replace(tmp_meta, meta_path)


_default_cache: PhiCache | None = None


def set_default_cache(root: str | os.PathLike | None) -> None:
    """Route every :func:`solve_phi` call through an on-disk cache (None disables)."""
    global _default_cache
    _default_cache = None if root is None else PhiCache(root)
    _solve_phi_memo.cache_clear()


def _solve_double(a: float, sign: str, n: int) -> PhiSolution:
    sg = _check_sign(sign)
    op = build_discretization(a, n)
    t, w = op.nodes, op.weights
    sw = np.sqrt(w)
    mat = np.eye(n) + sg * op.matrix
    rhs = 2.0 * np.cos(TWO_PI * a * a * t)
    factor = cho_factor(mat, lower=True)
    y = cho_solve(factor, sw * rhs)
    values = y / sw
    residual = float(np.max(np.abs(mat @ y - sw * rhs) / sw))
    diag = np.diag(factor[0])
    # Cholesky diagonal gives a cheap lower bound on the condition number.
    cond = float((diag.max() / diag.min()) ** 2)
    if cond > DEFAULTS["cond_warn"]:
        warnings.warn(
            f"1{sign}C_a is ill-conditioned at a={a:g} (cond >~ {cond:.2e})",
            IllConditionedWarning, stacklevel=4,
        )
    return PhiSolution(a=a, sign=sign, x=a * t, w=a * w, values=values,
                       residual=residual, condition=cond)


def _solve_extended(a: float, sign: str, n: int, prec: int) -> PhiSolution:
    sg = _check_sign(sign)
    sysd = _hp_system(a, n, prec)
    with HP_LOCK, ctx.workprec(prec):
        eye = _identity(n)
        mat = eye + sysd.cmat if sg > 0 else eye - sysd.cmat
        b = arb_mat(n, 1, [r * s for r, s in zip(sysd.rhs, sysd.sw)])
        y = mat.solve(b, algorithm="approx")
        res = mat * y - b
        exact = tuple(y[i, 0] / sysd.sw[i] for i in range(n))
        residual = max(abs(float(res[i, 0] / sysd.sw[i])) for i in range(n))
        ynorm = max(abs(float(y[i, 0])) for i in range(n))
        bnorm = max(abs(float(b[i, 0])) for i in range(n))
    t, w = gauss_legendre_unit(n)
    values = np.array([float(v) for v in exact])
    # ||A|| <= 2 and ||A^-1|| >= |y|/|b| give a lower bound on the condition number.
    cond = 2.0 * ynorm / bnorm
    return PhiSolution(a=a, sign=sign, x=a * t, w=a * w, values=values,
                       residual=residual, condition=cond, prec=prec, exact=exact)


@lru_cache(maxsize=2048)
def _solve_phi_memo(a: float, sign: str, n: int, prec: int) -> PhiSolution:
    cache = _default_cache
    if cache is not None:
        hit = cache.load(a, sign, n, prec)
        if hit is not None:
            return hit
    if prec > 53:
        sol = _solve_extended(a, sign, n, prec)
    else:
        sol = _solve_double(a, sign, n)
    if cache is not None:
        cache.store(sol)
    return sol


def solve_phi(a: float, sign: str, n: int | None = None, prec: int | None = None) -> PhiSolution:
    """Solve (1 +/- C_a) phi = 2cos(2 pi a x) on (0, a).

    ``prec`` selects the arithmetic: 53 forces doubles, larger values use arb
    at that many bits; by default the choice follows :func:`uses_extended`.
    """
    _check_sign(sign)
    a = round(_check_a(a), 12)
    n = default_nodes(a) if n is None else int(n)
    if n < 8:
        raise ValueError(f"node count must be >= 8, got {n}")
    if prec is None:
        prec = working_precision(a) if uses_extended(a) else 53
    return _solve_phi_memo(a, sign, n, int(prec))


def _log_det_extended(a: float, sign: str, n: int, prec: int) -> float:
    sg = _check_sign(sign)
    sysd = _hp_system(a, n, prec)
    with HP_LOCK, ctx.workprec(prec):
        eye = _identity(n)
        det = (eye + sysd.cmat if sg > 0 else eye - sysd.cmat).det()
        if not det > 0:
            raise ArithmeticError(f"det(1{sign}C_a) not certified positive at a={a:g}")
        return float(det.log())


def log_det(a: float, sign: str, n: int | None = None) -> float:
    """log det(1 +/- C_a), from the discretized spectrum or an arb determinant."""
    sg = _check_sign(sign)
    a = _check_a(a)
    n = default_nodes(a) if n is None else int(n)
    if uses_extended(a):
        return _log_det_extended(a, sign, n, working_precision(a))
    lam = build_discretization(a, n).eigenvalues
    return float(np.sum(np.log1p(sg * lam)))


def log_det_dirichlet(a: float, n: int | None = None) -> float:
    """log det(1 - C_a^2) computed independently from the Dirichlet kernel.

    C_a^2 acts on the even subspace of L^2(-1, 1) as sin(2 pi a^2 (x-y))/(pi (x-y));
    folded onto (0, 1) this is D(x-y) + D(x+y).
    """
    a = _check_a(a)
    if n is None:
        n = default_nodes(a) + 40
    if uses_extended(a):
        return _log_det_dirichlet_extended(a, n, working_precision(a))
    t, w = gauss_legendre_unit(n)
    c = TWO_PI * a * a

    def dirichlet(d):
        return (c / math.pi) * np.sinc(c * d / math.pi)

    kern = dirichlet(t[:, None] - t[None, :]) + dirichlet(t[:, None] + t[None, :])
    sw = np.sqrt(w)
    mat = np.eye(n) - kern * np.outer(sw, sw)
    sign, logdet = np.linalg.slogdet(0.5 * (mat + mat.T))
    if sign <= 0:
        raise ArithmeticError("1 - C_a^2 is not positive definite at this resolution")
    return float(logdet)


def _log_det_dirichlet_extended(a: float, n: int, prec: int) -> float:
    t, w = _gauss_legendre_arb(n, prec)
    with HP_LOCK, ctx.workprec(prec):
        c = 2 * arb.pi() * arb(a) ** 2
        pi = arb.pi()
        sw = [x.sqrt() for x in w]

        def dirichlet(d):
            return (c * d).sin() / (pi * d)

        entries = [None] * (n * n)
        for i in range(n):
            for j in range(i, n):
                near = c / pi if i == j else dirichlet(t[i] - t[j])
                v = (near + dirichlet(t[i] + t[j])) * sw[i] * sw[j]
                v = (1 - v) if i == j else -v
                entries[i * n + j] = v
                entries[j * n + i] = v
        det = arb_mat(n, n, entries).det()
        if not det > 0:
            raise ArithmeticError("1 - C_a^2 not certified positive definite")
        return float(det.log())


def mu_resolvent(u: float, n: int | None = None) -> float:
    """mu(u) = a*(phi_a^+(a) + phi_a^-(a)), a = exp(u)."""
    a = math.exp(u)
    plus = solve_phi(a, "+", n)
    minus = solve_phi(a, "-", n)
    if plus.extended:
        with HP_LOCK, ctx.workprec(plus.prec):
            return float(arb(plus.a) * (plus.edge_value + minus.edge_value))
    return a * (plus.at_edge() + minus.at_edge())


def _log_ratio(u: float, n: int) -> float:
    a = math.exp(u)
    if uses_extended(a):
        prec = working_precision(a)
        return _log_det_extended(a, "+", n, prec) - _log_det_extended(a, "-", n, prec)
    lam = build_discretization(a, n).eigenvalues
    return float(np.sum(np.log1p(lam) - np.log1p(-lam)))


def mu_finite_difference(u: float, n: int | None = None, h: float | None = None) -> float:
    """Central difference of log[det(1+C_a)/det(1-C_a)] in u, one Richardson step."""
    h = DEFAULTS["fd_step"] if h is None else h
    if n is None:
        n = default_nodes(math.exp(u + 2 * h))

    def central(step):
        return (_log_ratio(u + step, n) - _log_ratio(u - step, n)) / (2 * step)

    return (4.0 * central(h) - central(2 * h)) / 3.0


def mu(u: float, n: int | None = None, validate: bool = True, rtol: float | None = None) -> float:
    """Dirac potential a d/da log[det(1+C_a)/det(1-C_a)] at u = log a.

    The resolvent route is primary; with ``validate`` the finite-difference
    route must agree to ``rtol`` (default DEFAULTS['mu_rtol']) or
    :class:`CrossValidationError` is raised.
    """
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u!r}")
    if n is None:
        n = default_nodes(math.exp(u + 2 * DEFAULTS["fd_step"]))
    value = mu_resolvent(u, n)
    if validate:
        rtol = DEFAULTS["mu_rtol"] if rtol is None else rtol
        check = mu_finite_difference(u, n)
        if abs(value - check) > rtol * max(abs(value), 1e-300):
            raise CrossValidationError(
                f"mu({u}) resolvent={value!r} finite-difference={check!r}"
            )
    return value


@dataclass(frozen=True)
class PotentialTable:
    """Tabulated mu(u) with cubic-spline interpolation."""

    u_grid: np.ndarray
    mu_values: np.ndarray
    logdet_plus: np.ndarray
    logdet_minus: np.ndarray

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.u_grid, self.mu_values)

    @property
    def u_min(self) -> float:
        return float(self.u_grid[0])

    @property
    def u_max(self) -> float:
        return float(self.u_grid[-1])

    def covers(self, u0: float, u1: float) -> bool:
        lo, hi = min(u0, u1), max(u0, u1)
        slack = 1e-12 * (1 + abs(lo) + abs(hi))
        return lo >= self.u_min - slack and hi <= self.u_max + slack

    def __call__(self, u):
        return self._spline(u)

    def integral(self, u0: float, u1: float) -> float:
        return float(self._spline.integrate(u0, u1))

    def refine_check(self) -> float:
        """Max gap, at the odd grid points, between this spline and one built on
        the even points only; an estimate of the interpolation error at twice
        the step."""
        coarse = CubicSpline(self.u_grid[::2], self.mu_values[::2])
        odd = self.u_grid[1::2]
        return float(np.max(np.abs(coarse(odd) - self.mu_values[1::2])))

    @classmethod
    def zero(cls, u_min: float, u_max: float, steps: int = 16) -> "PotentialTable":
        """Identically vanishing potential (free system)."""
        g = np.linspace(u_min, u_max, steps + 1)
        z = np.zeros_like(g)
        return cls(g, z, z.copy(), z.copy())


def build_potential_table(u_min: float, u_max: float, steps: int | None = None,
                          n: int | None = None, validate_every: int = 0) -> PotentialTable:
    """Tabulate mu on a uniform u-grid of ``steps`` intervals.

    log det columns come from the discretized spectrum where doubles suffice.
    In the extended region they are continued by integrating
    d/du log det(1 +/- C_a) = +/- a phi_a^+-(a) with a cubic spline, which
    avoids an arb determinant per grid point.  ``validate_every = k > 0`` runs
    the finite-difference cross-check on every k-th grid point.
    """
    if not u_min < u_max:
        raise ValueError(f"need u_min < u_max, got {u_min}, {u_max}")
    steps = int(DEFAULTS["table_steps"]) if steps is None else int(steps)
    if steps < 4:
        raise ValueError("steps must be >= 4")
    grid = np.linspace(u_min, u_max, steps + 1)
    mus = np.empty_like(grid)
    dplus = np.empty_like(grid)
    dminus = np.empty_like(grid)
    ldp = np.full_like(grid, np.nan)
    ldm = np.full_like(grid, np.nan)
    for i, u in enumerate(grid):
        a = math.exp(u)
        nn = default_nodes(a) if n is None else n
        plus = solve_phi(a, "+", nn)
        minus = solve_phi(a, "-", nn)
        dplus[i] = a * plus.at_edge()
        dminus[i] = -a * minus.at_edge()
        if not plus.extended:
            lam = build_discretization(a, nn).eigenvalues
            ldp[i] = np.sum(np.log1p(lam))
            ldm[i] = np.sum(np.log1p(-lam))
        check = validate_every > 0 and i % validate_every == 0
        mus[i] = mu(u, nn, validate=check)
    if not np.all(np.isfinite(mus)):
        raise ArithmeticError("non-finite potential values in table")
    known = np.flatnonzero(np.isfinite(ldp))
    if known.size == 0:
        ldp[0] = log_det(math.exp(grid[0]), "+", n)
        ldm[0] = log_det(math.exp(grid[0]), "-", n)
        known = np.array([0])
    start = int(known[-1])
    if start < len(grid) - 1:
        for col, deriv in ((ldp, dplus), (ldm, dminus)):
            if len(grid) - start > 2:
                spl = CubicSpline(grid[start:], deriv[start:])
                for i in range(start + 1, len(grid)):
                    col[i] = col[start] + spl.integrate(grid[start], grid[i])
            else:
                for i in range(start + 1, len(grid)):
                    col[i] = col[i - 1] + 0.5 * (deriv[i - 1] + deriv[i]) * (grid[i] - grid[i - 1])
    return PotentialTable(grid, mus, ldp, ldm)

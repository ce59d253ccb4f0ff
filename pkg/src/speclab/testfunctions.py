"""Reference functions with closed-form transforms for the expansion checks.

Full-line tests are given in the F-picture, F(s) = gamma(s) * Mellin(f)(s),
with ||f||^2 known exactly.  Left-line tests are smooth bumps on
[u0 - 3, u0 - 1] for the scattering transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .special import gamma_factor

ISOMETRIC_E_MAX = 30.0
ISOMETRIC_DE = 0.05


def isometric_u_grid(u_lo: float = -12.0, u_hi: float = 0.8, du: float = 0.1) -> np.ndarray:
    """u grid for the full-line tests.

    The functions below carry mass ~ 2 exp(u) on u < u_lo (their part on
    (0, a) and that of their cosine transforms), and negligible mass past a = 2.2.
    """
    return np.arange(u_lo, u_hi + 0.5 * du, du)


@dataclass(frozen=True)
class FullLineTest:
    F: Callable
    F_reflect: Callable  # s -> F(1 - s), the cosine transform
    norm2: float


def _gauss(s):
    # f = exp(-pi x^2): Mellin = gamma(1 - s) / 2, self-reciprocal
    return 0.5 * gamma_factor(s) * gamma_factor(1 - s)


def _x2_gauss(s):
    # f = x^2 exp(-pi x^2): Mellin = gamma(3 - s) / 2
    return 0.5 * gamma_factor(s) * gamma_factor(3 - s)


def _x2_gauss_reflect(s):
    return 0.5 * gamma_factor(1 - s) * gamma_factor(2 + s)


_LOG_C = -0.5
_LOG_SIGMA = 0.4


def _log_gauss_mellin(s):
    # f = x^(-1/2) exp(-(ln x - c)^2 / (2 sigma^2))
    z = 0.5 - np.asarray(s, dtype=complex)
    return _LOG_SIGMA * math.sqrt(2 * math.pi) * np.exp(_LOG_C * z + 0.5 * _LOG_SIGMA ** 2 * z * z)


def _log_gauss(s):
    return gamma_factor(s) * _log_gauss_mellin(s)


def _log_gauss_reflect(s):
    return gamma_factor(1 - s) * _log_gauss_mellin(1 - s)


def full_line_tests() -> dict[str, FullLineTest]:
    return {
        "gaussian": FullLineTest(_gauss, _gauss, 1.0 / (2.0 * math.sqrt(2.0))),
        "x2_gaussian": FullLineTest(_x2_gauss, _x2_gauss_reflect,
                                    0.375 * math.sqrt(math.pi) * (2 * math.pi) ** -2.5),
        "log_gaussian": FullLineTest(_log_gauss, _log_gauss_reflect, _LOG_SIGMA * math.sqrt(math.pi)),
    }


def bump(u, lo: float, hi: float) -> np.ndarray:
    """exp(-1 / (1 - x^2)) on (lo, hi) mapped to x in (-1, 1), zero outside."""
    u = np.asarray(u, dtype=float)
    x = (2 * u - lo - hi) / (hi - lo)
    inside = np.abs(x) < 1
    out = np.zeros_like(u)
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def left_bumps(u0: float, points: int = 401) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Two-component test vectors supported in [u0 - 3, u0 - 1]: name -> (u, alpha, beta)."""
    u = np.linspace(u0 - 3.0, u0 - 1.0, points)
    b = bump(u, u0 - 3.0, u0 - 1.0)
    x = u - (u0 - 2.0)
    return {
        "alpha_bump": (u, b, np.zeros_like(b)),
        "mixed_bump": (u, b * np.cos(3 * u), b * x),
    }

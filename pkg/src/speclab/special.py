"""Complex gamma function and the Mellin factors of the cosine transform.

All functions accept Python scalars or numpy arrays and return numpy values of
matching shape.  Pole arguments raise :class:`PoleError`.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "PoleError",
    "log_gamma",
    "gamma",
    "rgamma",
    "chi",
    "gamma_factor",
    "log_gamma_factor",
    "rvm_count",
]

LOG_PI = math.log(math.pi)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Lanczos coefficients, g = 7, nine terms (~15 significant digits for Re z >= 1/2).
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])

_POLE_TOL = 1e-12


class PoleError(ValueError):
    """Argument sits on a pole of the requested function."""


def _near_nonpositive_integer(z: np.ndarray) -> np.ndarray:
    r = np.round(z.real)
    return (r <= 0) & (np.abs(z - r) < _POLE_TOL)


def _lanczos_log(z: np.ndarray) -> np.ndarray:
    # log Gamma(z) for Re z >= 1/2; analytic branch (imaginary part continuous).
    zm = z - 1.0
    x = np.full_like(zm, _LANCZOS_COEF[0])
    for k in range(1, len(_LANCZOS_COEF)):
        x = x + _LANCZOS_COEF[k] / (zm + k)
    t = zm + _LANCZOS_G + 0.5
    return HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(x)


def log_gamma(s):
    """Logarithm of the complex gamma function.

    For ``Re s > 0`` the branch is the analytic continuation of the real
    ``log Gamma`` on the positive axis (same as ``scipy.special.loggamma``).
    For ``Re s <= 0`` the reflection formula is used with principal logarithms,
    so only ``exp(log_gamma(s))`` is meaningful there.
    """
    z = np.asarray(s, dtype=complex)
    if np.any(_near_nonpositive_integer(z)):
        raise PoleError(f"log_gamma: pole at non-positive integer in {s!r}")
    out = np.empty_like(z)

    right = z.real >= 0.5
    mid = (z.real > 0.0) & ~right
    left = z.real <= 0.0

    if np.any(right):
        out[right] = _lanczos_log(z[right])
    if np.any(mid):
        zm = z[mid]
        out[mid] = _lanczos_log(zm + 1.0) - np.log(zm)
    if np.any(left):
        zl = z[left]
        out[left] = LOG_PI - np.log(np.sin(np.pi * zl)) - _lanczos_log(1.0 - zl)
    return out if out.ndim else out[()]


def gamma(s):
    """Complex gamma function via :func:`log_gamma`."""
    return np.exp(log_gamma(s))


def rgamma(s):
    """Reciprocal gamma, entire: zero at the non-positive integers."""
    z = np.asarray(s, dtype=complex)
    poles = _near_nonpositive_integer(z)
    out = np.zeros_like(z)
    if np.any(~poles):
        out[~poles] = np.exp(-log_gamma(z[~poles]))
    return out if out.ndim else out[()]


def log_gamma_factor(s):
    """log of pi^(-s/2) Gamma(s/2)."""
    z = np.asarray(s, dtype=complex)
    return -0.5 * z * LOG_PI + log_gamma(0.5 * z)


def gamma_factor(s):
    """Completed Mellin factor pi^(-s/2) Gamma(s/2); poles at s = 0, -2, -4, ..."""
    z = np.asarray(s, dtype=complex)
    if np.any(_near_nonpositive_integer(0.5 * z)):
        raise PoleError(f"gamma_factor: pole at s in {{0, -2, -4, ...}} in {s!r}")
    return np.exp(log_gamma_factor(z))


def chi(s):
    """pi^(s-1/2) Gamma((1-s)/2) / Gamma(s/2).

    Mellin symbol of the cosine transform.  Poles at s = 1, 3, 5, ... raise
    :class:`PoleError`; s = 0, -2, -4, ... are zeros.
    """
    z = np.asarray(s, dtype=complex)
    w = 0.5 * (1.0 - z)
    if np.any(_near_nonpositive_integer(w)):
        raise PoleError(f"chi: pole at s in {{1, 3, 5, ...}} in {s!r}")
    out = np.exp((z - 0.5) * LOG_PI + log_gamma(w)) * rgamma(0.5 * z)
    return out if np.ndim(out) else out[()]


def rvm_count(T):
    """Smoothed Riemann-von Mangoldt main term (T/2pi)log(T/2pi) - T/2pi + 7/8.

    The main term is only meaningful above T = 2*pi*e, where it equals 7/8.
    """
    t = np.asarray(T, dtype=float)
    if np.any(t <= 0):
        raise ValueError(f"rvm_count: T must be positive, got {T!r}")
    x = t / (2.0 * math.pi)
    out = x * np.log(x) - x + 0.875
    return out if out.ndim else float(out)

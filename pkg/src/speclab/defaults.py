"""Central table of numerical defaults.

=================  ==========  ==============================================
key                value       meaning
=================  ==========  ==============================================
n                  128         Gauss-Legendre nodes for a <= 2 (scaled ~a^2)
cond_warn          1e12        warn when 1 +/- C_a is worse conditioned
fd_step            1e-4        u-step of the finite-difference mu check
mu_rtol            1e-6        resolvent vs finite-difference agreement
deriv_step         1e-4        E-step (times 1+|E|) for s-derivatives
limit_tol          1e-6        |z+w-1| below which the removable limit is used
limit_step         1e-3        offset used by the removable-limit extrapolation
rk_step            1e-3        base Runge-Kutta step in u
rk_tol             1e-10       step-doubling local error tolerance
rk_min_step        1e-8        step-size underflow threshold
scan_step          0.05        zero-scan step in E up to E = 20
bisect_tol         1e-9        upper bound on the zero-refinement error in E
table_steps        512         PotentialTable intervals
hp_threshold       0.75        a above which arb extended precision is used
=================  ==========  ==============================================
"""
from __future__ import annotations

DEFAULTS: dict[str, float] = {
    "n": 128,
    "cond_warn": 1e12,
    "fd_step": 1e-4,
    "mu_rtol": 1e-6,
    "deriv_step": 1e-4,
    "limit_tol": 1e-6,
    "limit_step": 1e-3,
    "rk_step": 1e-3,
    "rk_tol": 1e-10,
    "rk_min_step": 1e-8,
    "scan_step": 0.05,
    "bisect_tol": 1e-9,
    "table_steps": 512,
    "hp_threshold": 0.75,
}

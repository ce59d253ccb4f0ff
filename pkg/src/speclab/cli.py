"""Command-line driver: ``speclab potential|structure|bound-states|scattering|expansion|verify``.

Settings come from, in increasing priority, the built-in defaults, a flat
``key=value`` config file (``--config``) and command-line flags.  The cache
root is ``--cache``, else the ``SPECLAB_CACHE`` environment variable, else no
on-disk cache.

Exit codes:

    0  success
    1  an invariant check failed (artifacts are still written)
    2  usage error; the message names the offending field
    3  I/O error; the message names the path
    4  numerical failure (cross-validation mismatch, non-positive norm, ...)
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .defaults import DEFAULTS

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

COMMANDS = ("potential", "structure", "bound-states", "scattering", "expansion", "verify")
BOUND_STATES_HEADER = ["n", "E_n", "norm", "rvm_ratio"]
POTENTIAL_HEADER = ["u", "mu", "logdet_plus", "logdet_minus"]
DENSITY_HEADER = ["E", "density", "im_m_over_pi"]
SCHEMA = 1

# Check tolerances used by ``verify``; each is overridable as --tol-<name>.
CHECK_TOLERANCES: dict[str, float] = {
    "chi": 1e-10,
    "free": 1e-8,
    "det": 1e-7,
    "wronskian": 1e-6,
    "w1": 1e-6,
    "symmetry": 1e-9,
    "norm_match": 1e-5,
    "trajectory_norm": 1e-2,
    "orthogonality": 1e-3,
    "eigenvector": 1e-6,
    "density": 1e-6,
    "plancherel": 1e-2,
}
# Library defaults that may also be overridden from the command line.
LIBRARY_TOLERANCES = ("mu_rtol", "rk_tol", "bisect_tol", "limit_tol", "cond_warn")
TOLERANCE_NAMES = tuple(CHECK_TOLERANCES) + LIBRARY_TOLERANCES

_FIELDS = {
    "a0": float, "n": int, "emax": float, "umin": float, "umax": float,
    "steps": int, "out": str, "cache": str,
}


class UsageError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str
    a0: float | None = None
    n: int | None = None
    emax: float = 20.0
    umin: float = -4.0
    umax: float = 1.0
    steps: int = 64
    out: str = "speclab-out"
    cache: str | None = None
    tolerances: dict[str, float] = field(default_factory=dict)

    def tol(self, name: str) -> float:
        if name in self.tolerances:
            return self.tolerances[name]
        return CHECK_TOLERANCES[name] if name in CHECK_TOLERANCES else float(DEFAULTS[name])

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise UsageError("command", f"unknown command {self.command!r}")
        needs_a0 = self.command != "potential"
        if needs_a0 and self.a0 is None:
            raise UsageError("a0", "missing required field a0 (use --a0)")
        if self.a0 is not None and not (self.a0 > 0 and math.isfinite(self.a0)):
            raise UsageError("a0", f"must be positive, got {self.a0}")
        if self.n is not None and self.n < 8:
            raise UsageError("n", f"must be >= 8, got {self.n}")
        if not self.emax > 0:
            raise UsageError("emax", f"must be positive, got {self.emax}")
        if not self.umin < self.umax:
            raise UsageError("umin", f"empty range: umin={self.umin} >= umax={self.umax}")
        if self.steps < 4:
            raise UsageError("steps", f"must be >= 4, got {self.steps}")
        for name, value in self.tolerances.items():
            if not value > 0:
                raise UsageError(f"tol-{name}", f"tolerance must be positive, got {value}")
        return self


# -- configuration -------------------------------------------------------------

def _flag(name: str) -> str:
    return "--tol-" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"speclab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value file; flags override it")
        p.add_argument("--a0", type=float)
        p.add_argument("--n", type=int, help="base Gauss-Legendre node count")
        p.add_argument("--emax", type=float)
        p.add_argument("--umin", type=float)
        p.add_argument("--umax", type=float)
        p.add_argument("--steps", type=int, help="grid intervals for tables and traces")
        p.add_argument("--out", help="output directory")
        p.add_argument("--cache", help="cache root (overrides SPECLAB_CACHE)")
        for tname in TOLERANCE_NAMES:
            p.add_argument(_flag(tname), dest="tol_" + tname, type=float, metavar="TOL")
    return parser


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError("config", f"cannot read {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("config", f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _convert(key: str, raw, kind) -> object:
    try:
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(key, f"invalid value {raw!r}") from exc


def resolve_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    cfg = RunConfig(command=args.command)
    settings: dict[str, object] = {}
    if args.config:
        for key, raw in read_config_file(args.config).items():
            if key in _FIELDS:
                settings[key] = _convert(key, raw, _FIELDS[key])
            elif key.startswith("tol_") and key[4:] in TOLERANCE_NAMES:
                cfg.tolerances[key[4:]] = _convert(key, raw, float)
            else:
                raise UsageError(key, "unknown config key")
    for key in _FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for tname in TOLERANCE_NAMES:
        value = getattr(args, "tol_" + tname, None)
        if value is not None:
            cfg.tolerances[tname] = value
    for key, value in settings.items():
        setattr(cfg, key, value)
    if cfg.cache is None and environ.get("SPECLAB_CACHE"):
        cfg.cache = environ["SPECLAB_CACHE"]
    return cfg.validate()


# -- emitters --------------------------------------------------------------------

def _num(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def write_json(path: Path, payload: dict) -> Path:
    body = {"schema": SCHEMA, **payload}
    text = json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([repr(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""

    def as_json(self) -> dict:
        out = {"status": "pass" if self.passed else "fail", "value": _num(self.value), "tol": self.tol}
        if self.note:
            out["note"] = self.note
        return out


def _tag(a0: float) -> str:
    return f"{a0:.6g}"


# -- commands --------------------------------------------------------------------

def cmd_potential(cfg: RunConfig) -> tuple[int, list[Path]]:
    from .kernel import build_potential_table

    # every 8th grid point also passes the finite-difference cross-check
    table = build_potential_table(cfg.umin, cfg.umax, cfg.steps, validate_every=8)
    out = Path(cfg.out)
    rows = [(float(u), float(m), float(p), float(q)) for u, m, p, q in
            zip(table.u_grid, table.mu_values, table.logdet_plus, table.logdet_minus)]
    paths = [write_csv(out / "potential.csv", POTENTIAL_HEADER, rows)]
    refine = table.refine_check()
    checks = [Check("mu_positive", float(np.min(table.mu_values)), 0.0, bool(np.all(table.mu_values > 0)))]
    paths.append(write_json(out / "potential.json", {
        "command": "potential", "umin": cfg.umin, "umax": cfg.umax, "steps": cfg.steps,
        "refine_check": _num(refine),
        "invariant_checks": {c.name: c.as_json() for c in checks},
    }))
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT), paths


def cmd_structure(cfg: RunConfig) -> tuple[int, list[Path]]:
    from .structure import StructureEvaluator, write_trace_csv

    ev = StructureEvaluator.at(cfg.a0)
    grid = np.linspace(0.0, cfg.emax, cfg.steps + 1)
    out = Path(cfg.out)
    path = write_trace_csv(out / f"structure_a{_tag(cfg.a0)}.csv", ev, grid)
    big_a, big_b = ev.ab(0.5 + 1j * grid)
    scale = 1.0 + np.maximum(np.abs(big_a), np.abs(big_b))
    im = float(np.max(np.maximum(np.abs(big_a.imag), np.abs(big_b.imag)) / scale))
    checks = [Check("critical_line_real", im, 1e-8, im <= 1e-8)]
    meta = write_json(out / f"structure_a{_tag(cfg.a0)}.json", {
        "command": "structure", "a0": cfg.a0, "emax": cfg.emax, "steps": cfg.steps,
        "invariant_checks": {c.name: c.as_json() for c in checks},
    })
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT), [path, meta]


def _bound_state_rows(spectrum) -> list[tuple]:
    from .special import rvm_count

    rows = []
    positive = np.sort(spectrum.eigenvalues[spectrum.eigenvalues > 0])
    for k, (e, nrm) in enumerate(zip(spectrum.eigenvalues, spectrum.norms), 1):
        t = abs(float(e))
        count = int(np.sum(positive <= t + 1e-12))
        # the smoothed count is negative below T ~ 9.8; no ratio there
        ref = rvm_count(t) if t > 0 else 0.0
        ratio = count / ref if ref > 0 else float("nan")
        rows.append((k, float(e), float(nrm), float(ratio)))
    return rows


def cmd_bound_states(cfg: RunConfig) -> tuple[int, list[Path]]:
    from .spectral import find_bound_states

    spectrum = find_bound_states(cfg.a0, cfg.emax)
    rows = _bound_state_rows(spectrum)
    out = Path(cfg.out)
    checks = [
        Check("symmetric", 0.0, 1e-8, spectrum.is_symmetric()),
        Check("interlacing", 0.0, 0.0, spectrum.interlaces()),
        Check("norms_positive", float(np.min(spectrum.norms)) if len(rows) else 0.0, 0.0,
              bool(np.all(spectrum.norms > 0))),
    ]
    csv_path = write_csv(out / f"bound_states_a{_tag(cfg.a0)}.csv", BOUND_STATES_HEADER, rows)
    meta = write_json(out / f"bound_states_a{_tag(cfg.a0)}.json", {
        "command": "bound-states", "a0": cfg.a0, "emax": cfg.emax,
        "eigenvalues": [r[1] for r in rows],
        "norms": [r[2] for r in rows],
        "rvm_ratios": [_num(r[3]) for r in rows],
        "invariant_checks": {c.name: c.as_json() for c in checks},
    })
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT), [csv_path, meta]


def cmd_scattering(cfg: RunConfig) -> tuple[int, list[Path]]:
    from .spectral import m_scattering, scattering_measure

    grid = np.linspace(0.0, cfg.emax, cfg.steps + 1)
    measure = scattering_measure(cfg.a0, grid)
    im_m = np.array([m_scattering(cfg.a0, e).imag / np.pi for e in grid])
    rows = [(float(e), float(d), float(m)) for e, d, m in zip(grid, measure.density, im_m)]
    out = Path(cfg.out)
    tol = cfg.tol("density")
    defect = float(np.max(np.abs(measure.density - im_m) / measure.density))
    checks = [
        Check("density_positive", float(np.min(measure.density)), 0.0, bool(np.all(measure.density > 0))),
        Check("density_matches_im_m", defect, tol, defect <= tol),
    ]
    csv_path = write_csv(out / f"scattering_a{_tag(cfg.a0)}.csv", DENSITY_HEADER, rows)
    meta = write_json(out / f"scattering_a{_tag(cfg.a0)}.json", {
        "command": "scattering", "a0": cfg.a0, "emax": cfg.emax, "steps": cfg.steps,
        "invariant_checks": {c.name: c.as_json() for c in checks},
    })
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT), [csv_path, meta]


def expansion_checks(cfg: RunConfig) -> list[Check]:
    from . import testfunctions as tf
    from .spectral import IsometricExpansion, plancherel_check

    tol = cfg.tol("plancherel")
    checks = []
    expansion = IsometricExpansion(tf.isometric_u_grid(), tf.ISOMETRIC_E_MAX, tf.ISOMETRIC_DE)
    for name, item in tf.full_line_tests().items():
        defect = expansion.parseval_defect(item.F)
        checks.append(Check(f"parseval_{name}", defect, tol, defect < tol))
    u0 = math.log(cfg.a0)
    for name, (u, alpha, beta) in tf.left_bumps(u0).items():
        lhs, rhs = plancherel_check(alpha, beta, u, cfg.a0)
        defect = abs(lhs - rhs) / lhs
        checks.append(Check(f"plancherel_{name}", defect, tol, defect < tol))
    return checks


def cmd_expansion(cfg: RunConfig) -> tuple[int, list[Path]]:
    checks = expansion_checks(cfg)
    meta = write_json(Path(cfg.out) / f"expansion_a{_tag(cfg.a0)}.json", {
        "command": "expansion", "a0": cfg.a0,
        "invariant_checks": {c.name: c.as_json() for c in checks},
    })
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT), [meta]


def verify_checks(cfg: RunConfig):
    """The invariant suite at a0 over [-emax, emax]: (checks, diagnostics, spectrum)."""
    from . import special
    from .dirac import integrate, w1_identity, wronskian_AJ
    from .kernel import PotentialTable, log_det, log_det_dirichlet
    from .spectral import (bound_state_norm, density_trend, eigenvector_ratio, find_bound_states,
                           m_bound, m_scattering, orthogonality_matrix, scattering_measure,
                           trajectory_norm)
    from .structure import StructureEvaluator, evaluator_norm_critical

    a0, emax = cfg.a0, cfg.emax
    rng = np.random.default_rng(20240601)
    checks: list[Check] = []

    def add(name, value, tol_name, ok=None, note=""):
        tol = cfg.tol(tol_name) if isinstance(tol_name, str) else tol_name
        passed = (value <= tol) if ok is None else ok
        checks.append(Check(name, float(value), float(tol), bool(passed), note))

    s = rng.uniform(-3, 3, 50) + 1j * rng.uniform(-30, 30, 50)
    add("chi_reflection", float(np.max(np.abs(special.chi(s) * special.chi(1 - s) - 1))), "chi")

    zero = PotentialTable.zero(0.0, 2.0)
    rot = integrate(0.0, math.pi / 2, 1.0, (1.0, 0.0), zero).at_end()
    free_err = abs(rot.alpha) + abs(rot.beta - 1)
    free_m = m_scattering(a0, 1.0 + 0.5j, free=True)
    add("free_rotation", free_err, "free")
    add("free_m_is_i", abs(free_m - 1j), "free")

    det_gap = abs(log_det(a0, "+") + log_det(a0, "-") - log_det_dirichlet(a0))
    add("determinant_factorization", det_gap, "det")

    ws = [0.5, 0.3 + 2j, 0.7 - 1.5j, 0.5 + 8j]
    w_err = max(abs(wronskian_AJ(a0, v) - 1j * special.gamma_factor(1 - v)) / abs(special.gamma_factor(1 - v))
                for v in ws)
    add("wronskian_AJ", w_err, "wronskian")
    w1_err = max(abs(w1_identity(a, e) - 1) for a in (0.5 * a0, a0) for e in np.linspace(0, emax, 6))
    add("w1_identity", w1_err, "w1")

    ev = StructureEvaluator.at(a0)
    z, w = 0.6 + 1j, 0.7 - 2j
    inner = abs(ev.evaluator_inner(z, w) - ev.evaluator_inner(w, z)) / abs(ev.evaluator_inner(z, w))
    add("evaluator_symmetry", inner, "symmetry")

    spectrum = find_bound_states(a0, emax)
    add("bound_states_symmetric", 0.0, 1e-8, spectrum.is_symmetric())
    add("bound_states_interlace", 0.0, 0.0, spectrum.interlaces())
    add("bound_state_norms_positive", float(np.min(spectrum.norms)) if len(spectrum.norms) else 0.0,
        0.0, bool(np.all(spectrum.norms > 0)))
    first = spectrum.first(5)
    if len(first):
        match = max(abs(bound_state_norm(a0, e) - evaluator_norm_critical(a0, e)) / bound_state_norm(a0, e)
                    for e in first)
        add("norm_matches_evaluator", match, "norm_match")
        quad, _ = trajectory_norm(a0, first[0])
        add("norm_matches_trajectory", abs(quad / spectrum.norms[spectrum.eigenvalues == first[0]][0] - 1),
            "trajectory_norm")
        ratio, expected = eigenvector_ratio(a0, first[0])
        add("eigenvector_ratio", float(np.max(np.abs(ratio / expected - 1))), "eigenvector")
    if len(first) >= 2:
        gram = orthogonality_matrix(a0, first)
        off = float(np.max(np.abs(gram - np.diag(np.diag(gram)))))
        add("orthogonality", off, "orthogonality")

    pts = rng.uniform(-10, 10, 20) + 1j * rng.uniform(0.05, 3, 20)
    mb = [m_bound(a0, e).imag for e in pts]
    ms = [m_scattering(a0, e).imag for e in pts]
    add("herglotz_m_bound", min(mb), 0.0, min(mb) > 0, "minimum Im m over 20 points, Im E > 0")
    add("herglotz_m_scattering", min(ms), 0.0, min(ms) > 0, "minimum Im m over 20 points, Im E > 0")
    grid = np.linspace(0, emax, 9)
    dens = scattering_measure(a0, grid).density
    im_m = np.array([m_scattering(a0, e).imag for e in grid]) / np.pi
    add("density_matches_im_m", float(np.max(np.abs(dens - im_m) / dens)), "density")

    diagnostics = {}
    upper = spectrum.E_max
    if upper > 10:
        t_grid = np.linspace(10, upper, 11)
        counts, ratios = density_trend(spectrum, t_grid)
        diagnostics["density_trend"] = {
            "T": [float(t) for t in t_grid],
            "N": [int(c) for c in counts],
            "ratio": [_num(r) for r in ratios],
        }
    return checks, diagnostics, spectrum


def cmd_verify(cfg: RunConfig) -> tuple[int, list[Path]]:
    checks, diagnostics, spectrum = verify_checks(cfg)
    rows = _bound_state_rows(spectrum)
    meta = write_json(Path(cfg.out) / f"verify_a{_tag(cfg.a0)}.json", {
        "command": "verify", "a0": cfg.a0, "emax": cfg.emax,
        "eigenvalues": [r[1] for r in rows],
        "norms": [r[2] for r in rows],
        "rvm_ratios": [_num(r[3]) for r in rows],
        "invariant_checks": {c.name: c.as_json() for c in checks},
        "diagnostics": diagnostics,
    })
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT), [meta]


HANDLERS = {
    "potential": cmd_potential,
    "structure": cmd_structure,
    "bound-states": cmd_bound_states,
    "scattering": cmd_scattering,
    "expansion": cmd_expansion,
    "verify": cmd_verify,
}


def _clear_memos() -> None:
    # memoized solutions depend on DEFAULTS["n"] and the cache root
    from . import dirac, structure

    structure._structure_memo.cache_clear()
    dirac.potential_table.cache_clear()
    dirac._exact_potential.cache_clear()


def _apply(cfg: RunConfig) -> dict:
    """Push node count, tolerances and cache root into the library; return the old defaults."""
    from .kernel import set_default_cache

    saved = dict(DEFAULTS)
    _clear_memos()
    if cfg.n is not None:
        DEFAULTS["n"] = cfg.n
    for name in LIBRARY_TOLERANCES:
        if name in cfg.tolerances:
            DEFAULTS[name] = cfg.tolerances[name]
    set_default_cache(cfg.cache)
    return saved


def _restore(saved: dict) -> None:
    from .kernel import set_default_cache

    DEFAULTS.clear()
    DEFAULTS.update(saved)
    set_default_cache(None)
    _clear_memos()


def run(cfg: RunConfig) -> int:
    """Execute one validated configuration and return the exit status."""
    from .kernel import CrossValidationError
    from .special import PoleError

    saved = _apply(cfg)
    try:
        status, paths = HANDLERS[cfg.command](cfg)
    except OSError as exc:
        print(f"speclab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, CrossValidationError, PoleError) as exc:
        print(f"speclab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        _restore(saved)
    for p in paths:
        print(p)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("speclab: error: command: missing (choose from " + ", ".join(COMMANDS) + ")", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        print(f"speclab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

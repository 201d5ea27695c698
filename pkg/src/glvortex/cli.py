"""Command-line pipelines.

    glvortex profile     --d 1 --rmax 50 --n 5000 --out run/
    glvortex synthesize  --in run/profile.csv --R 20 --n 128 --out run/
    glvortex solve-disk  --d 2 --R 5 --n 128 --out run/
    glvortex lift        --d 2 --in run/field.csv --out run/
    glvortex diagnose    --in run/field.csv --out run/
    glvortex report      --in run/diagnostics.csv --out run/

Exit status: 0 on success, 2 when a hypothesis of the analysis is violated
(field not curl-free, several zeros, level sets with several components),
1 on numerical failures and unusable input.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import radial
from .field2d import (ConvergenceError, Field2D, GridGeometry, PathDependenceError, best_rotation,
                      degree, find_zeros, gl_residual, potential, read_field, relax_solve,
                      rotate, synthesize_field, write_field)
from .levelset import LevelSetError
from .lift import (LiftError, kappa_constancy, lift, lifted_potential, lifted_residual,
                   read_lifted, starshaped_decay, write_lifted)
from .symmetry import (SLACK_C, HypothesisError, build_report, write_columns, write_report)

log = logging.getLogger("glvortex")

COMMANDS = ("profile", "synthesize", "solve-disk", "diagnose", "lift", "report")
EXIT_OK, EXIT_NUMERICAL, EXIT_HYPOTHESIS = 0, 1, 2


class HypothesisViolation(Exception):
    """Raised inside a pipeline when the input violates an analysis hypothesis."""


@dataclass
class RunConfig:
    command: str
    d: int | None = None
    R: float | None = None
    r_max: float = 50.0
    n: int | None = None
    n_levels: int | None = None
    tol: float | None = None
    slack_C: float = SLACK_C
    normalize: str = "auto"
    input: Path | None = None
    out: Path = Path(".")

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        for name in ("d", "R", "r_max", "n", "n_levels", "tol", "slack_C"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive (got {val})")
        if self.command != "profile" and self.command != "solve-disk" and self.input is None:
            raise ValueError(f"{self.command} needs --in")
        if self.input is not None and not self.input.is_file():
            raise ValueError(f"input file {self.input} not found")
        if self.normalize not in ("auto", "inf", "asymptotic"):
            raise ValueError(f"unknown normalisation {self.normalize!r}")


# flag name -> (RunConfig field, converter)
_KEYS = {
    "d": ("d", int), "R": ("R", float), "rmax": ("r_max", float), "r_max": ("r_max", float),
    "n": ("n", int), "levels": ("n_levels", int), "n_levels": ("n_levels", int),
    "tol": ("tol", float), "slack": ("slack_C", float), "slack_C": ("slack_C", float),
    "normalize": ("normalize", str), "in": ("input", Path), "input": ("input", Path),
    "out": ("out", Path),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glvortex", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", type=Path, help="flat key=value file; flags override it")
        p.add_argument("--d", type=int, help="vortex degree")
        p.add_argument("--R", type=float, help="disk radius")
        p.add_argument("--rmax", type=float, help="half-line truncation radius (profile)")
        p.add_argument("--n", type=int,
                       help="profile nodes (profile) or grid cells per radius (2-D commands)")
        p.add_argument("--levels", type=int, help="number of level sets (default rho_max / 2h)")
        p.add_argument("--tol", type=float, help="solver or verdict tolerance")
        p.add_argument("--slack", type=float, help="slack constant C in C h perimeter")
        p.add_argument("--normalize", choices=("auto", "inf", "asymptotic"),
                       help="potential normalisation (diagnose)")
        p.add_argument("--in", dest="input", type=Path, help="input file")
        p.add_argument("--out", type=Path, help="output directory")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional config file and the flags (in that order)."""
    cfg = RunConfig(command=args.command)
    if args.config is not None:
        if not args.config.is_file():
            raise ValueError(f"config file {args.config} not found")
        for key, val in radial.read_keyvalue(args.config).items():
            if key not in _KEYS:
                raise ValueError(f"unknown config key {key!r}")
            name, conv = _KEYS[key]
            setattr(cfg, name, conv(val))
    flags = {"d": args.d, "R": args.R, "rmax": args.rmax, "n": args.n, "levels": args.levels,
             "tol": args.tol, "slack": args.slack, "normalize": args.normalize,
             "in": args.input, "out": args.out}
    for key, val in flags.items():
        if val is not None:
            setattr(cfg, _KEYS[key][0], val)
    cfg.validate()
    return cfg


# ------------------------------------------------------------------ pipelines


def _summary(cfg: RunConfig, name: str, values: dict) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"{name}_summary.txt"
    radial.write_keyvalue(path, {k: _kv(v) for k, v in values.items()})
    return path


def _kv(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def run_profile(cfg: RunConfig) -> None:
    n = cfg.n or 5000
    d = cfg.d or 1
    if cfg.R is not None:
        p = radial.solve_disk_profile(d, cfg.R, n, tol=cfg.tol or 1e-10)
    else:
        p = radial.solve_profile(d, cfg.r_max, n, tol=cfg.tol or 1e-8)
    cfg.out.mkdir(parents=True, exist_ok=True)
    p.to_csv(cfg.out / "profile.csv")
    write_columns(cfg.out / "profile_r_vs_f.dat", p.r, p.f, ("r", "f"))
    values = {"degree": p.degree, "domain_kind": p.domain_kind, "extent": p.extent, "n": p.n,
              "slope_coeff": p.slope_coeff, "residual": radial.profile_residual(p),
              "quantization": radial.quantization_integral(p)}
    if p.domain_kind == radial.HALF_LINE:
        values["asymptotic_r2_defect_at_0.8rmax"] = radial.asymptotic_check(p, 0.8 * p.extent)
    _summary(cfg, "profile", values)


def run_synthesize(cfg: RunConfig) -> None:
    p = radial.RadialProfile.from_csv(cfg.input)
    R = cfg.R if cfg.R is not None else (p.extent if p.domain_kind == radial.DISK else 20.0)
    geom = GridGeometry.for_disk(R, cfg.n or 128)
    u = synthesize_field(p, geom)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_field(cfg.out / "field.csv", u)
    _summary(cfg, "field", {"d": u.bc_degree, "R": R, "h": geom.h, "n": geom.n,
                            "source": "synthesized"})


def run_solve_disk(cfg: RunConfig) -> None:
    R = cfg.R if cfg.R is not None else 5.0
    d = cfg.d or 1
    p = radial.solve_disk_profile(d, R, 2000)
    geom = GridGeometry.for_disk(R, cfg.n or 128)
    u = relax_solve(synthesize_field(p, geom), tol=cfg.tol or 1e-10)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_field(cfg.out / "field.csv", u)
    zeros = find_zeros(u)
    write_columns(cfg.out / "field_residual_history.dat",
                  np.arange(len(u.info["residual_history"])), u.info["residual_history"],
                  ("iteration", "residual"))
    values = {"d": d, "R": R, "h": geom.h, "n": geom.n,
              "iterations": u.info["iterations"], "converged": u.info["converged"],
              "residual": u.info["residual_history"][-1],
              "gl_residual_max": float(gl_residual(u).vals.max()),
              "degree": degree(u, 0.9 * R), "zeros": len(zeros)}
    for k, z in enumerate(zeros):
        values[f"zero{k}_x"], values[f"zero{k}_y"] = float(z[0]), float(z[1])
    _summary(cfg, "field", values)
    if not u.info["converged"]:
        raise ConvergenceError("relax_solve did not reach the tolerance")


def run_lift(cfg: RunConfig) -> None:
    u = read_field(cfg.input)
    d = cfg.d if cfg.d is not None else u.bc_degree
    try:
        lf = lift(u, d)
    except LiftError as exc:
        raise HypothesisViolation(str(exc)) from exc
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_lifted(cfg.out / "lifted.csv", lf)
    res = lifted_residual(lf).vals
    _summary(cfg, "lifted", {"d": lf.d, "d_star": lf.d_star, "branch_error": lf.branch_error,
                             "R_lifted": lf.v.geom.R, "h_lifted": lf.v.geom.h,
                             "lifted_residual_max": float(res.max()),
                             "zero_offset": lf.info["zero_offset"]})


def _field_potential(u: Field2D, normalize: str):
    """Rotate u to its most curl-free orientation and integrate it."""
    zeros = find_zeros(u)
    if len(zeros) > 1:
        raise HypothesisViolation(f"{len(zeros)} zeros found; a single vortex is required")
    beta = best_rotation(u)
    w = rotate(u, beta) if beta else u
    if normalize == "auto":
        mod = u.modulus()[u.geom.boundary]
        normalize = "inf" if np.max(np.abs(mod - 1)) < 1e-12 else "asymptotic"
    return potential(w, sign=1, normalize=normalize), beta, normalize


def run_diagnose(cfg: RunConfig) -> None:
    meta = cfg.input.with_suffix(cfg.input.suffix + ".meta")
    lifted = None
    if meta.is_file() and "d_star" in radial.read_keyvalue(meta):
        lifted = read_lifted(cfg.input)
        u = lifted.v
    else:
        u = read_field(cfg.input)
    try:
        if lifted is not None:
            phi = lifted_potential(lifted)
            beta, norm = 0.0, "inf"
        else:
            phi, beta, norm = _field_potential(u, cfg.normalize)
        rep = build_report(phi, n_levels=cfg.n_levels,
                           weight=lifted.weight if lifted is not None else None,
                           slack_C=cfg.slack_C, tol=cfg.tol or 1e-2)
    except (PathDependenceError, HypothesisError) as exc:
        raise HypothesisViolation(str(exc)) from exc
    rep.summary.update(rotation=beta, normalize=norm, path_dev=phi.info["path_dev"])
    write_report(rep, cfg.out)
    if lifted is not None:
        kr = kappa_constancy(lifted, n_levels=cfg.n_levels, phi=phi)
        with open(cfg.out / "kappa.csv", "w", newline="\n") as fh:
            fh.write("t,rho,kappa_mean,kappa_spread,relative_spread,g\n")
            for row in zip(kr.t, kr.rho, kr.mean, kr.spread, kr.relative_spread, kr.g.g):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        write_columns(cfg.out / "rho_vs_kappa_spread.dat", kr.rho, kr.relative_spread,
                      ("rho", "relative_spread"))
        table = starshaped_decay(kr.levels)
        write_columns(cfg.out / "rho_vs_starshaped_decay.dat", table[:, 1], table[:, 3],
                      ("rho", "starshaped_integral_times_rho2"))
        rep.summary.update(d=lifted.d, max_kappa_relative_spread=float(kr.relative_spread.max()),
                           g_nonnegative=kr.g_nonnegative(), g_nondecreasing=kr.g_nondecreasing())
        radial.write_keyvalue(cfg.out / "diagnostics_summary.txt",
                              {k: _kv(v) for k, v in rep.summary.items()})


def run_report(cfg: RunConfig) -> None:
    """Plot-data files for every column of an existing diagnostics table."""
    data = np.genfromtxt(cfg.input, delimiter=",", names=True)
    if data.dtype.names is None or "rho" not in data.dtype.names:
        raise ValueError(f"{cfg.input} is not a diagnostics table")
    data = np.atleast_1d(data)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for name in data.dtype.names:
        if name == "rho":
            continue
        write_columns(cfg.out / f"rho_vs_{name}.dat", data["rho"], data[name], ("rho", name))
    H = data["H_rearr"] / (2 * math.pi**2 * data["rho"] ** 2)
    write_columns(cfg.out / "rho_vs_H_normalized.dat", data["rho"], H, ("rho", "H_normalized"))
    for rho, h in zip(data["rho"], H):
        print(f"{rho:12.6f} {h: .6e}")


PIPELINES = {"profile": run_profile, "synthesize": run_synthesize, "solve-disk": run_solve_disk,
             "lift": run_lift, "diagnose": run_diagnose, "report": run_report}


def run(cfg: RunConfig) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore" if not log.isEnabledFor(logging.INFO) else "default")
            PIPELINES[cfg.command](cfg)
    except HypothesisViolation as exc:
        log.error("hypothesis violated: %s", exc)
        return EXIT_HYPOTHESIS
    except (ConvergenceError, LevelSetError, radial.ShootingError, ValueError, OSError,
            ArithmeticError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

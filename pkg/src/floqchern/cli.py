"""Command-line front end: figure-reproduction artifacts as CSV/JSON/SVG.

Commands: rates, phase-map, chern-diagram, optimize, sweep, validate.
Every command is deterministic given its flags and seed; reruns write
byte-identical files.  Exit codes: 0 success, 2 configuration error,
3 numerical failure; errors also go to stderr as one JSON object.
Grid flags use start:stop:step with the stop included when it lands on
the grid within epsilon.  FCF_THREADS overrides the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bloch, optimizer, svg, validate
from .drive import (SpectrumTruncationError, default_geometry, drive_from_json,
                    fourier_components)
from .effective import derive_rates


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def parse_range(text: str) -> np.ndarray:
    """start:stop:step with inclusive stop-within-epsilon."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-numeric range component in {text!r}") from None
    if step <= 0:
        raise ConfigError(f"range step must be positive, got {step}")
    if stop < start:
        raise ConfigError(f"empty range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _load_drive(arg: str):
    if arg.lstrip().startswith("{"):
        payload = arg
    else:
        if not os.path.exists(arg):
            raise ConfigError(f"drive file not found: {arg}")
        with open(arg, encoding="utf-8") as f:
            payload = f.read()
    try:
        data = json.loads(payload)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed drive JSON (line {e.lineno}, col {e.colno}): {e.msg}") from None
    return drive_from_json(data)


def _workers(args) -> int:
    env = os.environ.get("FCF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FCF_THREADS must be an integer, got {env!r}") from None
    if getattr(args, "threads", None):
        return max(1, args.threads)
    return os.cpu_count() or 1


def _outdir(args) -> str:
    out = args.out
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory not writable: {out}")
    return out


# ---------------------------------------------------------------------------

def cmd_rates(args) -> int:
    spec = _load_drive(args.drive)
    if args.j0 <= 0:
        raise ConfigError("--j0 must be positive")
    rates = derive_rates(fourier_components(spec, default_geometry(), args.j0))
    doc = rates.to_json_dict()
    doc["delta_eff"] = args.delta + rates.delta_shift
    text = json.dumps(doc, indent=2)
    print(text)
    out = _outdir(args)
    path = os.path.join(out, "rates.json")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")
    return 0


def cmd_phase_map(args) -> int:
    A1 = parse_range(args.A1)
    A2 = parse_range(args.A2)
    pm = optimizer.phase_map(A1, A2, args.delta2, family=args.family)
    out = _outdir(args)
    path = os.path.join(out, "phase_map.csv")
    _write_csv(path, ["A1", "A2", "phi", "j1_over_j0", "phi_defined"], pm.rows())
    print(f"phase map: {len(A1)}x{len(A2)} cells, phi bin coverage "
          f"{pm.phase_bin_coverage():.4f}, j1/j0>=0.25 components "
          f"{pm.superlevel_components(0.25)} -> {path}")
    if args.svg:
        with open(os.path.join(out, "phase_map.svg"), "w", encoding="utf-8", newline="\n") as f:
            f.write(svg.phase_map_svg(pm))
    return 0


def cmd_chern_diagram(args) -> int:
    phis = parse_range(args.phi)
    ratios = parse_range(args.ratio)
    kinds = {"both": bloch.KINDS, "driven": ("driven_hexagonal",),
             "haldane": ("haldane_reference",)}.get(args.model)
    if kinds is None:
        raise ConfigError(f"--model must be both, driven or haldane, got {args.model!r}")
    diagrams = bloch.phase_diagram(phis, ratios, N1=args.kgrid, N2=args.kgrid, kinds=kinds)
    out = _outdir(args)
    for kind, dg in diagrams.items():
        path = os.path.join(out, f"chern_{kind}.csv")
        _write_csv(path, ["phi", "ratio", "chern", "min_gap", "indeterminate"], dg.rows())
        n_indet = int(dg.indeterminate.sum())
        print(f"{kind}: {len(phis)}x{len(ratios)} cells, {n_indet} indeterminate -> {path}")
        if args.svg:
            with open(os.path.join(out, f"chern_{kind}.svg"), "w", encoding="utf-8", newline="\n") as f:
                f.write(svg.chern_diagram_svg(dg))
    return 0


_OPT_BASE_HEADER = ["phi_target", "r_th", "R", "re_R_exp_iphi", "im_R_exp_iphi"]


def _opt_header(N):
    return (_OPT_BASE_HEADER + [f"A{i+1}" for i in range(N)]
            + [f"delta{i+2}" for i in range(N - 1)]
            + ["j1_over_j0", "feasible", "starts_converged"])


def _opt_row(phi_tg, r_th, res, N):
    z = res.R_value * np.exp(1j * phi_tg)
    return ([phi_tg, r_th, res.R_value, z.real, z.imag]
            + list(res.p_star[:N]) + list(res.p_star[N:])
            + [res.j1_over_j0, res.feasible, res.starts_converged])


def cmd_optimize(args) -> int:
    problem = optimizer.OptimizationProblem(
        phi_target=args.phi_target, r_threshold=args.r_th, family=args.family,
        N=args.N, amp_bound=args.amp_bound, n_starts=args.starts, seed=args.seed)
    res = optimizer.maximize(problem, workers=_workers(args))
    out = _outdir(args)
    path = os.path.join(out, "optimize.csv")
    _write_csv(path, _opt_header(args.N), [_opt_row(args.phi_target, args.r_th, res, args.N)])
    print(f"R = {res.R_value:.6f} at p* = {np.array2string(res.p_star, precision=6)}, "
          f"j1/j0 = {res.j1_over_j0:.6f}, phi = {res.phi_achieved:.6f}, "
          f"feasible = {res.feasible} -> {path}")
    return 0


def cmd_sweep(args) -> int:
    if args.phi_list:
        try:
            targets = [float(x) for x in args.phi_list.split(",")]
        except ValueError:
            raise ConfigError(f"bad --phi-list {args.phi_list!r}") from None
    else:
        targets = list(np.linspace(-np.pi, np.pi, args.targets + 1)[1:])
    try:
        r_ths = [float(x) for x in args.r_th.split(",")]
    except ValueError:
        raise ConfigError(f"bad --r-th {args.r_th!r}") from None
    if not targets or not r_ths:
        raise ConfigError("sweep needs nonempty target lists")
    template = optimizer.OptimizationProblem(
        phi_target=0.0, r_threshold=r_ths[0], family=args.family, N=args.N,
        amp_bound=args.amp_bound, n_starts=args.starts, seed=args.seed)
    sw = optimizer.sweep_targets(targets, r_ths, template, workers=_workers(args))
    jump_rows = {(r_th, i + 1) for r_th, pairs in sw.jumps.items() for i, _ in pairs}
    rows = []
    for idx, (phi_tg, r_th, res) in enumerate(sw.rows):
        i_target = idx % len(targets)
        rows.append(_opt_row(phi_tg, r_th, res, args.N)
                    + [int((r_th, i_target) in jump_rows)])
    out = _outdir(args)
    path = os.path.join(out, "sweep.csv")
    _write_csv(path, _opt_header(args.N) + ["p_jump_from_prev"], rows)
    njump = sum(len(v) for v in sw.jumps.values())
    print(f"sweep: {len(targets)} targets x {len(r_ths)} thresholds, "
          f"{njump} parameter discontinuities -> {path}")
    return 0


def cmd_validate(args) -> int:
    spec = _load_drive(args.drive)
    if args.j0_over_omega <= 0:
        raise ConfigError("--j0-over-omega must be positive")
    j0 = args.j0_over_omega * spec.omega
    geom = default_geometry()
    settings = validate.PropagatorSettings(steps_per_period=args.steps,
                                           richardson_check=args.richardson)
    rep = validate.compare_effective(spec, geom, j0, args.delta, args.kgrid, settings)
    summary = {
        "max_abs_deviation": rep.max_abs_deviation,
        "mean_abs_deviation": rep.mean_abs_deviation,
        "max_abs_deviation_over_j0": rep.max_abs_deviation / j0,
        "unitarity_defect": rep.unitarity_defect,
        "kgrid": args.kgrid,
        "steps": args.steps,
    }
    if args.ladder:
        lad = validate.omega_ladder(spec, geom, j0, args.delta, args.kgrid, settings)
        summary["ladder_omegas"] = list(lad.omegas)
        summary["ladder_deviations"] = list(lad.deviations)
        summary["scaling_exponent"] = lad.exponent
        summary["shrink_factors"] = list(lad.shrink_factors)
    print(json.dumps(summary, indent=2))
    out = _outdir(args)
    path = os.path.join(out, "validate.csv")
    _write_csv(path, ["kx", "ky", "eps_exact_lo", "eps_exact_hi",
                      "eps_eff_lo", "eps_eff_hi", "deviation", "pairing_flag"],
               rep.rows())
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="floqchern",
        description="Shaken hexagonal lattice: effective rates, Chern diagrams, drive optimization")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=0, help="worker hint (FCF_THREADS overrides)")

    p = sub.add_parser("rates", help="effective rates of a drive")
    p.add_argument("--drive", required=True, help="drive JSON path or inline JSON")
    p.add_argument("--j0", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("phase-map", help="achieved phi and j1/j0 over (A1, A2)")
    p.add_argument("--A1", default="0:3.5:0.05")
    p.add_argument("--A2", default="0:3.5:0.05")
    p.add_argument("--delta2", type=float, default=math.pi / 2)
    p.add_argument("--family", choices=("plus", "minus"), default="plus")
    p.add_argument("--svg", action="store_true")
    common(p)
    p.set_defaults(func=cmd_phase_map)

    p = sub.add_parser("chern-diagram", help="Chern phase diagram over (phi, delta_eff/j2)")
    p.add_argument("--phi", default="-3.1416:3.1416:0.065")
    p.add_argument("--ratio", default="-8:8:0.165")
    p.add_argument("--kgrid", type=int, default=48)
    p.add_argument("--model", default="both", choices=("both", "driven", "haldane"))
    p.add_argument("--svg", action="store_true")
    common(p)
    p.set_defaults(func=cmd_chern_diagram)

    p = sub.add_parser("optimize", help="maximize R at one target")
    p.add_argument("--phi-target", type=float, required=True, dest="phi_target")
    p.add_argument("--r-th", type=float, required=True, dest="r_th")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--family", choices=("plus", "minus"), default="plus")
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--amp-bound", type=float, default=5.0, dest="amp_bound")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="sweep targets, polar R e^{i phi} table")
    p.add_argument("--targets", type=int, default=8, help="evenly spaced targets in (-pi, pi]")
    p.add_argument("--phi-list", default="", dest="phi_list", help="comma list overriding --targets")
    p.add_argument("--r-th", default="0.25,0.5", dest="r_th")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--family", choices=("plus", "minus"), default="plus")
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--amp-bound", type=float, default=5.0, dest="amp_bound")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="exact Floquet vs effective quasienergies")
    p.add_argument("--drive", required=True)
    p.add_argument("--j0-over-omega", type=float, default=0.02, dest="j0_over_omega")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--kgrid", type=int, default=24)
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--ladder", action="store_true", help="also run the omega-doubling ladder")
    common(p)
    p.set_defaults(func=cmd_validate)
    return ap


def _emit_error(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": {"code": code, "type": kind, "message": message}}) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as e:
        _emit_error(2, "config", str(e))
        return 2
    except (SpectrumTruncationError, bloch.ChernIndeterminateError,
            validate.StepCountError, AssertionError) as e:
        _emit_error(3, "numerical", str(e))
        return 3
    except ValueError as e:
        _emit_error(2, "config", str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``jjpump {steady,evolve,sweep,scan-ec,verify}``.

Numeric flags are in units where hbar = 1 and gamma = 1.  Passing
``--gamma G`` rescales: every energy and rate flag is multiplied by ``G``
and times are divided by it, so the same flag values describe the same
dimensionless problem.

Exit codes: 0 success, 1 usage or input error, 2 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import IntegrationError, MDMState, default_initial_state, evolve, write_trajectory_csv
from .model import ModelError, PumpParams, build_pump, load_model
from .observables import current_report
from .oracle import DimensionError, compare_meanfield
from .steady import (
    METHODS,
    FixedPointConfig,
    SingularDenominatorError,
    SingularSystemError,
    fixed_point_iterate,
    relax_to_steady,
    solve_linear_ec0,
)
from .sweep import (
    Axis,
    SweepSpec,
    render_heatmap_svg,
    resolve_threads,
    run_sweep,
    scan_capacitance,
    symmetry_report,
    write_csv,
    write_scan_csv,
)

SIGN_CONVENTION = "I_j > 0 is net flow of pairs from bath j into the network; I_pump = I_D - I_U"

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -- manifests ---------------------------------------------------------------

def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path, subcommand, args, seed, started, outputs=(), inputs=()) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "seed": seed,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "jjpump_version": __version__,
        "input_hashes": {str(p): _file_hash(p) for p in inputs},
        "outputs": {str(p): _file_hash(p) for p in outputs if Path(p).exists()},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                          encoding="utf-8")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


# -- shared flag groups --------------------------------------------------------

def _add_model_flags(p, geometry_required=True):
    g = p.add_argument_group("model")
    g.add_argument("--model", type=Path, help="JSON model document (overrides the flags below)")
    g.add_argument("--geometry", choices=("symmetric", "asymmetric"),
                   help="pump geometry" + (" (required unless --model)" if geometry_required else ""))
    g.add_argument("--K", type=float, default=0.1, help="junction tunneling amplitude")
    g.add_argument("--Ec", type=float, default=0.0, help="charging energy E_C")
    g.add_argument("--gamma-up", type=float, default=100.0, help="baseline creation rate")
    g.add_argument("--bias", type=float, default=0.0, help="bias Gamma = gamma_up[L] - gamma_up[R]")
    g.add_argument("--flux", type=float, default=0.0, help="flux in units of the flux quantum")
    g.add_argument("--epsilon", type=float, default=0.0, help="common onsite energy")
    g.add_argument("--gamma", type=float, default=1.0, help="relaxation rate (rescales all flags)")
    g.add_argument("--bias-split", choices=("left", "symmetric"), default="left",
                   help="how the bias enters the creation rates")


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=METHODS, default="fixed_point")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--max-iter", type=int, default=100_000)
    g.add_argument("--alpha", type=float, default=0.5, help="population mixing weight")
    g.add_argument("--seed", type=int, default=None, help="random start for the fixed point")
    g.add_argument("--no-fallback", action="store_true",
                   help="do not retry by ODE relaxation when the fixed point fails")
    g.add_argument("--relax-t-max", type=float, default=1e4)


def _pump_params(args) -> PumpParams:
    if args.gamma <= 0:
        raise UsageError("--gamma must be > 0")
    s = args.gamma
    return PumpParams(K=args.K * s, E_C=args.Ec * s, gamma_up_base=args.gamma_up * s,
                      bias=args.bias * s, flux=args.flux, gamma=s, epsilon=args.epsilon * s,
                      bias_split=args.bias_split)


def _model_from_args(args):
    if args.model is not None:
        try:
            return load_model(args.model)
        except OSError as exc:
            raise UsageError(f"cannot read model {args.model}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.model}: not valid JSON: {exc}") from exc
    if args.geometry is None:
        raise UsageError("one of --geometry or --model is required")
    return build_pump(_pump_params(args), direct_du=(args.geometry == "symmetric"))


def _config(args) -> FixedPointConfig:
    return FixedPointConfig(tol=args.tol, max_iter=args.max_iter, alpha=args.alpha, seed=args.seed)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _state_json(model, state: MDMState) -> dict:
    names = model.mode_labels or tuple(str(j) for j in range(model.n_modes))
    coh = []
    for j in range(model.n_modes):
        for k in range(j + 1, model.n_modes):
            z = state.sigma[j, k]
            coh.append({"j": names[j], "k": names[k], "re": float(z.real), "im": float(z.imag)})
    return {"populations": dict(zip(names, map(float, state.n))), "coherences": coh}


# -- subcommands -------------------------------------------------------------

def cmd_steady(args) -> int:
    started = _now()
    model = _model_from_args(args)
    config = _config(args)
    fallback_used = False
    if args.method == "linear_ec0":
        result = solve_linear_ec0(model)
    elif args.method == "ode_relax":
        result = relax_to_steady(model, tol=config.tol, t_max=args.relax_t_max)
    else:
        try:
            result = fixed_point_iterate(model, config)
        except SingularDenominatorError as exc:
            if args.no_fallback:
                raise
            print(f"fixed point: {exc}; falling back to ODE relaxation", file=sys.stderr)
            result = None
        if result is None or (not result.converged and not args.no_fallback):
            iters = 0 if result is None else result.iterations
            result = relax_to_steady(model, tol=config.tol, t_max=args.relax_t_max)
            result.iterations += iters
            fallback_used = True
    report = current_report(model, result.state)
    out = {
        "jjpump_version": __version__,
        "method": result.method,
        "requested_method": args.method,
        "fallback_used": fallback_used,
        "converged": bool(result.converged),
        "residual": float(result.residual),
        "iterations": int(result.iterations),
        "seed": args.seed,
        **_state_json(model, result.state),
        "currents": report.as_dict(),
        "sign_convention": SIGN_CONVENTION,
    }
    if result.model_time is not None:
        out["model_time"] = result.model_time
    _emit(out)
    if args.manifest:
        _write_manifest(args.manifest, "steady", args, args.seed, started,
                        inputs=[args.model] if args.model else ())
    return EXIT_OK if result.converged else EXIT_NUMERIC


def cmd_evolve(args) -> int:
    started = _now()
    model = _model_from_args(args)
    if args.t_end < 0:
        raise UsageError("--t-end must be >= 0")
    if args.initial == "vacuum":
        initial = MDMState(np.zeros((model.n_modes, model.n_modes)))
    else:
        initial = default_initial_state(model)
    t_end = args.t_end / model.gamma
    samples = evolve(model, initial, t_end, rel_tol=args.rel_tol)
    manifest = args.manifest or Path(str(args.out) + ".manifest.json")
    header = [f"jjpump_version: {__version__}", f"manifest: {Path(manifest).name}",
              f"t_end: {t_end!r}", f"rel_tol: {args.rel_tol!r}", f"initial: {args.initial}"]
    write_trajectory_csv(samples, args.out, model.mode_labels, header)
    final = samples[-1].state
    _emit({
        "jjpump_version": __version__,
        "output": str(args.out),
        "samples": len(samples),
        "t_final": samples[-1].time,
        **_state_json(model, final),
    })
    _write_manifest(manifest, "evolve", args, None, started, outputs=[args.out],
                    inputs=[args.model] if args.model else ())
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = _now()
    if args.geometry is None:
        raise UsageError("--geometry is required")
    params = _pump_params(args)
    s = args.gamma
    spec = SweepSpec(
        geometry=args.geometry,
        params=params,
        flux=Axis(args.flux_min, args.flux_max, args.flux_count),
        bias=Axis(args.bias_min * s, args.bias_max * s, args.bias_count),
        method=args.method,
        config=FixedPointConfig(tol=args.tol, max_iter=args.max_iter, alpha=args.alpha),
        seed=args.seed,
        warm_start=args.warm_start,
    )
    result = run_sweep(spec, threads=resolve_threads(args.threads))
    manifest = args.manifest or Path(str(args.out) + ".manifest.json")
    write_csv(result, args.out, {"manifest": Path(manifest).name})
    outputs = [args.out]
    if args.svg is not None:
        render_heatmap_svg(result, args.quantity, args.svg,
                           title=f"{args.quantity}, {args.geometry} pump, E_C = {args.Ec:g}")
        outputs.append(args.svg)
    conv = result.converged_grid()
    summary = {
        "jjpump_version": __version__,
        "output": str(args.out),
        "points": len(result.records),
        "non_converged": int((~conv).sum()),
        "methods": sorted({r.method for r in result.records}),
        "max_conservation_defect": max(abs(r.conservation_defect) for r in result.records),
    }
    if args.symmetry_check:
        try:
            summary["symmetry"] = symmetry_report(result)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    _emit(summary)
    _write_manifest(manifest, "sweep", args, args.seed, started, outputs=outputs)
    return EXIT_OK if conv.all() else EXIT_NUMERIC


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}") from None


def cmd_scan_ec(args) -> int:
    started = _now()
    s = args.gamma
    flux = np.round(np.arange(0.0, 1.0, args.flux_step), 12)
    scan = scan_capacitance(args.geometry, np.asarray(args.Ec) * s, np.asarray(args.K) * s,
                            bias=args.bias * s, flux_grid=flux, gamma_up=args.gamma_up * s,
                            gamma=s, config=FixedPointConfig(tol=args.tol),
                            bias_split=args.bias_split, threads=resolve_threads(args.threads))
    manifest = args.manifest or Path(str(args.out) + ".manifest.json")
    write_scan_csv(scan, args.out, {"manifest": Path(manifest).name,
                                    "flux_step": args.flux_step, "gamma": s})
    table = [{"E_C": float(ec), "K": float(k), "max_abs_I_pump": float(scan.max_abs_pump[i, j]),
              "argmax_flux_ratio": float(scan.argmax_flux[i, j])}
             for i, ec in enumerate(scan.ec_values) for j, k in enumerate(scan.k_values)]
    _emit({"jjpump_version": __version__, "output": str(args.out), "geometry": args.geometry,
           "all_converged": bool(scan.converged.all()), "scan": table})
    _write_manifest(manifest, "scan-ec", args, None, started, outputs=[args.out])
    return EXIT_OK if scan.converged.all() else EXIT_NUMERIC


def _oracle_network(n_modes: int, Ec: float):
    """Open chain with K = 0.5 and creation rates spread over [1, 0.25]."""
    doc = {
        "geometry": "custom",
        "gamma": 1.0,
        "n_modes": n_modes,
        "gamma_up": np.linspace(1.0, 0.25, n_modes).tolist(),
        "tunneling": [{"from": j, "to": j + 1, "re": 0.5} for j in range(n_modes - 1)],
        "capacitance": [{"i": j, "j": j + 1, "value": Ec} for j in range(n_modes - 1)] if Ec else [],
    }
    return load_model(doc)


def _symmetry_checks(tol: float) -> list[dict]:
    grid = dict(flux=Axis(-0.5, 0.5, 5), bias=Axis(-3.0, 3.0, 5))
    cases = [
        ("symmetric", 0.1, "flux_antisymmetry", True),
        ("asymmetric", 0.1, "flux_antisymmetry", True),
        ("asymmetric", 0.1, "bias_symmetry", True),
        ("symmetric", 0.0, "bias_antisymmetry", True),
        # reported only: charging breaks the reflection that makes this exact
        ("symmetric", 0.1, "bias_antisymmetry", False),
    ]
    sweeps = {}
    checks = []
    for geometry, ec, prop, asserted in cases:
        key = (geometry, ec)
        if key not in sweeps:
            sweeps[key] = run_sweep(SweepSpec(geometry, PumpParams(K=0.1, E_C=ec), **grid))
        res = sweeps[key]
        value = symmetry_report(res)[prop]
        checks.append({
            "name": f"{prop} ({geometry}, E_C={ec:g})",
            "value": value,
            "threshold": tol,
            "asserted": asserted,
            "passed": bool(value < tol and res.converged_grid().all()),
        })
    for (geometry, ec), res in sweeps.items():
        defect = max(abs(r.conservation_defect) for r in res.records)
        checks.append({
            "name": f"conservation ({geometry}, E_C={ec:g})",
            "value": defect,
            "threshold": 1e-8,
            "asserted": True,
            "passed": bool(defect < 1e-8),
        })
    return checks


def cmd_verify(args) -> int:
    started = _now()
    checks = []
    t0 = time.perf_counter()
    model = _oracle_network(args.modes, args.Ec)
    rep = compare_meanfield(model, t_end=args.t_end, cutoff=args.cutoff)
    checks.append({
        "name": f"oracle deviation ({args.modes} modes, cutoff {args.cutoff}, E_C={args.Ec:g})",
        "value": rep.max_dev,
        "threshold": args.oracle_tol,
        "asserted": args.Ec == 0,
        "passed": bool(rep.max_dev < args.oracle_tol),
        "details": rep.to_dict(),
    })
    if not args.oracle_only:
        checks.extend(_symmetry_checks(args.symmetry_tol))
    failed = [c["name"] for c in checks if c["asserted"] and not c["passed"]]
    _emit({
        "jjpump_version": __version__,
        "elapsed_s": round(time.perf_counter() - t0, 3),
        "checks": checks,
        "failed": failed,
        "ok": not failed,
    })
    for c in checks:
        tag = "PASS" if c["passed"] else ("FAIL" if c["asserted"] else "INFO")
        print(f"[{tag}] {c['name']}: {c['value']:.3e} (threshold {c['threshold']:.0e})",
              file=sys.stderr)
    if args.manifest:
        _write_manifest(args.manifest, "verify", args, None, started)
    return EXIT_OK if not failed else EXIT_NUMERIC


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jjpump", description="Mean-field Josephson-junction pump simulator.")
    parser.add_argument("--version", action="version", version=f"jjpump {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("steady", help="solve one steady state and print JSON")
    _add_model_flags(p)
    _add_solver_flags(p)
    p.add_argument("--manifest", type=Path, help="write a run manifest here")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("evolve", help="integrate the mean-field dynamics to a trajectory CSV")
    _add_model_flags(p)
    p.add_argument("--t-end", type=float, required=True, help="final time in units of 1/gamma")
    p.add_argument("--out", type=Path, required=True, help="trajectory CSV path")
    p.add_argument("--initial", choices=("uncoupled", "vacuum"), default="uncoupled")
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--manifest", type=Path, help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="flux x bias grid of steady states")
    _add_model_flags(p)
    _add_solver_flags(p)
    p.add_argument("--flux-min", type=float, default=-1.0)
    p.add_argument("--flux-max", type=float, default=1.0)
    p.add_argument("--flux-count", type=int, default=101)
    p.add_argument("--bias-min", type=float, default=-5.0)
    p.add_argument("--bias-max", type=float, default=5.0)
    p.add_argument("--bias-count", type=int, default=101)
    p.add_argument("--warm-start", action="store_true", help="seed each point from its neighbour")
    p.add_argument("--threads", type=int, default=None, help="worker processes (env JJPUMP_THREADS)")
    p.add_argument("--out", type=Path, required=True, help="CSV path")
    p.add_argument("--svg", type=Path, help="also render a heatmap here")
    p.add_argument("--quantity", default="I_pump", help="heatmap quantity")
    p.add_argument("--symmetry-check", action="store_true",
                   help="report flux/bias reflection defects (axes must be symmetric)")
    p.add_argument("--manifest", type=Path, help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scan-ec", help="flux-maximized pumped current versus E_C and K")
    p.add_argument("--geometry", choices=("symmetric", "asymmetric"), required=True)
    p.add_argument("--Ec", type=_float_list, default=[0, 0.01, 0.03, 0.1, 0.3, 1, 3],
                   help="comma-separated E_C values")
    p.add_argument("--K", type=_float_list, default=[0.1], help="comma-separated K values")
    p.add_argument("--bias", type=float, default=1.0)
    p.add_argument("--gamma-up", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--bias-split", choices=("left", "symmetric"), default="left")
    p.add_argument("--flux-step", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--manifest", type=Path)
    p.set_defaults(func=cmd_scan_ec)

    p = sub.add_parser("verify", help="exact-oracle comparison and symmetry battery")
    p.add_argument("--Ec", type=float, default=0.0,
                   help="charging for the oracle network; nonzero values are reported, not asserted")
    p.add_argument("--modes", type=int, default=2)
    p.add_argument("--cutoff", type=int, default=24, help="per-mode Fock cutoff")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--oracle-tol", type=float, default=1e-6)
    p.add_argument("--symmetry-tol", type=float, default=1e-6)
    p.add_argument("--oracle-only", action="store_true")
    p.add_argument("--manifest", type=Path)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (SingularDenominatorError, SingularSystemError, IntegrationError) as exc:
        print(f"jjpump {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ModelError, DimensionError, ValueError, OSError) as exc:
        print(f"jjpump {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

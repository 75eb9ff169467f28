"""
Command-line entry point.

Subcommands
-----------
simulate   run a config; write trajectory, diagnostics, energy and manifest
data       build the configured initial field and report its norms
semigroup  block decay of the exact linear flow for given coefficients
verify     run named verification suites
besov      Besov norms of a snapshot file or configured field

Exit status is 0 on success, 1 on validation errors or failed verification
and 2 when a run is aborted numerically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2


class UsageError(Exception):
    """Bad command line (unknown flag, missing argument)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, metavar="INT", help="random seed (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    parser = _Parser(prog="nsklab", description="Korteweg flow solver and verification toolkit.")
    parser.add_argument("--version", action="version", version=f"nsklab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="run a config")
    p.add_argument("--config", required=True, metavar="PATH")

    p = sub.add_parser("data", parents=[common], help="build the configured field")
    p.add_argument("--config", required=True, metavar="PATH")

    p = sub.add_parser("semigroup", parents=[common], help="block decay of the linear flow")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--K", type=float, default=0.0)
    p.add_argument("--block", type=int, default=3)
    p.add_argument("--tmax", type=float, default=None, help="default: 10 predicted e-folding times")
    p.add_argument("--samples", type=int, default=50)

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--suite", default="all", metavar="NAME")
    p.add_argument("--config", metavar="PATH", help="config for the energy and scaling suites")

    p = sub.add_parser("besov", parents=[common], help="Besov norms of a field")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH", help="binary field snapshot")
    src.add_argument("--config", metavar="PATH", help="config whose data section defines the field")
    p.add_argument("--spec", action="append", metavar="s,p,r", help="norm spec, repeatable")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"cannot write output directory {out}: {exc.strerror or exc}") from None
    return out


class OutputError(Exception):
    pass


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _finite(x: float):
    return x if math.isfinite(x) else str(x)


def _manifest(command: str, argv, cfg: RunConfig | None, status: str, verdicts: dict, outputs: list) -> dict:
    return {
        "tool": "nsklab",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": command,
        "argv": list(argv),
        "config_hash": cfg.hash() if cfg else None,
        "config": cfg.to_dict() if cfg else None,
        "status": status,
        "verdicts": verdicts,
        "outputs": sorted(outputs),
    }


def _load(args, purpose: str = "run") -> RunConfig:
    cfg = load_config(args.config, purpose)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _say(args, *lines) -> None:
    if not args.quiet:
        for line in lines:
            print(line)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, argv) -> int:
    from .diagnostics import dissipation_check, energy_history, linf_monitor
    from .io import write_trajectory
    from .solver import simulate

    cfg = _load(args)
    out = _prepare_out(args.out or cfg.output)
    traj = simulate(cfg)
    files = {"trajectory.bin", "diagnostics.csv", "energy.csv", "linf.csv", "manifest.json"}
    write_trajectory(out / "trajectory.bin", traj.snapshots)
    (out / "diagnostics.csv").write_text(traj.diagnostics_csv())

    hist = energy_history(traj, cfg.params)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "kinetic", "potential", "capillary", "dissipation_rate", "dissipated", "total"])
    for t, h in zip(traj.times, hist):
        w.writerow([repr(float(t))] + [repr(v) for v in (h.kinetic, h.potential, h.capillary,
                                                          h.dissipation_rate, h.viscous_dissipated, h.total)])
    (out / "energy.csv").write_text(buf.getvalue())

    lin = linf_monitor(traj)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "rho_max", "inv_rho_max", "q_max"])
    for row in lin.rows():
        w.writerow([repr(v) for v in row])
    (out / "linf.csv").write_text(buf.getvalue())

    verdicts = {"linf": {"C_fit": _finite(lin.C_fit), "flagged": lin.flagged}}
    if len(traj.snapshots) >= 3:
        verdicts["energy"] = dissipation_check(traj, cfg.params).as_dict()
    if "picard_ratios" in traj.metadata:
        verdicts["picard"] = {"ratios": [_finite(r) for r in traj.metadata["picard_ratios"]]}
    _write_json(out / "manifest.json", _manifest("simulate", argv, cfg, traj.status, verdicts, files))
    if not traj.ok:
        print(f"nsklab: run {traj.status}", file=sys.stderr)
        return EXIT_ABORT
    _say(args, f"simulate: {len(traj.snapshots)} snapshots written to {out}")
    return EXIT_OK


def _norm_report(field, specs) -> dict:
    from .littlewood_paley import BesovSpec, norm, partition_for

    part = partition_for(field.grid)
    report = {
        "l2": field.norm_l2(),
        "linf": field.norm_linf(),
        "mean": float(np.mean(field.samples)),
        "block_range": [part.j_min, part.j_max],
        "block_l2_norms": dict(zip(map(str, part.blocks), part.block_norms(field, 2.0).tolist())),
    }
    report["besov"] = {s: _finite(norm(field, BesovSpec.parse(s))) for s in specs}
    return report


def cmd_data(args, argv) -> int:
    from .initial_data import build_field
    from .io import slice_csv, write_snapshot

    cfg = _load(args, purpose="data")
    out = _prepare_out(args.out or cfg.output)
    field = build_field(cfg.data, cfg.grid, cfg.seed)
    write_snapshot(out / "field.bin", field)
    (out / "slice.csv").write_text(slice_csv(field))
    report = _norm_report(field, cfg.diagnostics or ("0,2,2", f"{cfg.grid.dim / 2 - 1},2,inf"))
    _write_json(out / "norms.json", report)
    files = {"field.bin", "slice.csv", "norms.json", "manifest.json"}
    _write_json(out / "manifest.json", _manifest("data", argv, cfg, "ok", {}, files))
    _say(args, f"data: {cfg.data.kind} field written to {out}")
    return EXIT_OK


def cmd_semigroup(args, argv) -> int:
    from .linear import (
        LinearCoeffs,
        apply_matrices,
        block_probe,
        default_probe_grid,
        dyadic_energy,
        predicted_block_rate,
        semigroup_matrices,
        verify_block_decay,
    )
    from .littlewood_paley import partition_for
    from .state import FluidState

    if args.samples < 4:
        raise ValueError("--samples must be >= 4")
    if args.tmax is not None and not args.tmax > 0:
        raise ValueError("--tmax must be positive")
    if not 2 * args.mu + args.lam > 0:
        raise ValueError(f"2μ+λ>0 violated (2mu + lambda = {2 * args.mu + args.lam})")
    co = LinearCoeffs.from_physical(args.mu, args.lam, args.kappa, args.K)
    grid = default_probe_grid()
    partition_for(grid).check_block(args.block)
    pred = predicted_block_rate(args.block, co)
    tmax = args.tmax if args.tmax is not None else 10.0 / pred
    times = np.linspace(0.0, tmax, args.samples)
    seed = args.seed if args.seed is not None else 0
    rep = verify_block_decay(args.block, co, times, grid=grid, seed=seed)

    alpha = math.sqrt(co.c) / 2.0
    x0 = block_probe(grid, args.block, np.random.default_rng(seed)).coeffs()
    k = [
        dyadic_energy(FluidState.from_coeffs(grid, apply_matrices(semigroup_matrices(grid, co, t), x0)),
                      args.block, alpha, co)
        for t in times
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "block_norm", "k_l"])
    for row in zip(times, rep.norms, k):
        w.writerow([repr(float(v)) for v in row])
    verdict = {
        "block": args.block,
        "predicted_rate": rep.predicted_rate,
        "measured_rate": rep.measured_rate,
        "c_fit": rep.c_fit,
        "regime": co.regime,
        "alpha": alpha,
        "k_l_monotone": bool(np.all(np.diff(k) <= 1e-12 * max(k))),
    }
    if args.out:
        out = _prepare_out(args.out)
        (out / "semigroup.csv").write_text(buf.getvalue())
        _write_json(out / "verdict.json", verdict)
        files = {"semigroup.csv", "verdict.json", "manifest.json"}
        _write_json(out / "manifest.json", _manifest("semigroup", argv, None, "ok", {"semigroup": verdict}, files))
    if not args.quiet:
        if not args.out:
            sys.stdout.write(buf.getvalue())
        print(json.dumps(verdict, sort_keys=True))
    return EXIT_OK


def cmd_verify(args, argv) -> int:
    from .suites import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in SUITES:
        raise ValueError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)} or 'all'")
    cfg = _load(args) if args.config else None
    out = _prepare_out(args.out) if args.out else None
    results = []
    for name in names:
        if cfg is not None and name in ("energy", "scaling"):
            results.append(_config_suite(name, cfg))
        else:
            results.append(run_suite(name))
        for r in results[-1].results:
            _say(args, r.line())
    verdicts = {r.name: r.as_dict() for r in results}
    ok = all(r.passed for r in results)
    if out is not None:
        _write_json(out / "verdicts.json", verdicts)
        files = {"verdicts.json", "manifest.json"}
        _write_json(out / "manifest.json", _manifest("verify", argv, cfg, "ok" if ok else "failed", verdicts, files))
    if not args.quiet:
        print(json.dumps({name: v["passed"] for name, v in verdicts.items()}, sort_keys=True))
    return EXIT_OK if ok else EXIT_INVALID


def _config_suite(name: str, cfg: RunConfig):
    import time

    from .diagnostics import dissipation_check, scaling_invariance_check
    from .solver import simulate
    from .suites import CriterionResult, SuiteResult

    t0 = time.perf_counter()
    if name == "energy":
        traj = simulate(cfg)
        v = dissipation_check(traj, cfg.params)
        res = CriterionResult(7, "energy inequality", v.passed and traj.ok, v.as_dict())
    else:
        v = scaling_invariance_check(cfg, 2)
        res = CriterionResult(8, "scaling invariance", v.passed,
                              {"max_mismatch": v.max_mismatch, "tol": v.tol})
    res.elapsed = time.perf_counter() - t0
    return SuiteResult(name, [res])


def cmd_besov(args, argv) -> int:
    from .initial_data import build_field
    from .io import read_snapshot

    cfg = None
    if args.input:
        try:
            field = read_snapshot(args.input)
        except OSError as exc:
            raise ValueError(f"cannot read snapshot {args.input}: {exc.strerror}") from None
    else:
        cfg = _load(args, purpose="data")
        field = build_field(cfg.data, cfg.grid, cfg.seed)
    specs = args.spec or ["0,2,2"]
    if field.is_vector:
        from .littlewood_paley import BesovSpec, norm

        report = {"besov": {s: _finite(norm(field, BesovSpec.parse(s))) for s in specs}}
    else:
        report = _norm_report(field, specs)
    if args.out:
        out = _prepare_out(args.out)
        _write_json(out / "besov.json", report)
        _write_json(out / "manifest.json", _manifest("besov", argv, cfg, "ok", {}, {"besov.json", "manifest.json"}))
    if not args.quiet:
        print(json.dumps(report["besov"], sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "data": cmd_data,
    "semigroup": cmd_semigroup,
    "verify": cmd_verify,
    "besov": cmd_besov,
}


def run(argv=None) -> int:
    """Parse ``argv`` and dispatch; returns the exit status."""
    from .solver import NumericalAbort

    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"nsklab: usage error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"nsklab: invalid config: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OutputError as exc:
        print(f"nsklab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalAbort as exc:
        print(f"nsklab: numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        print(f"nsklab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


__all__ = ["EXIT_ABORT", "EXIT_INVALID", "EXIT_OK", "build_parser", "main", "run"]

"""Command-line entry point: ``python -m sleepwake <command> ...``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import analysis, experiments, io, params as params_mod
from .errors import SleepWakeError
from .integrator import SimulationConfig, simulate

log = logging.getLogger("sleepwake")

REFERENCE_WINDOW = (0.29, 0.32)


class UsageError(Exception):
    """Bad combination of flags (exit code 2)."""


def _add_params(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--params", type=Path, help="parameter file (missing keys take defaults)")
    g.add_argument("--published", action="store_true",
                   help="use the coefficient table exactly as published (unstable fast block)")


def _add_sim(p, hours=216.0):
    p.add_argument("--hours", type=float, default=hours, help="simulated span (h)")
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--step", type=float, default=0.002, help="RK4 step (h)")
    p.add_argument("--stride", type=int, default=5, help="record every N steps")
    p.add_argument("--transient", type=float, default=48.0, help="hours flagged as transient")
    p.add_argument("--rem-threshold", type=float, default=0.5)
    p.add_argument("--no-negative-warnings", action="store_true")


def _add_common(p):
    p.add_argument("--metadata", type=Path, help="sidecar metadata path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sleepwake", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("simulate", help="integrate the model and write a trajectory CSV")
    _add_sim(p)
    _add_params(p)
    _add_common(p)
    p.add_argument("--schedule", type=Path, help="perturbation schedule file")
    p.add_argument("--out", type=Path, required=True, help="trajectory CSV")
    p.add_argument("--summary", type=Path, help="analysis summary JSON (default: <out>.summary.json)")
    p.add_argument("--plot", action="append", default=[], metavar="KIND=PATH",
                   help="emit plot data (timeseries, phase_plane, rem); repeatable")

    p = sub.add_parser("stability", help="fixed point, Jacobian eigenvalues and classification")
    _add_params(p)
    _add_common(p)
    p.add_argument("--epsilon", type=float, help="epsilon (default: mu)")
    p.add_argument("--lo", type=float, default=0.0, help="search interval lower end")
    p.add_argument("--hi", type=float, default=3.0, help="search interval upper end")
    p.add_argument("--full", action="store_true", help="also analyse the 11x11 equilibrium")
    p.add_argument("--out", type=Path, help="report JSON")

    p = sub.add_parser("sweep", help="epsilon sweep and oscillatory window")
    _add_params(p)
    _add_common(p)
    p.add_argument("--lo", type=float, default=0.25)
    p.add_argument("--hi", type=float, default=0.40)
    p.add_argument("--resolution", type=float, default=0.005)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", type=Path, help="sweep JSON")

    p = sub.add_parser("search", help="seeded rejection search for a stable fast block")
    _add_common(p)
    p.add_argument("--seed", type=int, default=params_mod.STABILIZATION_SEED)
    p.add_argument("--threshold", type=float, default=params_mod.STABILIZATION_THRESHOLD,
                   help="accept when max Re(lambda) is below this")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--free", default=",".join(params_mod.STABILIZATION_KEYS),
                   help="comma-separated coefficients drawn from [--lo, --hi]")
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--out", type=Path, help="parameter file for the result")

    p = sub.add_parser("knockout", help="baseline versus orexin knockout")
    _add_sim(p)
    _add_params(p)
    _add_common(p)
    p.add_argument("--factor", type=float, default=0.2)
    p.add_argument("--out", type=Path, help="report JSON")

    p = sub.add_parser("replay", help="replay a forced wake/sleep schedule")
    _add_sim(p)
    _add_params(p)
    _add_common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--schedule", type=Path, help="schedule file")
    g.add_argument("--synthetic-seed", type=int, help="seed of the synthetic camp schedule")
    p.add_argument("--extension", type=int, default=5, help="reference periods after last event")
    p.add_argument("--out", type=Path, help="perturbed trajectory CSV")
    p.add_argument("--report", type=Path, help="report JSON")
    p.add_argument("--drift-plot", type=Path, help="drift plot data path")

    p = sub.add_parser("analyze", help="recompute reports from a trajectory CSV")
    _add_common(p)
    p.add_argument("trajectory", type=Path)
    p.add_argument("--rem-threshold", type=float)
    p.add_argument("--out", type=Path, help="summary JSON")
    return parser


def _load_params(args):
    if getattr(args, "published", False):
        return params_mod.published_parameters(), "published"
    if getattr(args, "params", None) is not None:
        return params_mod.build_parameters(params_mod.read_parameter_file(args.params)), \
            str(args.params)
    return params_mod.default_parameters(), "default"


def _config(args) -> SimulationConfig:
    if args.transient >= args.hours > 0:
        raise UsageError(f"--transient ({args.transient:g}) must be shorter than "
                         f"--hours ({args.hours:g})")
    return SimulationConfig(t_start=args.t_start, t_end=args.t_start + args.hours, step=args.step,
                            transient_discard=args.transient if args.hours > 0 else 0.0,
                            record_stride=args.stride,
                            clamp_warnings=not args.no_negative_warnings,
                            rem_threshold=args.rem_threshold)


def _sidecar(args) -> Path:
    if args.metadata is not None:
        return args.metadata
    out = getattr(args, "out", None)
    if out is not None:
        return out.with_name(out.name + ".meta.json")
    return Path(f"{args.command}.meta.json")


def _print_summary(rep: experiments.BoutReport, out):
    s = rep.summary()
    per = s["period_hours"]
    print(f"cycles: {len(rep.wake_bouts)} wake bouts, {len(rep.sleep_bouts)} sleep bouts", file=out)
    if per:
        print(f"period: {per['mean']:.6g} h (cv {per['cv']:.3g}, n={per['n']})", file=out)
    print(f"wake fraction: {s['wake_fraction']:.4g}", file=out)
    print(f"REM maxima per sleep bout: {rep.rem_counts}", file=out)


def _cmd_simulate(args, out):
    plots = []
    for spec in args.plot:
        kind, sep, path = spec.partition("=")
        if not sep or kind not in io.PLOT_KINDS[:3]:
            raise UsageError(f"--plot expects KIND=PATH with KIND in timeseries, phase_plane, rem; "
                             f"got {spec!r}")
        plots.append((kind, Path(path)))
    params, source = _load_params(args)
    cfg = _config(args)
    schedule = io.parse_schedule(args.schedule) if args.schedule else []
    traj = simulate(params, cfg, schedule=schedule)
    io.write_trajectory_csv(traj, args.out)
    rep = experiments.analyze_trajectory(traj)
    summary = args.summary or args.out.with_name(args.out.name + ".summary.json")
    io.write_json(rep, summary)
    for kind, path in plots:
        io.emit_plot_data(traj, kind, path)
    _print_summary(rep, out)
    return {"config": cfg, "params": source, "params_fingerprint": params.fingerprint(),
            "schedule": schedule, "out": str(args.out), "summary": str(summary)}


def _cmd_stability(args, out):
    params, source = _load_params(args)
    eps = params.mu if args.epsilon is None else args.epsilon
    rep = analysis.stability_report(params, eps, (args.lo, args.hi))
    fp = rep.fixed_point
    print(f"epsilon: {eps:.6g}", file=out)
    print(f"fixed point: GABA_VLPO = {fp.gaba_vlpo:.10g}, AD = {fp.ad:.10g} "
          f"(residual {fp.residual:.2e})", file=out)
    print(f"trace = {rep.trace:.6g}, det = {rep.determinant:.6g}", file=out)
    print("eigenvalues: " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in rep.eigenvalues),
          file=out)
    print(f"classification: {rep.classification.value}", file=out)
    result = {"slow": rep}
    if args.full:
        full = analysis.full_stability_report(params, (args.lo, args.hi))
        print(f"full system: max Re = {max(z.real for z in full.eigenvalues):.6g}, "
              f"{full.classification.value}", file=out)
        result["full"] = full
    if args.out:
        io.write_json(result, args.out)
    return {"params": source, "epsilon": eps, "interval": [args.lo, args.hi], "full": args.full}


def _cmd_sweep(args, out):
    params, source = _load_params(args)
    res = analysis.epsilon_stability_sweep(params, (args.lo, args.hi), args.resolution, args.tol)
    for p in res.points:
        cls = p.classification.value if p.classification else f"error: {p.error}"
        print(f"{p.epsilon:.6g}\t{cls}\ttrace={p.trace:.4g}\tbounded={p.bounded}"
              f"\toscillatory={p.oscillatory}", file=out)
    if res.window:
        lo, hi = res.window
        print(f"oscillatory window: ({lo.epsilon:.5f} [{lo.kind}], {hi.epsilon:.5f} [{hi.kind}])",
              file=out)
        print(f"trace at edges: {lo.trace:.3g}, {hi.trace:.3g}", file=out)
    else:
        print("oscillatory window: none", file=out)
    print(f"reference window: ({REFERENCE_WINDOW[0]}, {REFERENCE_WINDOW[1]}]", file=out)
    if res.full_hopf:
        print("full-system max Re = 0 at: " + ", ".join(f"{e:.5f}" for e in res.full_hopf),
              file=out)
    if args.out:
        io.write_json({"points": res.points, "window": res.window, "hopf": res.hopf,
                       "full_hopf": res.full_hopf, "reference": REFERENCE_WINDOW}, args.out)
    return {"params": source, "range": [args.lo, args.hi], "resolution": args.resolution,
            "tol": args.tol}


def _cmd_search(args, out):
    free = [k.strip() for k in args.free.split(",") if k.strip()]
    bounds = params_mod.published_bounds()
    for k in free:
        if k not in params_mod.KEYS:
            raise UsageError(f"--free: unknown coefficient {k!r}")
        bounds[k] = (args.lo, args.hi)
    constraints = params_mod.SearchConstraints(bounds=bounds, max_real_part=args.threshold,
                                               max_iterations=args.max_iterations, seed=args.seed)
    res = params_mod.search_coefficients(constraints)
    print(f"accepted after {res.iterations} draws, max Re = {res.max_real_part:.6g}", file=out)
    for k in free:
        print(f"{k} = {res.table[k]!r}", file=out)
    if args.out:
        params_mod.write_parameter_file(res.table, args.out)
    return {"seed": args.seed, "threshold": args.threshold, "free": free,
            "bounds": [args.lo, args.hi], "max_iterations": args.max_iterations}


def _cmd_knockout(args, out):
    params, source = _load_params(args)
    cfg = _config(args)
    res = experiments.run_orexin_knockout(cfg, args.factor, params)
    for name, rep in (("baseline", res.baseline), ("knockout", res.knockout)):
        print(f"[{name}]", file=out)
        _print_summary(rep, out)
    print(f"relative period change: {res.period_change:.3g}", file=out)
    print(f"mean OX: baseline {res.ox_mean_baseline:.6g}, knockout {res.ox_mean_knockout:.6g}",
          file=out)
    if args.out:
        io.write_json({"factor": res.factor, "baseline": res.baseline, "knockout": res.knockout,
                       "period_change": res.period_change,
                       "ox_mean_baseline": res.ox_mean_baseline,
                       "ox_mean_knockout": res.ox_mean_knockout}, args.out)
    return {"config": cfg, "params": source, "factor": args.factor}


def _cmd_replay(args, out):
    params, source = _load_params(args)
    cfg = _config(args)
    if args.schedule:
        schedule, origin = io.parse_schedule(args.schedule), str(args.schedule)
    else:
        seed = 0 if args.synthetic_seed is None else args.synthetic_seed
        schedule, origin = experiments.sleep_camp_schedule(seed), f"synthetic(seed={seed})"
    res = experiments.replay_schedule(schedule, cfg, params, extension_periods=args.extension)
    print(f"events: {len(schedule)}, perturbation window ends at {res.window_end:.6g} h", file=out)
    print(f"reference period: {res.reference_period:.6g} h", file=out)
    if res.drift:
        print("offsets (h): " + ", ".join(f"{o:.4g}" for o in res.drift.offsets), file=out)
        print(f"recovered: {res.drift.recovered}, stabilised offset "
              f"{res.drift.stabilized_offset:.4g} h", file=out)
    rp = res.recovery_periods
    print(f"recovery cycle: {res.recovery_cycle}"
          + (f", period {rp.mean:.6g} h (cv {rp.cv:.3g})" if rp else ""), file=out)
    if args.out:
        io.write_trajectory_csv(res.trajectory, args.out)
    if args.report:
        io.write_json({"schedule": origin, "report": res.report, "drift": res.drift,
                       "window_end": res.window_end, "reference_period": res.reference_period,
                       "post_periods": res.post_periods, "recovery_cycle": res.recovery_cycle,
                       "recovery_periods": rp}, args.report)
    if args.drift_plot:
        if res.drift is None:
            raise SleepWakeError("no drift report to plot")
        io.emit_plot_data(res.drift, "drift", args.drift_plot)
    return {"config": res.trajectory.config, "params": source, "schedule": origin,
            "events": schedule, "extension": args.extension}


def _cmd_analyze(args, out):
    traj = io.read_trajectory_csv(args.trajectory)
    rep = experiments.analyze_trajectory(traj, args.rem_threshold)
    _print_summary(rep, out)
    if args.out:
        io.write_json(rep, args.out)
    return {"trajectory": str(args.trajectory), "config": traj.config,
            "params_fingerprint": traj.params_fingerprint}


COMMANDS = {
    "simulate": _cmd_simulate, "stability": _cmd_stability, "sweep": _cmd_sweep,
    "search": _cmd_search, "knockout": _cmd_knockout, "replay": _cmd_replay,
    "analyze": _cmd_analyze,
}


def run_cli(argv: Optional[List[str]] = None, out=None, err=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=err)
    try:
        resolved = COMMANDS[args.command](args, out)
        io.write_metadata(_sidecar(args), args.command, argv, resolved)
    except UsageError as exc:
        parser.print_usage(err)
        print(f"sleepwake {args.command}: error: {exc}", file=err)
        return 2
    except (SleepWakeError, ValueError, KeyError) as exc:
        print(f"sleepwake {args.command}: {type(exc).__name__}: {exc}", file=err)
        return 1
    except OSError as exc:
        print(f"sleepwake {args.command}: {exc}", file=err)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())

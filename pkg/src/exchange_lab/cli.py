"""Command-line front end.

Exit codes: 0 success, 1 computation error, 2 usage error. Any subcommand
accepts ``--config FILE`` with ``key=value`` lines; explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import agent_sim, equilibrium, exact, files, meanfield, plot
from .errors import ExchangeLabError, InvalidSpecError
from .model import ModelParams, RateFunction, WealthDistribution, distance

THREADS_ENV = "EXCHANGE_LAB_THREADS"


def _window(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("window must look like MIN:MAX")
    lo, hi = int(lo), int(hi)
    if not lo <= 0 <= hi:
        raise argparse.ArgumentTypeError("window must contain 0")
    return lo, hi


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exchange-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key=value file with default flag values")
        return p

    p = add("equilibrium", "closed-form Phase-II equilibrium")
    p.add_argument("--mu", type=_positive_int)
    p.add_argument("--nu", type=_positive_int)
    p.add_argument("--out", help="JSON path; the distribution goes next to it as CSV")
    p.add_argument("--window", type=_window, default=None)

    p = add("simulate", "finite-N agent simulation")
    p.add_argument("--agents", type=int)
    p.add_argument("--mu", type=_positive_int)
    p.add_argument("--nu", type=_positive_int)
    p.add_argument("--events", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--f", default="fstar", help="fstar | const | fabs")
    p.add_argument("--snapshot-every", type=int, default=None)
    p.add_argument("--replicas", type=_positive_int, default=1)
    p.add_argument("--out")
    p.add_argument("--svg", help="also draw the histogram against the equilibrium")

    p = add("ode", "two-phase mean-field integration")
    p.add_argument("--mu", type=_positive_int)
    p.add_argument("--nu", type=_positive_int)
    p.add_argument("--dt", type=float, default=meanfield.DEFAULT_DT)
    p.add_argument("--t-end", type=float)
    p.add_argument("--snapshots", type=_floats, default=[])
    p.add_argument("--summary-every", type=float, default=1.0)
    p.add_argument("--window", type=_window, default=meanfield.DEFAULT_WINDOW)
    p.add_argument("--f", default="fstar")
    p.add_argument("--out")
    p.add_argument("--svg", help="also draw the l2 distance to equilibrium")

    p = add("exact", "exact stationary marginal for small N")
    p.add_argument("--agents", type=_positive_int)
    p.add_argument("--money", type=int)
    p.add_argument("--bank", type=int)
    p.add_argument("--method", choices=["enumerate", "closed-form"], default="closed-form")
    p.add_argument("--f", default="fstar")
    p.add_argument("--out")

    p = add("compare", "distance between two histogram CSVs")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--metric", choices=["l2", "tv"], default="tv")
    p.add_argument("--json", dest="json_out", help="also write the result as JSON here")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="redirect the output path")
    return parser


REQUIRED = {
    "equilibrium": ("mu", "nu"),
    "simulate": ("agents", "mu", "nu", "events", "seed", "out"),
    "ode": ("mu", "nu", "t_end", "out"),
    "exact": ("agents", "money", "bank", "out"),
    "compare": ("a", "b"),
}


def parse_args(argv, parser=None):
    parser = parser or build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = files.read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(config) - known
        if unknown:
            parser.error(f"unknown keys in {args.config}: {sorted(unknown)}")
        subparser.set_defaults(**config)
        args = parser.parse_args(argv)
    missing = [name for name in REQUIRED.get(args.command, ()) if getattr(args, name, None) is None]
    if missing:
        parser.error(f"{args.command}: missing required flags: "
                     + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def _workers(n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


def _suggest_window(sol, f) -> tuple[int, int]:
    lo, hi = equilibrium.DEFAULT_WINDOW
    while True:
        try:
            equilibrium.equilibrium_distribution(sol, f, (lo, hi))
            return lo, hi
        except ValueError as exc:
            if isinstance(exc, ExchangeLabError) or lo < -10**6:
                raise
            lo, hi = 2 * lo, 2 * hi


def cmd_equilibrium(args, argv) -> int:
    sol = equilibrium.solve_equilibrium(args.mu, args.nu)
    f = RateFunction.f_star()
    window = args.window or _suggest_window(sol, f)
    p = equilibrium.equilibrium_distribution(sol, f, window)
    doc = {
        "mu": sol.mu,
        "nu": sol.nu,
        "beta_plus": sol.beta_plus,
        "beta_minus": sol.beta_minus,
        "p0_star": sol.p0_star,
        "quartic": dict(zip(("c0", "c1", "c2", "c3", "c4"), sol.quartic)),
        "quartic_residual": sol.quartic_residual,
        "residuals": dict(zip(("mass", "mean", "debt"), sol.residuals)),
        "window": list(window),
        "window_residuals": dict(zip(("mass", "mean", "debt"),
                                     equilibrium.constraint_residuals(sol, f, window))),
        "admissible_roots_found": sol.admissible_roots_found,
    }
    if args.out:
        out = Path(args.out)
        csv_path = out.with_suffix(".csv")
        files.write_histogram(csv_path, p, drop_zeros=False)
        doc["distribution_csv"] = csv_path.name
        doc["manifest"] = files.build_manifest("equilibrium", argv, {"mu": args.mu, "nu": args.nu},
                                               beta_plus=sol.beta_plus, beta_minus=sol.beta_minus,
                                               p0_star=sol.p0_star)
        files.write_json(out, doc)
    print(json.dumps(doc, indent=2, sort_keys=True, default=files._jsonable))
    return 0


def _simulate_one(task):
    params, events, seed, snapshot_every = task
    res = agent_sim.run(params, events, seed, snapshot_every)
    st = res.final_state
    return (Counter(st.wealth), st.events_blocked, st.first_empty_event, st.candidates,
            [(k, p.as_dict()) for k, p in res.snapshots])


def cmd_simulate(args, argv) -> int:
    rate = RateFunction.parse(args.f)
    agent_sim.thinning_bound(rate)
    if args.events < 0:
        raise InvalidSpecError("--events must be >= 0")
    params = ModelParams(args.mu, args.nu, args.agents, rate)
    seeds = [args.seed + k for k in range(args.replicas)]
    tasks = [(params, args.events, s, args.snapshot_every) for s in seeds]
    if len(tasks) == 1:
        results = [_simulate_one(tasks[0])]
    else:
        with ProcessPoolExecutor(max_workers=_workers(len(tasks))) as pool:
            results = list(pool.map(_simulate_one, tasks))
    counts = Counter()
    for r in results:
        counts.update(r[0])
    total = args.agents * len(results)
    hist = WealthDistribution.from_mapping({n: c / total for n, c in counts.items()})
    out = Path(args.out)
    files.write_histogram(out, hist)
    if args.snapshot_every and len(results) == 1:
        files.write_rows(out.with_name(out.stem + "_snapshots.csv"), ["event", "n", "probability"],
                         ((k, n, repr(v)) for k, snap in results[0][4] for n, v in sorted(snap.items())))
    derived = {
        "events_blocked": [r[1] for r in results],
        "first_empty_event": [r[2] for r in results],
        "candidates": [r[3] for r in results],
        "replica_seeds": seeds,
    }
    if args.svg:
        curve = None
        if rate.kind == "f_star":
            sol = equilibrium.solve_equilibrium(args.mu, args.nu)
            p_star = equilibrium.equilibrium_distribution(sol, rate, _suggest_window(sol, rate))
            curve = [p_star[n] for n in hist.ns]
            derived["tv_to_equilibrium"] = distance(hist, p_star, "tv")
        Path(args.svg).write_text(plot.bars_with_curve(
            hist.ns, hist.probs, curve, title=f"N={args.agents}, {args.events} exchanges"))
    files.write_json(files.manifest_path(out), files.build_manifest(
        "simulate", argv, {"agents": args.agents, "mu": args.mu, "nu": args.nu, "f": rate.short_name,
                           "events": args.events, "seed": args.seed, "replicas": args.replicas}, **derived))
    return 0


def cmd_ode(args, argv) -> int:
    if args.dt <= 0 or args.t_end <= 0:
        raise InvalidSpecError("--dt and --t-end must be positive")
    rate = RateFunction.parse(args.f)
    params = ModelParams(args.mu, args.nu, None, rate)
    step = args.summary_every
    grid = [round(k * step, 12) for k in range(1, int(args.t_end / step) + 1)] if step > 0 else []
    snaps = sorted(set(args.snapshots))
    traj = meanfield.run_two_phase(params, dt=args.dt, t_end=args.t_end, snapshot_times=sorted(set(grid + snaps)),
                                   window=args.window)
    p_star = None
    if rate.kind == "f_star":
        sol = equilibrium.solve_equilibrium(args.mu, args.nu)
        p_star = equilibrium.equilibrium_distribution(sol, rate, _suggest_window(sol, rate))
    out = Path(args.out)
    keep = set(snaps) | {0.0, traj.t_star, traj.times[-1]}
    sel = [(t, p) for t, p in zip(traj.times, traj.snapshots) if any(abs(t - k) < 1e-9 for k in keep)]
    files.write_trajectory(out, [t for t, _ in sel], [p for _, p in sel])
    rows = []
    for t, p in zip(traj.times, traj.snapshots):
        l2 = distance(p, p_star, "l2") if p_star is not None else float("nan")
        rows.append((repr(t), repr(l2), repr(float(-np.dot(p.ns[p.ns < 0], p.probs[p.ns < 0]))),
                     repr(abs(float(p.probs.sum()) - 1.0))))
    files.write_rows(out.with_name(out.stem + "_summary.csv"),
                     ["t", "l2_to_equilibrium", "debt", "mass_defect"], rows)
    if args.svg and p_star is not None:
        Path(args.svg).write_text(plot.line_chart(
            traj.times, [distance(p, p_star, "l2") for p in traj.snapshots], title="l2 distance to equilibrium",
            ylabel="log10 l2", log_y=True, marker_x=traj.t_star))
    diag = traj.diagnostics
    files.write_json(files.manifest_path(out), files.build_manifest(
        "ode", argv, {"mu": args.mu, "nu": args.nu, "f": rate.short_name, "dt": args.dt,
                      "t_end": args.t_end, "window": list(args.window)},
        t_star=traj.t_star, max_mass_defect=max(diag.mass_defect), max_mean_defect=max(diag.mean_defect),
        boundary_mass=traj.snapshots[-1].boundary_mass()))
    return 0


def cmd_exact(args, argv) -> int:
    rate = RateFunction.parse(args.f)
    table = exact.marginal_table(args.agents, args.money, args.bank, args.method, rate)
    out = Path(args.out)
    files.write_exact_marginal(out, table)
    files.write_json(files.manifest_path(out), files.build_manifest(
        "exact", argv, {"agents": args.agents, "money": args.money, "bank": args.bank,
                        "method": args.method, "f": rate.short_name}, rows=len(table)))
    return 0


def cmd_compare(args, argv) -> int:
    a = files.read_histogram(args.a)
    b = files.read_histogram(args.b)
    value = distance(a, b, args.metric)
    print(repr(value))
    if args.json_out:
        files.write_json(args.json_out, {"a": args.a, "b": args.b, "metric": args.metric, "distance": value})
    return 0


def cmd_replay(args, argv) -> int:
    doc = json.loads(Path(args.manifest).read_text())
    if "manifest" in doc:
        doc = doc["manifest"]
    replay_argv = list(doc["argv"])
    if args.out:
        if "--out" in replay_argv:
            replay_argv[replay_argv.index("--out") + 1] = args.out
        else:
            replay_argv += ["--out", args.out]
    return main(replay_argv)


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "simulate": cmd_simulate,
    "ode": cmd_ode,
    "exact": cmd_exact,
    "compare": cmd_compare,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except (ExchangeLabError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Two-phase mean-field run from a point mass at mu; prints the l2 decay and writes a chart."""
import argparse
from pathlib import Path

from exchange_lab.equilibrium import equilibrium_distribution, solve_equilibrium
from exchange_lab.files import write_rows
from exchange_lab.meanfield import run_two_phase
from exchange_lab.model import ModelParams, debt_level, distance
from exchange_lab.plot import line_chart


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu", type=int, default=1)
    ap.add_argument("--nu", type=int, default=1)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--every", type=float, default=0.5)
    ap.add_argument("--outdir", default="out/meanfield")
    args = ap.parse_args()

    p_star = equilibrium_distribution(solve_equilibrium(args.mu, args.nu))
    grid = [k * args.every for k in range(1, int(args.t_end / args.every) + 1)]
    traj = run_two_phase(ModelParams(args.mu, args.nu), dt=args.dt, t_end=args.t_end, snapshot_times=grid)
    l2 = [distance(p, p_star) for p in traj.snapshots]
    print(f"t* = {traj.t_star:.6f}")
    for t, d, label in zip(traj.times, l2, traj.phase_labels):
        if t in (0.0, traj.t_star) or abs(t % 20) < 1e-9:
            print(f"t={t:8.3f} phase {label:2s} l2={d:.3e}")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_rows(outdir / "l2.csv", ["t", "phase", "l2_to_equilibrium", "debt"],
               ((repr(t), lab, repr(d), repr(debt_level(p)))
                for t, lab, d, p in zip(traj.times, traj.phase_labels, l2, traj.snapshots)))
    (outdir / "l2.svg").write_text(line_chart(traj.times, l2, title="l2 distance to equilibrium",
                                              ylabel="log10 l2", log_y=True, marker_x=traj.t_star))


if __name__ == "__main__":
    main()

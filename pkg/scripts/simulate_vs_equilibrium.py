"""Agent simulation against the mean-field equilibrium (10,000 agents, one dollar each)."""
import argparse
import time
from pathlib import Path

from exchange_lab.agent_sim import run
from exchange_lab.equilibrium import equilibrium_distribution, solve_equilibrium
from exchange_lab.files import write_histogram
from exchange_lab.model import ModelParams, RateFunction, distance
from exchange_lab.plot import bars_with_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--agents", type=int, default=10_000)
    ap.add_argument("--mu", type=int, default=1)
    ap.add_argument("--nu", type=int, default=1)
    ap.add_argument("--events", type=int, default=500_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[7])
    ap.add_argument("--outdir", default="out/simulation")
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    p_star = equilibrium_distribution(solve_equilibrium(args.mu, args.nu))
    write_histogram(outdir / "equilibrium.csv", p_star)
    for seed in args.seeds:
        t0 = time.perf_counter()
        res = run(ModelParams(args.mu, args.nu, args.agents, RateFunction.f_star()), args.events, seed)
        hist = res.histogram
        st = res.final_state
        print(f"seed={seed} tv={distance(hist, p_star, 'tv'):.4f} blocked={st.events_blocked} "
              f"first_empty={st.first_empty_event} ({time.perf_counter() - t0:.2f}s)")
        write_histogram(outdir / f"histogram_seed{seed}.csv", hist)
        view = range(max(hist.window_min, -15), min(hist.window_max, 15) + 1)
        (outdir / f"histogram_seed{seed}.svg").write_text(bars_with_curve(
            view, [hist[n] for n in view], [p_star[n] for n in view],
            title=f"N={args.agents}, {args.events} exchanges, seed {seed}"))


if __name__ == "__main__":
    main()

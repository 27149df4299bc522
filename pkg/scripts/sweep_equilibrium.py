"""Solve the equilibrium over a (mu, nu) grid and report the admissible root count and residuals."""
import argparse

from exchange_lab.equilibrium import roots_in_unit_interval, solve_equilibrium
from exchange_lab.errors import ExchangeLabError


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max", type=int, default=20)
    args = ap.parse_args()

    worst_q, worst_r, failures = 0.0, 0.0, []
    print("mu nu  beta_plus  beta_minus  p0_star  roots_in_(0,1)")
    for mu in range(1, args.max + 1):
        for nu in range(1, args.max + 1):
            try:
                sol = solve_equilibrium(mu, nu)
            except ExchangeLabError as exc:
                failures.append((mu, nu, str(exc)))
                continue
            worst_q = max(worst_q, sol.quartic_residual)
            worst_r = max(worst_r, max(sol.residuals))
            if mu == nu or mu == 1 or nu == 1:
                print(f"{mu:2d} {nu:2d}  {sol.beta_plus:.6f}   {sol.beta_minus:.6f}   {sol.p0_star:.6f}  "
                      f"{len(roots_in_unit_interval(sol.quartic))}")
    print(f"worst quartic residual {worst_q:.2e}, worst constraint residual {worst_r:.2e}")
    for f in failures:
        print("FAILED", *f)


if __name__ == "__main__":
    main()

"""Check the support-capital closed forms against Monte Carlo and print the table.

    python3 scripts/run_mc_verify.py --paths 100000 --steps-per-year 2000
"""
import argparse
import sys
import time

from carrygap.synthetic_lab import mc_verification_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps-per-year", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    start = time.perf_counter()
    rows = mc_verification_table(args.paths, args.steps_per_year, args.seed)
    print(f"{'check':<36}{'target':>11}{'estimate':>11}{'SE':>10}{'z':>7}")
    for r in rows:
        print(f"{r['check']:<36}{r['target']:>11.6f}{r['estimate']:>11.6f}{r['std_error']:>10.1e}"
              f"{r['z']:>7.2f}  {'PASS' if r['pass'] else 'FAIL'}")
    print(f"elapsed {time.perf_counter() - start:.1f} s")
    return 0 if all(r["pass"] for r in rows) else 3


if __name__ == "__main__":
    sys.exit(main())

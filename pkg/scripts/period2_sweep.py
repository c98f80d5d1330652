"""Two-cycles of the map as the egg-laying constant b varies.

Usage: python scripts/period2_sweep.py [--b 10 50 100 200]
"""
import argparse

from mosquito_evo import dynamics as dyn


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--b", type=float, nargs="+", default=[10.0, 50.0, 100.0, 200.0])
    ap.add_argument("--seeds", type=int, default=400)
    args = ap.parse_args()
    for b in args.b:
        q = dyn.BASELINE.replace(b=b)
        cycles = dyn.period2_search(q, n_seeds=args.seeds)
        inside = sum(min(c.v.min(), c.w.min()) >= 0 for c in cycles)
        print(f"b = {b:8.3f}: {len(cycles)} two-cycle(s), {inside} inside the nonnegative cone")
        for c in cycles:
            print(f"    L-coordinates {c.v[1]:.6g} <-> {c.w[1]:.6g}, residual {c.residual:.1e}")


if __name__ == "__main__":
    main()

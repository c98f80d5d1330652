"""Idempotents of the algebra at the origin and at the interior fixed point.

Lists every idempotent found by the chain reduction and by Newton
multistart, with its sign branch and residual.

Usage: python scripts/idempotent_scan.py [--grid N] [--starts N]
"""
import argparse

import numpy as np

from mosquito_evo import algebra as al
from mosquito_evo import dynamics as dyn


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=10**5)
    ap.add_argument("--starts", type=int, default=1000)
    args = ap.parse_args()
    q = dyn.BASELINE
    for label, eps in (("origin", 0.0), ("interior", al.interior_epsilon(q))):
        S = al.structure_matrix(q, eps)
        sols = al.find_idempotents(S, grid_n=args.grid, n_starts=args.starts)
        print(f"== {label} (epsilon = {eps:.10g}): {len(sols)} idempotents")
        for s in sols:
            br = "".join("+" if b else "-" for b in s.branch) if s.branch else "   "
            print(f"  {br}  res {s.residual:.1e}  {'/'.join(s.methods):30s}"
                  f"  {np.array2string(s.element, precision=6)}")


if __name__ == "__main__":
    main()

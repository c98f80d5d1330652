"""Fixed points of the baseline map and their spectra.

Usage: python scripts/baseline_spectra.py
"""
import numpy as np

from mosquito_evo import dynamics as dyn


def main():
    q = dyn.BASELINE
    print(f"egg-cycle product a*b*e*h*p*r*theta = {q.egg_cycle_product:.6g}")
    cf = dyn.fixed_points_closed_form(q)
    for name, L in cf.L_star.items():
        print(f"closed form {name:9s}: L* = {L:.10g}, residual {cf.residuals[name]:.3g}")
    for fp in dyn.fixed_points_newton(q):
        rep = dyn.classify(q, fp.point)
        print()
        print("point   ", np.array2string(fp.point, precision=6))
        print(f"residual {fp.residual:.2e}  in cone {fp.in_cone}  kind {rep.kind.value}"
              f"  stable {rep.stable_dim} / unstable {rep.unstable_dim}")
        for lam in sorted(rep.spectrum.values, key=abs, reverse=True):
            print(f"   lambda = {lam.real:+.10f} {lam.imag:+.10f}i   |lambda| = {abs(lam):.10f}"
                  f"   |lambda|^2 = {abs(lam) ** 2:.10f}")


if __name__ == "__main__":
    main()

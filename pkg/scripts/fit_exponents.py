"""Fitted decay exponents of the lower-order norms on an FLRW (or sigma) run.

    python3 scripts/fit_exponents.py --sigma 0 --k-max 4
"""
import argparse

from kasnerlin.background import KasnerBackground
from kasnerlin.diagnostics import decay_fit, is_pure_log_growth, norm_series
from kasnerlin.gauge_cmc import make_initial_data
from kasnerlin.integrator import IntegratorOptions, integrate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=0.0)
    ap.add_argument("--k-max", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--N", type=int, default=4)
    ap.add_argument("--window", default="1e-7,1e-3")
    args = ap.parse_args()

    lo, hi = (float(x) for x in args.window.split(","))
    bg = KasnerBackground.flrw() if args.sigma == 0 else KasnerBackground.from_sigma(args.sigma)
    traj = integrate(make_initial_data(bg, seed=args.seed, k_max=args.k_max), IntegratorOptions(t_min=lo / 10))
    series = norm_series(traj, args.N)
    print(f"{'quantity':>10} {'power':>8} {'power*log':>10} {'F':>10} {'log?':>5} {'pure log growth':>16}")
    for key, vals in series.items():
        plain = decay_fit(traj.times, vals, (lo, hi))
        fit = decay_fit(traj.times, vals, (lo, hi), with_log=True)
        grow = is_pure_log_growth(fit, traj.times, vals)
        print(f"{key:>10} {plain.exponent:8.4f} {fit.log_exponent:10.4f} {fit.f_ratio:10.3g} "
              f"{str(fit.log_factor_detected):>5} {str(grow):>16}")


if __name__ == "__main__":
    main()

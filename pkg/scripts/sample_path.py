"""One optimal sample path for the reference parameters, as CSV and SVG.

    python3 scripts/sample_path.py [--theta0 10] [--seed 1] [--out out/sample]
"""

import argparse
import os

import numpy as np

from liqfuel.boundary import solve_boundary
from liqfuel.model import load_params
from liqfuel.simulate import SimConfig, simulate_path
from liqfuel.svg import polyline_svg

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--params", default=os.path.join(HERE, "..", "configs", "fig1.json"))
    ap.add_argument("--theta0", type=float, default=10.0)
    ap.add_argument("--y0", type=float, default=0.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="out/sample")
    a = ap.parse_args()

    params, f = load_params(a.params)
    b = solve_boundary(params, f, a.theta0)
    p = simulate_path(params, f, b, a.y0, a.theta0, SimConfig(dt=a.dt, n_paths=1, seed=a.seed), record_every=10)
    os.makedirs(a.out, exist_ok=True)
    p.to_csv(os.path.join(a.out, "path.csv"))
    yb = np.where(p.theta > 0, b(np.clip(p.theta, 0, b.theta_max)), np.nan)
    polyline_svg([("Y_t", p.times, p.Y), ("y(Theta_t)", p.times, yb), ("Theta_t", p.times, p.theta)],
                 os.path.join(a.out, "path.svg"), title=f"sample path, Theta0 = {a.theta0:g}", xlabel="t")
    print(f"opening block {p.delta0:.6f}, liquidated at t = {p.tau:.3f}, proceeds {p.L[-1]:.6f}")


if __name__ == "__main__":
    main()

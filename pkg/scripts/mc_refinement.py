"""Proceeds from the boundary at Theta0 under dt refinement, for both reflection schemes.

    python3 scripts/mc_refinement.py --paths 20000 --dts 1e-2,5e-3,2.5e-3 --out out/refine.json

Prints the estimate, standard error and z-score against the closed form.
"""

import argparse
import json
import os
import time

from liqfuel.boundary import solve_boundary
from liqfuel.model import load_params
from liqfuel.simulate import SimConfig, estimate_proceeds_mc
from liqfuel.value import ValueFunction

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--params", default=os.path.join(HERE, "..", "configs", "fig1.json"))
    ap.add_argument("--theta0", type=float, default=50.0)
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--dts", default="1e-2,5e-3,2.5e-3")
    ap.add_argument("--schemes", default="bridge,project")
    ap.add_argument("--out", default=None)
    a = ap.parse_args()

    params, f = load_params(a.params)
    b = solve_boundary(params, f, a.theta0)
    y = b(a.theta0)
    cf = params.s_bar0 * float(ValueFunction(b).value(y, a.theta0))
    print(f"closed form {cf:.8f}")
    rows = []
    for scheme in a.schemes.split(","):
        for dt in (float(s) for s in a.dts.split(",")):
            t0 = time.time()
            e = estimate_proceeds_mc(params, f, b, y, a.theta0, SimConfig(dt=dt, n_paths=a.paths, scheme=scheme))
            z = (e.estimate - cf) / e.stderr
            rows.append({"scheme": scheme, **e.to_dict(), "z": z, "seconds": time.time() - t0})
            print(f"{scheme:8} dt={dt:<8g} {e.estimate:.6f} +- {e.stderr:.6f}  z={z:+.2f}")
    if a.out:
        os.makedirs(os.path.dirname(a.out) or ".", exist_ok=True)
        with open(a.out, "w") as fh:
            json.dump({"closed_form": cf, "runs": rows}, fh, indent=1)


if __name__ == "__main__":
    main()

"""Tabulate H_{nu-1}^2 / (H_nu H_{nu-2}) for a few negative orders and report monotonicity.

The decrease is an open conjecture; this only prints what the numbers do.
"""

import numpy as np

from liqfuel.special import hermite_quotient_probe

x = np.linspace(-10.0, 10.0, 801)
for nu in (-0.05, -0.1, -0.5, -1.0, -2.0, -5.0):
    r = hermite_quotient_probe(nu, x)
    print(f"nu={nu:6.2f}  decreasing={r.decreasing!s:5}  range [{r.quotient.min():.6f}, {r.quotient.max():.6f}]"
          f"  max step up {r.max_increase:.2e}")

"""Independent high-precision reference values for the reference parameter set.

Everything here uses mpmath only: the Hermite functions, the root finding
for y0 and y_inf, and theta(y) = int_y^{y0} dx / (-y'(x)) with the
closed-form slope.  Output is pasted into tests/test_boundary.py.
"""

import mpmath as mp

mp.mp.dps = 30
DELTA, LAM = mp.mpf("0.1"), mp.mpf(1)


def G(n, y):
    """Phi^(n)/Phi for beta = sigma_hat = 1, rho = 0, so z = -y."""
    c = mp.mpf(1)
    for k in range(n):
        c *= 2 * (DELTA + k)
    nu = -DELTA
    return c * mp.hermite(nu - n, -y) / mp.hermite(nu, -y)


def slope(y):
    g1, g2, g3 = G(1, y), G(2, y), G(3, y)
    t1 = g1 * g1 - g2
    t2 = g1 * g2 - g3
    return (LAM * g1 - g2) * t1 / ((g2 - LAM * LAM) * t1 - (g1 - LAM) * t2)


def main():
    y0 = mp.findroot(lambda y: LAM - G(1, y), 1.25)
    y_inf = mp.findroot(lambda y: LAM - G(2, y) / G(1, y), -0.3)
    print("y0", mp.nstr(y0, 20))
    print("y_inf", mp.nstr(y_inf, 20))
    for y in ("1.0", "0.5", "0.0", "-0.2", "-0.3"):
        th = mp.quad(lambda x: -1 / slope(x), [mp.mpf(y), y0])
        print("theta", y, mp.nstr(th, 20))


if __name__ == "__main__":
    main()

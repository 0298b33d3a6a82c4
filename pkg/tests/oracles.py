"""Independent reference computations used only by the tests."""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss


def coulomb_double_integral(f, rmax: float, nodes: int = 128) -> float:
    """D = 2 (4 pi)^2 int_0^R r f(r)^2 int_0^r s^2 f(s)^2 ds dr by Gauss-Legendre.

    Splitting the kernel 1/max(r, s) along the diagonal leaves smooth
    integrands on each triangle, so both nested rules converge spectrally.
    """
    x, w = leggauss(nodes)
    ro = (x + 1) * rmax / 2
    wo = w * rmax / 2
    si = (x[None, :] + 1) * ro[:, None] / 2
    wi = w[None, :] * ro[:, None] / 2
    inner = np.sum(wi * si ** 2 * f(si) ** 2, axis=1)
    return 2 * (4 * math.pi) ** 2 * float(np.sum(wo * ro * f(ro) ** 2 * inner))


def random_bumps(rng):
    """A smooth radial function as a closure: three polynomial-times-Gaussian bumps."""
    a = rng.uniform(0.5, 1.5, 3)
    b = rng.uniform(-1.0, 1.0, 3)
    s = rng.uniform(0.8, 2.0, 3)

    def f(r):
        return sum(ai * np.exp(-(r / si) ** 2) * (1 + bi * r ** 2 / si ** 2)
                   for ai, bi, si in zip(a, b, s))

    return f


def gaussian_l4_power(sigma: float) -> float:
    """int u^4 for the unit-mass Gaussian of width sigma."""
    return (2 * math.pi) ** -1.5 / sigma ** 3

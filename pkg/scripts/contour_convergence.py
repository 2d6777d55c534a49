"""Node-count sweep for the contour quadrature against the eigen-oracle.

Prints the relative error of (I + A)^z f as the number of nodes grows, for a
non-normal synthetic operator and a few exponents, including one close to -1.
"""

import warnings

import numpy as np

from slipstokes.contour import DunfordContour, TruncationWarning, dunford_apply
from slipstokes.operator_core import build_synthetic, eigen_oracle_apply


def main():
    eigs = np.geomspace(1, 1e4, 60) * np.exp(0.6j * np.linspace(-1, 1, 60))
    A = build_synthetic(eigs, 30.0, seed=2)
    f = np.random.default_rng(0).standard_normal(60) + 0j
    nodes = (50, 100, 200, 400, 800)
    print("z".ljust(14) + "".join(f"{n:>11d}" for n in nodes))
    for z in (-0.5, -0.25, -0.75, -0.999, -0.3 + 2j):
        exact = eigen_oracle_apply(A, lambda lam: (1 + lam) ** z, f)
        base = DunfordContour.for_spectrum(1 + eigs, z)
        errs = []
        for n in nodes:
            c = DunfordContour(base.theta0, n, base.u_min, base.u_max)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                approx = dunford_apply(A, z, f, c)
            errs.append(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
        print(f"{str(z):14s}" + "".join(f"{e:11.2e}" for e in errs))


if __name__ == "__main__":
    main()

"""Log-log smoothing slopes of the slip Stokes semigroup on a broadband datum."""

import time

from slipstokes.operator_core import build_box_stokes
from slipstokes.semigroup import broadband_initial, smoothing_rate


def main():
    t0 = time.perf_counter()
    s2 = build_box_stokes(2, 120, 242)
    u2 = broadband_initial(s2)
    s3 = build_box_stokes(3, 82, 166)
    u3 = broadband_initial(s3)
    cases = [
        ("2D |d/dt T(t)u0|", smoothing_rate(s2, u2, "dt"), -1.0),
        ("2D |strain T(t)u0|", smoothing_rate(s2, u2, "strain"), -0.5),
        ("3D L2 -> L6", smoothing_rate(s3, u3, "lp", 2.0, 6.0), -0.5),
    ]
    for name, fit, expected in cases:
        print(f"{name:22s} slope {fit.slope:+.3f} (expected {expected:+.3f})  decay {fit.delta:.3f}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

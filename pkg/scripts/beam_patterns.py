"""Horizontal directivity of a first-order cardioid and of steered higher-order beams.

    python3 scripts/beam_patterns.py --orders 1 3 5 --step 15
"""

import argparse
import math

import numpy as np

from ambikit.sh import Direction, degrees_of, sh_synthesis, sh_vector


def cardioid(azimuth):
    return sh_synthesis(np.array([1.0, 1.0, 0.0, 0.0]), azimuth, np.zeros_like(azimuth))


def steered_beam(order, look, azimuth):
    """Plane wave from ``look`` decoded by sampling, normalized to 1 on axis."""
    coeffs = sh_vector(look, order) * (2 * degrees_of(order) + 1)
    pattern = sh_synthesis(coeffs, azimuth, np.zeros_like(azimuth))
    return pattern / (order + 1) ** 2


def summary(pattern, azimuth):
    peak = math.degrees(azimuth[np.argmax(pattern)])
    front = pattern[np.argmin(np.abs(azimuth - math.pi / 2))]
    back = pattern[np.argmin(np.abs(azimuth + math.pi / 2))]
    fb = math.inf if abs(back) < 1e-12 else 20 * math.log10(abs(front) / abs(back))
    return peak, fb


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 3, 5])
    ap.add_argument("--step", type=float, default=15.0, help="table step in degrees")
    args = ap.parse_args()

    fine = np.radians(np.arange(-180, 180, 0.5))
    look = Direction(math.pi / 2, 0)
    patterns = {"cardioid": cardioid(fine)}
    patterns.update({f"beam N={n}": steered_beam(n, look, fine) for n in args.orders})
    for name, pat in patterns.items():
        peak, fb = summary(pat, fine)
        print(f"{name:<12} peak at {peak:6.1f} deg, front/back {fb:6.1f} dB")

    coarse = np.radians(np.arange(-180, 180, args.step))
    print()
    print(f"{'az':>6} " + " ".join(f"{k:>11}" for k in patterns))
    table = {"cardioid": cardioid(coarse)}
    table.update({f"beam N={n}": steered_beam(n, look, coarse) for n in args.orders})
    for i, a in enumerate(coarse):
        print(f"{math.degrees(a):6.0f} " + " ".join(f"{table[k][i]:11.3f}" for k in table))


if __name__ == "__main__":
    main()

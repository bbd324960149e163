"""Sweet-area radius versus order for a ring of loudspeakers.

Prints one row per (method, weighting) with the radius, as a fraction of the
array radius, inside which the mean rE direction error stays below the threshold.

    python3 scripts/sweet_area.py --speakers 8 --orders 1 2 3
"""

import argparse
import json
import math

from ambikit.decode import SpeakerLayout, analyze_decoder, build_decoder, position_grid, sweet_area_radius
from ambikit.sh import Direction

CONFIGS = [
    ("projection", None),
    ("projection", "max-re"),
    ("mode-matching", None),
    ("mode-matching", "max-re"),
    ("allrad", None),
    ("allrad", "max-re"),
]


def sweet_area_table(speakers=8, orders=(1, 2, 3), grid=40, sources=72, threshold=30.0):
    layout = SpeakerLayout.circle(speakers)
    pts = position_grid(layout, grid)
    dirs = [Direction(2 * math.pi * k / sources) for k in range(sources)]
    rows = []
    for method, weights in CONFIGS:
        radii = []
        for order in orders:
            dec = build_decoder(layout, order, method, weights)
            radii.append(sweet_area_radius(analyze_decoder(dec, layout, dirs, pts), threshold))
        rows.append({"method": method, "weights": weights or "none", "radii": radii})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--speakers", type=int, default=8)
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--grid", type=int, default=40)
    ap.add_argument("--sources", type=int, default=72)
    ap.add_argument("--threshold", type=float, default=30.0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rows = sweet_area_table(args.speakers, args.orders, args.grid, args.sources, args.threshold)
    if args.json:
        print(json.dumps({"orders": args.orders, "rows": rows}, indent=2))
        return
    head = " ".join(f"N={n:<5d}" for n in args.orders)
    print(f"{'method':<14} {'weights':<7} {head}")
    for row in rows:
        print(f"{row['method']:<14} {row['weights']:<7} " + " ".join(f"{r:<7.3f}" for r in row["radii"]))


if __name__ == "__main__":
    main()

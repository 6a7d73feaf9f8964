"""Compare the substitution regimes at a right-angle intersection.

A through vehicle (orange, eastbound) meets a crossing vehicle (green,
northbound) whose recording stops short of the junction and then darts
across exactly into orange's path:

  (a) replay  -- the dart is executed blindly and the vehicles collide.
  (b) idm     -- green follows its recorded path but adjusts speed; it
                 creeps through the junction long after orange has passed,
                 so its post-encroachment time is infinite.
  (c) frenet  -- green plans interactively and crosses briskly ahead of or
                 behind orange, with a short encroachment time and a finite
                 post-encroachment time.

Usage: python3 demos/intersection_regimes.py
"""

import math

from drivesim.cli import build_run, load_run_config
from drivesim.engine import run
from drivesim.metrics import evaluate


def fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.2f}"
    return str(v)


def main():
    rows = []
    for regime in ("replay", "idm", "frenet"):
        doc = load_run_config(f"intersection_{regime}")
        scenario, bindings, sim_cfg, predictor, metric_cfg, _ = build_run(doc)
        result = run(scenario, bindings, sim_cfg, predictor)
        report = evaluate(result, scenario, metric_cfg)
        agg = report.aggregates["green"]
        rows.append((regime, agg["collided"], agg["et"], agg["pet"],
                     agg["min_ttc"], agg["status"]))

    header = ("regime", "collided", "ET [s]", "PET [s]", "min TTC", "status")
    widths = [9, 9, 8, 8, 9, 16]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(fmt(v).ljust(w) for v, w in zip(row, widths)))


if __name__ == "__main__":
    main()

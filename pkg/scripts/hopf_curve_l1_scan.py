#!/usr/bin/env python3
"""Trace the primary Hopf curve of the position-control model with L1.

Continues the curve in (tau0, s0), monitoring the first Lyapunov
coefficient, and writes one CSV row per accepted point (plus flagged
L1_ZERO events) to stdout or a file given as the first argument.
"""

import sys
import warnings
from pathlib import Path

import numpy as np

from sddde import StepSettings, continue_hopf_curve, load_model

ROOT = Path(__file__).resolve().parents[1]


def main():
    model = load_model(ROOT / "models" / "position_control.mdl")
    start = {"tau0": 1.036, "s0": 5.0, "k": 1.0, "c": 2.0, "gamma": 1.0}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        points = continue_hopf_curve(
            model,
            start,
            ("tau0", "s0"),
            np.array([5.0, 5.0]),
            omega_guess=np.pi / (2 * start["tau0"] + start["s0"]),
            step=StepSettings(initial=0.3, max_points=8, max_step=0.5),
            monitor_l1=True,
        )

    out = open(sys.argv[1], "w") if len(sys.argv) > 1 else sys.stdout
    out.write("tau0,s0,omega,L1,event\n")
    for pt in points:
        out.write(
            f"{pt.params[0]:.12g},{pt.params[1]:.12g},{pt.omega:.12g},"
            f"{pt.L1:.12g},{pt.event or ''}\n"
        )
    if out is not sys.stdout:
        out.close()
    zeros = [pt for pt in points if pt.event == "L1_ZERO"]
    for pt in zeros:
        print(
            f"# degenerate Hopf (Bautin candidate) at tau0={pt.params[0]:.6f}, "
            f"s0={pt.params[1]:.6f}",
            file=sys.stderr,
        )


if __name__ == "__main__":
    main()

"""Uncontrolled oscillator from x(0) = (0.1, 0) for 100 s.

Prints the state bound and the spread of the stroboscopic samples taken
once per forcing period over the second half of the run.
Usage: python scripts/free_run.py [full]
"""

import math
import sys

import numpy as np

from t2stc.plant import duffing_preset, unforced
from t2stc.sim import free_run


def main(variant="nominal"):
    plant = duffing_preset() if variant == "full" else unforced(duffing_preset())
    h = 1e-3
    t, x = free_run(plant, (0.1, 0.0), 100.0, h)
    period = 2 * math.pi / 1.8
    k = np.round(np.arange(50.0, 100.0, period) / h).astype(int)
    section = x[k]
    print(f"plant: {plant.name}  max|x| {np.abs(x).max():.4f}")
    print(f"section samples {len(section)}  spread x1 {np.ptp(section[:, 0]):.3g}  "
          f"x2 {np.ptp(section[:, 1]):.3g}")


if __name__ == "__main__":
    main(*sys.argv[1:2])

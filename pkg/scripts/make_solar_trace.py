"""Regenerate the bundled one-day solar trace (synthetic, seeded).

The shape mimics a single harvesting mote over 24 hours of 60-second slots:
a clear-sky bell between 06:00 and 18:00 attenuated by a two-state cloud
process. Run from the repository root:

    python scripts/make_solar_trace.py src/odc/data/solar_day.csv
"""

import argparse
import csv

import numpy as np

SLOTS = 1440
SUNRISE, SUNSET = 360, 1080
PEAK_LUX = 60000.0
PEAK_MA = 80.0


def generate(seed: int = 20091):
    rng = np.random.default_rng(seed)
    t = np.arange(SLOTS)
    phase = np.clip((t - SUNRISE) / (SUNSET - SUNRISE), 0.0, 1.0)
    clear = np.where((t >= SUNRISE) & (t <= SUNSET), np.sin(np.pi * phase) ** 1.5, 0.0)
    cloudy = np.zeros(SLOTS, dtype=bool)
    state = False
    for i in range(SLOTS):
        # clouds arrive rarely and linger for tens of minutes
        state = rng.random() < (0.97 if state else 0.01)
        cloudy[i] = state
    attenuation = np.where(cloudy, 0.3, 1.0) * rng.uniform(0.95, 1.05, SLOTS)
    lux = np.round(PEAK_LUX * clear * attenuation, 1)
    harvest = np.round(PEAK_MA * lux / PEAK_LUX, 3)
    return t, harvest, lux


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=20091)
    args = ap.parse_args()
    t, harvest, lux = generate(args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "harvest_ma", "lux"])
        for row in zip(t, harvest, lux):
            w.writerow([int(row[0]), f"{row[1]:.3f}", f"{row[2]:.1f}"])


if __name__ == "__main__":
    main()

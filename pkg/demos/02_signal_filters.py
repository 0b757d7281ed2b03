"""Filter comparison on a noisy RSSI stream.

A constant-level stream with Gaussian noise plus a few dropout spikes runs
through the moving-average, median, Gaussian, and Kalman filters. The
median filter is the only one that removes the spikes without smearing
them; the Kalman filter converges to the level and stays there.
"""

import pathlib

import numpy as np

import rssiloc as rl
from rssiloc.filters import (gaussian_filter, kalman_filter, median_filter,
                             moving_average)

OUT = pathlib.Path(__file__).resolve().parent / "demo_output"
OUT.mkdir(exist_ok=True)


def main():
    rng = np.random.default_rng(3)
    n = 400
    stream = -62.0 + rng.normal(0.0, 2.0, n)
    spikes = rng.choice(n, size=6, replace=False)
    stream[spikes] = -200.0  # out-of-range dropouts

    outputs = {
        "raw": stream,
        "moving_average_5": moving_average(stream, 5),
        "median_halfwidth_2": median_filter(stream, 2),
        "gaussian_sigma_1": gaussian_filter(stream, 1.0),
        "kalman": kalman_filter(stream),
    }
    rl.write_csv(outputs, OUT / "filtered_stream.csv")

    clean = np.delete(stream, spikes)
    print(f"{'filter':<22}{'variance':>12}{'worst spike residue':>22}")
    for name, series in outputs.items():
        residue = max(abs(series[i] + 62.0) for i in spikes)
        print(f"{name:<22}{np.delete(series, spikes).var():>12.3f}"
              f"{residue:>22.2f}")
    print(f"\nraw variance away from spikes: {clean.var():.3f}")
    print(f"series written to {OUT / 'filtered_stream.csv'}")


if __name__ == "__main__":
    main()

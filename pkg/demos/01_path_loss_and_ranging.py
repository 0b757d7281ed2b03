"""Radio model walkthrough: RSSI from distance and back again.

Shows the log-distance mean model, what shadowing noise does to the
inverted distance estimate, and why squared-distance estimates are biased
upward (the effect the bias-compensated solver corrects). Writes the
plotted series to demo_output/ as CSV so any plotting tool can render it.
"""

import math
import pathlib

import numpy as np

import rssiloc as rl

OUT = pathlib.Path(__file__).resolve().parent / "demo_output"
OUT.mkdir(exist_ok=True)


def main():
    params = rl.PathLossParams(p0=-40.0, d0=100.0, eta=2.2, sigma_shadow=2.0)
    print(f"model: p0={params.p0} dBm at {params.d0} cm, eta={params.eta}, "
          f"shadowing {params.sigma_shadow} dB\n")

    distances = np.linspace(50.0, 2000.0, 60)
    mean_rssi = rl.rssi_from_distance(distances, params)
    rl.write_csv({"distance_cm": distances, "rssi_dbm": mean_rssi},
                 OUT / "path_loss_curve.csv")
    print("mean RSSI at 0.5 m / 5 m / 20 m:",
          " / ".join(f"{rl.rssi_from_distance(rl.meters(m), params):.1f} dBm"
                     for m in (0.5, 5.0, 20.0)))

    # invert a noisy reading: each dB of shadowing multiplies the distance
    # estimate by a lognormal factor
    rng = np.random.default_rng(1)
    true_d = rl.meters(7.0)
    noisy = rl.rssi_from_distance(true_d, params) + rng.normal(0, 2.0, 20000)
    d_hat = rl.distance_from_rssi(noisy, params)
    u = math.log(10.0) / (5.0 * math.sqrt(2.0) * params.eta)
    predicted_inflation = math.exp(u ** 2 * params.sigma_shadow ** 2)
    print(f"\ntrue distance        : {true_d:8.1f} cm")
    print(f"mean estimate        : {d_hat.mean():8.1f} cm")
    print(f"mean squared estimate: {np.mean(d_hat ** 2):12.0f} cm^2")
    print(f"true squared         : {true_d ** 2:12.0f} cm^2")
    print(f"inflation factor     : measured {np.mean(d_hat**2) / true_d**2:.4f}, "
          f"lognormal theory {predicted_inflation:.4f}")

    # synthetic measurement trials against a 3-anchor scene
    scene = rl.Scene([rl.Anchor("A1", rl.Position(0, 0)),
                      rl.Anchor("A2", rl.Position(400, 0)),
                      rl.Anchor("A3", rl.Position(200, 300))])
    trials = rl.synthesize_measurements(scene, rl.Position(120, 90), params,
                                        rl.NoiseSpec(sigma_p=2.0, seed=7), 5)
    print("\nfive synthetic trials against a 3-anchor scene (dBm):")
    for _, measurement in trials:
        print("  ", np.round(measurement.values(), 2))


if __name__ == "__main__":
    main()

"""Handover frequency vs UE speed for both clustering strategies.

Reproduces the handover-frequency experiment at desk scale: fixed and
opportunistic clustering at 2 dB and 3 dB hysteresis across walking to highway
speeds. Fixed clustering tracks the summed cluster gain, which moves slower
than any single link, so it hands over less often than the opportunistic
strategy at the same threshold; both climb with speed and fall with threshold.
"""

import numpy as np

from cfmimo.clustering import HandoverConfig
from cfmimo.config import SimConfig
from cfmimo.geometry import DeploymentConfig
from cfmimo.simulate import run_campaign

SPEEDS_KMH = [3.0, 30.0, 60.0, 120.0]
THRESHOLDS_DB = [2.0, 3.0]
SETUPS = 5


def main():
    cfg = SimConfig(
        deployment=DeploymentConfig(1000.0, 16, 4, 4, 10),
        handover=HandoverConfig("fixed", 2.0, 8, 10),
        n_setups=SETUPS,
        n_mc=100,
        sim_time_s=10.0,
        seed=7,
        speeds_kmh=tuple(SPEEDS_KMH),
    )
    print(f"sweeping 2 strategies x {len(THRESHOLDS_DB)} thresholds x {len(SPEEDS_KMH)} speeds, "
          f"{SETUPS} setups each ...")
    result = run_campaign(
        cfg, strategies=["fixed", "opportunistic"], thresholds=THRESHOLDS_DB, speeds=SPEEDS_KMH
    )
    with open("handover_frequency.csv", "w", encoding="utf-8") as fh:
        fh.write(result.to_csv())
    print("wrote handover_frequency.csv\n")

    header = "speed[km/h] " + "".join(
        f"{s[:5]}({t:g}dB) " for s in ("fixed", "opportunistic") for t in THRESHOLDS_DB
    )
    print(header)
    for speed in SPEEDS_KMH:
        cells = [
            result.row(strategy, threshold, speed).ho_freq
            for strategy in ("fixed", "opportunistic")
            for threshold in THRESHOLDS_DB
        ]
        print(f"{speed:11.0f} " + "".join(f"{v:11.3f} " for v in cells))

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        x = np.arange(len(SPEEDS_KMH))
        width = 0.2
        fig, ax = plt.subplots(figsize=(7, 4))
        for i, (strategy, threshold) in enumerate(
            (s, t) for s in ("fixed", "opportunistic") for t in THRESHOLDS_DB
        ):
            values = [result.row(strategy, threshold, sp).ho_freq for sp in SPEEDS_KMH]
            ax.bar(x + (i - 1.5) * width, values, width, label=f"{strategy} ({threshold:g} dB)")
        ax.set_xticks(x, [f"{s:g}" for s in SPEEDS_KMH])
        ax.set_xlabel("UE speed [km/h]")
        ax.set_ylabel("handover frequency [1/s]")
        ax.legend()
        fig.tight_layout()
        fig.savefig("handover_frequency.png", dpi=120)
        print("\nwrote handover_frequency.png")
    except ImportError:
        pass


if __name__ == "__main__":
    main()

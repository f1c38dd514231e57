"""Mean spectral efficiency vs UE speed for all four serving strategies.

Desk-scale version of the mobility benchmark: ubiquitous service (every O-RU
serves every UE) as the upper bound, single-O-DU cellular service as the lower
bound, and the fixed/opportunistic user-centric clusters in between. All sweep
cells replay the same setups, so curves are directly comparable point by point.
"""

from cfmimo.clustering import HandoverConfig
from cfmimo.config import SimConfig
from cfmimo.geometry import DeploymentConfig
from cfmimo.simulate import run_campaign

SPEEDS_KMH = [3.0, 30.0, 60.0, 120.0]
THRESHOLD_DB = 2.0
SETUPS = 5


def main():
    cfg = SimConfig(
        deployment=DeploymentConfig(1000.0, 16, 4, 4, 10),
        handover=HandoverConfig("fixed", THRESHOLD_DB, 8, 10),
        n_setups=SETUPS,
        n_mc=100,
        sim_time_s=10.0,
        seed=7,
        speeds_kmh=tuple(SPEEDS_KMH),
    )
    strategies = ["ubiquitous", "fixed", "opportunistic", "cellular"]
    print(f"sweeping {strategies} over speeds {SPEEDS_KMH}, {SETUPS} setups each ...")
    result = run_campaign(cfg, strategies=strategies, thresholds=[THRESHOLD_DB], speeds=SPEEDS_KMH)
    with open("se_vs_speed.csv", "w", encoding="utf-8") as fh:
        fh.write(result.to_csv())
    print("wrote se_vs_speed.csv\n")

    print("mean SE [bit/s/Hz]")
    print("speed[km/h] " + "".join(f"{s[:13]:>14s}" for s in strategies))
    for speed in SPEEDS_KMH:
        row = [result.row(s, speed_kmh=speed).mean_se for s in strategies]
        print(f"{speed:11.0f} " + "".join(f"{v:14.3f}" for v in row))

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 4))
        for strategy in strategies:
            values = [result.row(strategy, speed_kmh=sp).mean_se for sp in SPEEDS_KMH]
            ax.plot(SPEEDS_KMH, values, marker="o", label=strategy)
        ax.set_xlabel("UE speed [km/h]")
        ax.set_ylabel("mean SE [bit/s/Hz]")
        ax.grid(True, ls="--", alpha=0.4)
        ax.legend()
        fig.tight_layout()
        fig.savefig("se_vs_speed.png", dpi=120)
        print("\nwrote se_vs_speed.png")
    except ImportError:
        pass


if __name__ == "__main__":
    main()

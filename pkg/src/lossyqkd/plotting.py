"""Figure rendering for the report-producing commands.

Each CSV-writing command renders a companion PNG next to its delimited
output. The Agg backend keeps rendering headless and byte-stable for a given
matplotlib version, which the run manifests rely on.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

FIG_SIZE = (6.4, 4.0)
FIG_DPI = 150


def tradeoff_figure(rows: list[dict]):
    """Leakage versus disturbance cap for one sweep."""
    feasible = [r for r in rows if r["feasible"]]
    caps = [r["qber_cap"] for r in feasible]
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(caps, [r["i_holevo"] for r in feasible], "o-", label="Holevo bound")
    ax.plot(caps, [r["p_guess"] for r in feasible], "s--", label="guessing probability")
    infeasible = [r["qber_cap"] for r in rows if not r["feasible"]]
    for cap in infeasible:
        ax.axvline(cap, color="crimson", alpha=0.3, linestyle=":")
    ax.set_xlabel("disturbance cap")
    ax.set_ylabel("Eve's information")
    ax.set_title("Attack information vs disturbance")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def usd_figure(rows: list[dict], eta_star: float):
    """Known-bit coverage and shortfall across the transmittance grid."""
    etas = [r["eta"] for r in rows]
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(etas, [r["eve_fraction_known"] for r in rows], "o-", label="fraction of throughput known")
    ax.plot(etas, [r["shortfall"] for r in rows], "s--", label="throughput shortfall")
    ax.axvline(eta_star, color="gray", linestyle=":", label=f"threshold eta* = {eta_star:.5f}")
    ax.set_xlabel("transmittance")
    ax.set_ylabel("fraction")
    ax.set_title("Unambiguous-discrimination re-send coverage")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> None:
    # Suppress the version-stamp text chunk so bytes survive upgrades.
    fig.savefig(path, dpi=FIG_DPI, metadata={"Software": None})
    plt.close(fig)

"""Figure rendering for the CLI reports.

Each command gets one PNG next to its delimited output.  The Agg backend is
forced before pyplot loads so headless runs never touch a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_curvature_sweep(rows, path, parameter: str, log_x: bool = False) -> None:
    xs = [row["parameter"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xs, [row["mu"] for row in rows], label="mu", marker=".")
    ax.plot(xs, [row["kappa"] for row in rows], label="kappa", marker=".")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(parameter)
    ax.set_ylabel("curvature bound")
    ax.legend()
    _save(fig, path)


def plot_pair_report(rows, path) -> None:
    idx = range(len(rows))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.4
    ax.bar([i - width / 2 for i in idx], [r["price_move"] for r in rows],
           width=width, label="price move")
    ax.bar([i + width / 2 for i in idx], [r["bound"] for r in rows],
           width=width, label="bound")
    ax.set_xlabel("scenario")
    ax.set_ylabel("quote gap after arbitrage")
    ax.set_xticks(list(idx))
    ax.legend()
    _save(fig, path)


def plot_trajectory(rows, path) -> None:
    ts = [r["round"] for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    top.plot(ts, [r["m0_e"] for r in rows], label="external quote")
    top.plot(ts, [r["m0_s"] for r in rows], label="secondary quote")
    top.plot(ts, [r["m_a"] for r in rows], label="settled price", ls="--")
    top.set_ylabel("price")
    top.legend()
    bottom.bar(ts, [r["delta_star"] for r in rows])
    bottom.set_xlabel("round")
    bottom.set_ylabel("arbitrage size")
    _save(fig, path)


def plot_game_report(deltas, values, optimum, lower_bound, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(deltas, values, label="expected edge value")
    ax.axhline(lower_bound, ls="--", color="gray", label="closed-form floor")
    ax.plot([optimum.delta_opt], [optimum.value], "o", label="optimum")
    ax.set_xlabel("trade size")
    ax.set_ylabel("E_V")
    ax.legend()
    _save(fig, path)


def plot_subsidy_pair(row, path) -> None:
    labels = ["realized cost", "subsidy", "slack"]
    heights = [row["realized_cost"], row["subsidy_numeraire"], row["slack"]]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(labels, heights)
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_ylabel("numeraire value")
    _save(fig, path)


def plot_subsidy_schedule(rows, path) -> None:
    ts = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(ts, [r["excess_loss"] for r in rows], label="per-trade excess loss")
    ax.plot(ts, [r["cumulative"] for r in rows], color="black", marker=".",
            label="cumulative")
    ax.set_xlabel("trade index")
    ax.set_ylabel("traded-coin value")
    ax.legend()
    _save(fig, path)


def plot_greeks_sweep(rows, path) -> None:
    ms = [r["m"] for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    top.plot(ms, [r["p_v"] for r in rows], label="P_V")
    top.plot(ms, [r["p_delta"] for r in rows], label="P_delta")
    top.set_ylabel("value / delta")
    top.legend()
    bottom.plot(ms, [r["p_gamma"] for r in rows], color="tab:red")
    bottom.set_xlabel("price")
    bottom.set_ylabel("P_gamma")
    _save(fig, path)

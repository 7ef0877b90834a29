"""Figure rendering for run, comparison, and sweep outputs.

Every function writes a PNG next to the delimited output and returns the
path.  The Agg backend is forced so reports render identically on headless
machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .energy import EnergyLedger

_POLICY_STYLE = {
    "bfs": dict(color="tab:green", marker="s"),
    "h2rma": dict(color="tab:blue", marker="o"),
    "random": dict(color="tab:red", marker="^"),
}


def _style(policy: str) -> dict:
    return _POLICY_STYLE.get(policy, dict(color="tab:gray", marker="x"))


def plot_run(ledger: EnergyLedger, theta_log: np.ndarray, out_path: str | Path) -> Path:
    """Battery level, transfer budget, and divergence over the frame horizon."""
    out_path = Path(out_path)
    frames = np.arange(1, ledger.battery.shape[0] + 1)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.4))
    axes[0].plot(frames, ledger.battery.mean(axis=1), color="tab:blue", label="mean battery (J)")
    axes[0].plot(frames, ledger.e_wet.sum(axis=1), color="tab:orange", label="total WET budget (J)")
    axes[0].set_xlabel("frame")
    axes[0].set_ylabel("energy (J)")
    axes[0].legend()
    axes[0].grid(alpha=0.3)
    axes[1].plot(frames, theta_log, color="tab:purple")
    axes[1].set_xlabel("frame")
    axes[1].set_ylabel("class-mix divergence")
    axes[1].grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_accuracy(curves: dict[str, np.ndarray], out_path: str | Path) -> Path:
    """Mean test accuracy per round, one curve per policy."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for policy, curve in curves.items():
        rounds = np.arange(1, len(curve) + 1)
        ax.plot(rounds, curve, label=policy, **_style(policy), markevery=max(1, len(curve) // 10))
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_sweep(agg_rows: list[dict], param: str, out_path: str | Path) -> Path:
    """Mean weighted energy cost against the swept parameter, per policy."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    policies = sorted({r["policy"] for r in agg_rows}, key=lambda p: list(_POLICY_STYLE).index(p) if p in _POLICY_STYLE else 99)
    for policy in policies:
        rows = sorted((r for r in agg_rows if r["policy"] == policy), key=lambda r: float(r["value"]))
        xs = [float(r["value"]) for r in rows]
        ys = [r["mean_delta"] for r in rows]
        err = [r["std_delta"] for r in rows]
        ax.errorbar(xs, ys, yerr=err, label=policy, capsize=3, **_style(policy))
    ax.set_xlabel(param)
    ax.set_ylabel("weighted energy cost (J)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path

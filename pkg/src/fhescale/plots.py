"""Figure rendering from the emitted CSVs.

Plotting is decoupled from training: every figure is derived purely from
step_metrics.csv / episode_metrics.csv, so runs can be re-plotted any
time without touching the simulator. Output is vector SVG.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import EPISODE_CSV, read_episode_csv  # noqa: E402

FIGURES = (
    "replica_selection.svg",
    "reward_per_episode.svg",
    "latency_per_episode.svg",
    "replicas_per_episode.svg",
)


def plot_replica_selection(records, path) -> None:
    """Mean reward and latency per episode, grouped by rounded mean replicas."""
    groups = defaultdict(list)
    for rec in records:
        groups[int(round(rec.mean_replicas))].append(rec)
    keys = sorted(groups)
    rewards = [sum(r.mean_reward for r in groups[k]) / len(groups[k]) for k in keys]
    latencies = [sum(r.mean_latency_s for r in groups[k]) / len(groups[k])
                 for k in keys]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.bar(keys, rewards, color="tab:blue")
    ax1.set_xlabel("mean replicas (rounded)")
    ax1.set_ylabel("mean reward")
    ax1.set_title("Reward by replica group")
    ax2.bar(keys, latencies, color="tab:orange")
    ax2.set_xlabel("mean replicas (rounded)")
    ax2.set_ylabel("mean latency (s)")
    ax2.set_title("Latency by replica group")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_series(records, attr, ylabel, title, path, color):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot([r.episode for r in records], [getattr(r, attr) for r in records],
            color=color, linewidth=1.2)
    ax.set_xlabel("episode")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_figures(metrics_dir, out_dir=None) -> list:
    """Render all four figures next to (or instead near) the CSVs."""
    metrics_dir = Path(metrics_dir)
    out_dir = Path(out_dir) if out_dir is not None else metrics_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    records = read_episode_csv(metrics_dir / EPISODE_CSV)
    if not records:
        raise ValueError("no episode records to plot")

    paths = [out_dir / name for name in FIGURES]
    plot_replica_selection(records, paths[0])
    _plot_series(records, "mean_reward", "mean reward", "Reward per episode",
                 paths[1], "tab:blue")
    _plot_series(records, "mean_latency_s", "mean latency (s)",
                 "Latency per episode", paths[2], "tab:orange")
    _plot_series(records, "mean_replicas", "mean replicas",
                 "Replicas per episode", paths[3], "tab:green")
    return paths

"""CSV emission for training runs. Schemas are fixed and versioned.

Floats are written with repr precision so reruns with the same seed
produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STEP_HEADER = ("episode,step,action,response_time_s,pod_count,replica_target,"
               "reward_base,penalty_stress,penalty_resource,heal_penalty,"
               "reward_total")
EPISODE_HEADER = ("episode,steps,mean_reward,mean_latency_s,mean_replicas,"
                  "mean_pods,stress_failures")

STEP_CSV = "step_metrics.csv"
EPISODE_CSV = "episode_metrics.csv"


@dataclass(frozen=True)
class StepRecord:
    episode: int
    step: int
    action: int
    response_time_s: float
    pod_count: int
    replica_target: int
    reward_base: float
    penalty_stress: float
    penalty_resource: float
    heal_penalty: float
    reward_total: float


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    steps: int
    mean_reward: float
    mean_latency_s: float
    mean_replicas: float
    mean_pods: float
    stress_failures: int


def step_record(episode: int, action: int, breakdown, info) -> StepRecord:
    return StepRecord(
        episode=episode,
        step=info["step"],
        action=action,
        response_time_s=info["response_time_s"],
        pod_count=info["pod_count"],
        replica_target=info["replica_target"],
        reward_base=breakdown.reward_base,
        penalty_stress=breakdown.penalty_stress,
        penalty_resource=breakdown.penalty_resource,
        heal_penalty=breakdown.heal_penalty_applied,
        reward_total=breakdown.total,
    )


def episode_record(episode: int, steps: list) -> EpisodeRecord:
    """Aggregate one episode's StepRecords plus their raw infos."""
    rows, infos = zip(*steps)
    stress_failures = sum(
        1 for info in infos
        if info["stress"] is not None and info["stress"].success_rate < 1.0)
    return EpisodeRecord(
        episode=episode,
        steps=len(rows),
        mean_reward=float(np.mean([r.reward_total for r in rows])),
        mean_latency_s=float(np.mean([r.response_time_s for r in rows])),
        mean_replicas=float(np.mean([r.replica_target for r in rows])),
        mean_pods=float(np.mean([r.pod_count for r in rows])),
        stress_failures=stress_failures,
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_step_csv(records: list, path) -> None:
    lines = [STEP_HEADER]
    for r in records:
        lines.append(",".join(_fmt(v) for v in (
            r.episode, r.step, r.action, r.response_time_s, r.pod_count,
            r.replica_target, r.reward_base, r.penalty_stress,
            r.penalty_resource, r.heal_penalty, r.reward_total)))
    Path(path).write_text("\n".join(lines) + "\n")


def write_episode_csv(records: list, path) -> None:
    lines = [EPISODE_HEADER]
    for r in records:
        lines.append(",".join(_fmt(v) for v in (
            r.episode, r.steps, r.mean_reward, r.mean_latency_s,
            r.mean_replicas, r.mean_pods, r.stress_failures)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_episode_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EPISODE_HEADER.split(","):
            raise ValueError(f"{path}: unexpected episode CSV header")
        return [EpisodeRecord(episode=int(row["episode"]), steps=int(row["steps"]),
                              mean_reward=float(row["mean_reward"]),
                              mean_latency_s=float(row["mean_latency_s"]),
                              mean_replicas=float(row["mean_replicas"]),
                              mean_pods=float(row["mean_pods"]),
                              stress_failures=int(row["stress_failures"]))
                for row in reader]


def read_step_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != STEP_HEADER.split(","):
            raise ValueError(f"{path}: unexpected step CSV header")
        return [StepRecord(episode=int(row["episode"]), step=int(row["step"]),
                           action=int(row["action"]),
                           response_time_s=float(row["response_time_s"]),
                           pod_count=int(row["pod_count"]),
                           replica_target=int(row["replica_target"]),
                           reward_base=float(row["reward_base"]),
                           penalty_stress=float(row["penalty_stress"]),
                           penalty_resource=float(row["penalty_resource"]),
                           heal_penalty=float(row["heal_penalty"]),
                           reward_total=float(row["reward_total"]))
                for row in reader]

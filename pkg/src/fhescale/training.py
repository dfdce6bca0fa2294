"""Training and evaluation loops tying the env, agent, and metrics together.

One PPO update per episode: the rollout length is the episode length, so
the agent sees exactly the per-episode structure the metrics report.
All randomness forks from the experiment's master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .env import DiagnosticEnv, ScalingEnv
from .metrics import EpisodeRecord, StepRecord, episode_record, step_record
from .ppo import (Adam, PolicyNet, Trajectory, collect_rollout, compute_gae,
                  forward, normalize_state, ppo_update)


@dataclass
class TrainResult:
    net: PolicyNet
    episode_records: list
    step_records: list
    update_stats: list


def make_env(config: ExperimentConfig, env_seed: int | None = None):
    sim = config.sim if env_seed is None else replace(config.sim, seed=env_seed)
    if config.env_kind == "diagnostic":
        return DiagnosticEnv(config.env, sim)
    return ScalingEnv(config.env, sim)


def _seeds(master: int) -> dict:
    children = np.random.SeedSequence(master).spawn(3)
    return {
        "net": int(children[0].generate_state(1)[0] % 2**31),
        "actions": int(children[1].generate_state(1)[0] % 2**31),
        "env": int(children[2].generate_state(1)[0] % 2**31),
    }


def train_agent(config: ExperimentConfig, progress=None) -> TrainResult:
    """Train for config.episodes episodes, one PPO update per episode."""
    seeds = _seeds(config.seed)
    env = make_env(config, env_seed=seeds["env"])
    env.reset(seed=seeds["env"])
    net = PolicyNet(hidden_size=config.ppo.hidden_size, seed=seeds["net"])
    optimizer = Adam(net.params, config.ppo.learning_rate)
    action_rng = np.random.default_rng(seeds["actions"])
    update_rng = np.random.default_rng(seeds["actions"] + 1)

    caps = (config.env.observed_latency_cap_s, config.env.observed_pod_cap)
    episode_records, step_records, update_stats = [], [], []
    for episode in range(config.episodes):
        trajectory = collect_rollout(
            env, net, config.env.steps_per_episode, action_rng,
            t_cap=caps[0], p_cap=caps[1], discount=config.ppo.discount,
            reward_scale=config.ppo.reward_scale)
        bootstrap = 0.0
        if not trajectory.dones[-1]:
            bootstrap = forward(net, trajectory.states[-1])[1]
        compute_gae(trajectory, config.ppo.discount, config.ppo.gae_lambda,
                    bootstrap_value=bootstrap)
        stats = ppo_update(net, trajectory, config.ppo, optimizer=optimizer,
                           rng=update_rng)
        update_stats.append(stats)

        steps = []
        for action, (breakdown, info) in zip(trajectory.actions,
                                             trajectory.extras):
            record = step_record(episode, int(action), breakdown, info)
            step_records.append(record)
            steps.append((record, info))
        episode_records.append(episode_record(episode, steps))
        if progress is not None:
            progress(episode, episode_records[-1], stats)

    return TrainResult(net=net, episode_records=episode_records,
                       step_records=step_records, update_stats=update_stats)


def greedy_episodes(config: ExperimentConfig, net: PolicyNet,
                    episodes: int) -> tuple:
    """Roll the deterministic argmax policy; returns (episode, step) records."""
    seeds = _seeds(config.seed)
    env = make_env(config, env_seed=seeds["env"])
    env.reset(seed=seeds["env"] + 1)
    caps = (config.env.observed_latency_cap_s, config.env.observed_pod_cap)

    episode_records, step_records = [], []
    for episode in range(episodes):
        if env.done:
            env.reset()
        state = env.state
        steps = []
        while not env.done:
            obs = normalize_state(state, caps[0], caps[1])
            probs, _ = forward(net, obs)
            action = int(np.argmax(probs))
            state, breakdown, info = env.step(action)
            record = step_record(episode, action, breakdown, info)
            step_records.append(record)
            steps.append((record, info))
        episode_records.append(episode_record(episode, steps))
    return episode_records, step_records

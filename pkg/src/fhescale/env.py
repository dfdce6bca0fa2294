"""The scaling MDP: states (t, p), three actions, decomposed reward.

A step applies the scaling action, waits for the deployment to settle,
probes the service, and assembles the reward from four parts: the base
term -t - 0.1*p, a stress penalty on periodic load spikes, resource
penalties for over-allocation, and a flat -10 when the service keeps
failing right after a self-heal. Self-healing and cooldown are
environment dynamics, not actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import Cluster, RequestStatus, SimConfig

ACTION_DOWN, ACTION_HOLD, ACTION_UP = 0, 1, 2
N_ACTIONS = 3


@dataclass(frozen=True)
class EnvConfig:
    stress_interval: int = 5            # run a stress test every k-th step
    soft_pod_threshold: int = 5         # pod count above this is penalized
    hard_replica_cap: int = 100         # replica target above this is penalized
    pod_cost_coefficient: float = 0.1
    stress_fail_weight: float = 5.0
    stress_latency_weight: float = 2.0
    latency_threshold_s: float = 2.0
    heal_penalty: float = -10.0
    cooldown_window_s: float = 30.0
    observed_latency_cap_s: float = 10.0
    observed_pod_cap: int = 10
    steps_per_episode: int = 20
    recovery_cap: int = 10
    settle_margin_s: float = 0.5

    def __post_init__(self):
        if self.stress_interval < 1:
            raise ValueError("stress_interval must be >= 1")
        if self.soft_pod_threshold > self.hard_replica_cap:
            raise ValueError("soft threshold cannot exceed the hard cap")


@dataclass(frozen=True)
class EnvState:
    t: float  # response time, clamped to [0, observed cap]
    p: int    # pod count, clamped to [1, observed cap]

    def as_array(self) -> np.ndarray:
        return np.array([self.t, float(self.p)])


@dataclass(frozen=True)
class RewardBreakdown:
    reward_base: float
    penalty_stress: float
    penalty_resource: float
    heal_penalty_applied: float

    @property
    def total(self) -> float:
        return (self.reward_base - self.penalty_stress - self.penalty_resource
                + self.heal_penalty_applied)


def reward_base(t: float, pod_count: int,
                pod_cost_coefficient: float = 0.1) -> float:
    """Negative response time, minus a per-pod cost."""
    return -t - pod_cost_coefficient * pod_count


def penalty_resource(current_replicas: int, max_pods: int) -> float:
    """Doubling penalty on allocation beyond the threshold; zero below it."""
    if current_replicas <= max_pods:
        return 0.0
    return 2.0 * (current_replicas - max_pods)


def penalty_stress(success_rate: float, avg_response_s: float,
                   fail_weight: float = 5.0, latency_weight: float = 2.0,
                   latency_threshold_s: float = 2.0) -> float:
    """Weighted failures plus excess latency above the threshold."""
    return (fail_weight * (1.0 - success_rate)
            + latency_weight * max(0.0, avg_response_s - latency_threshold_s))


class EpisodeOver(RuntimeError):
    pass


class ScalingEnv:
    """Gym-style wrapper over one Cluster instance."""

    def __init__(self, env_config: EnvConfig = EnvConfig(),
                 sim_config: SimConfig = SimConfig()):
        self.config = env_config
        self.sim_config = sim_config
        self.cluster: Cluster | None = None
        self.step_index = 0
        self._seed_rng = np.random.default_rng(sim_config.seed)
        self._done = True
        self._state: EnvState | None = None

    def reset(self, seed: int | None = None) -> EnvState:
        """Fresh cluster at one replica; deterministic per seed."""
        if seed is not None:
            self._seed_rng = np.random.default_rng(seed)
        cluster_seed = int(self._seed_rng.integers(0, 2**63 - 1))
        self.cluster = Cluster(replace(self.sim_config, seed=cluster_seed),
                               initial_replicas=1)
        self._stabilize()
        self.step_index = 0
        self._done = False
        self._state = self._observe(t=0.0)
        return self._state

    def _stabilize(self):
        self.cluster.advance(self.sim_config.pod_startup_delay_s
                             + self.config.settle_margin_s)

    def _observe(self, t: float) -> EnvState:
        cfg = self.config
        p = min(max(self.cluster.pod_count(), 1), cfg.observed_pod_cap)
        return EnvState(t=min(max(t, 0.0), cfg.observed_latency_cap_s), p=p)

    def step(self, action: int):
        """Advance one control step; returns (EnvState, RewardBreakdown, info)."""
        if self._done or self.cluster is None:
            raise EpisodeOver("call reset() before stepping")
        if action not in (ACTION_DOWN, ACTION_HOLD, ACTION_UP):
            raise ValueError(f"invalid action {action}")
        cfg = self.config
        cluster = self.cluster
        self.step_index += 1

        requested = cluster.replica_target + (action - 1)
        scale = cluster.set_replicas(requested)
        self._stabilize()

        outcome = cluster.measure_response()
        t = outcome.response_time_s
        p = cluster.pod_count()
        base = reward_base(t, p, cfg.pod_cost_coefficient)

        stress_pen = 0.0
        stress_result = None
        recovery_applied = 0
        if self.step_index % cfg.stress_interval == 0:
            stress_result = cluster.stress_test()
            stress_pen = penalty_stress(
                stress_result.success_rate, stress_result.avg_response_s,
                cfg.stress_fail_weight, cfg.stress_latency_weight,
                cfg.latency_threshold_s)
            if stress_pen > 0:
                # automatic recovery scaling, capped at the observation limit
                bump = max(1, int(stress_pen // 2))
                new_target = min(cluster.replica_target + bump, cfg.recovery_cap)
                recovery_applied = new_target - cluster.replica_target
                if recovery_applied > 0:
                    cluster.set_replicas(new_target)
                    self._stabilize()

        resource_pen = (penalty_resource(p, cfg.soft_pod_threshold)
                        + penalty_resource(requested, cfg.hard_replica_cap))

        heal_pen = 0.0
        healed = False
        if not outcome.ok:
            window = cfg.cooldown_window_s
            last = cluster.last_heal_at
            if last is None or cluster.now - last > window:
                cluster.self_heal()
                self._stabilize()
                healed = True
                recheck = cluster.measure_response()
                if not recheck.ok:
                    heal_pen = cfg.heal_penalty
            else:
                heal_pen = cfg.heal_penalty  # still failing inside the cooldown

        breakdown = RewardBreakdown(reward_base=base, penalty_stress=stress_pen,
                                    penalty_resource=resource_pen,
                                    heal_penalty_applied=heal_pen)
        self._done = self.step_index >= cfg.steps_per_episode
        info = {
            "step": self.step_index,
            "done": self._done,
            "status": outcome.status.value,
            "response_time_s": t,
            "pod_count": p,
            "replica_target": cluster.replica_target,
            "requested_replicas": requested,
            "stress": stress_result,
            "recovery_applied": recovery_applied,
            "healed": healed,
        }
        self._state = self._observe(t=t)
        return self._state, breakdown, info

    @property
    def done(self) -> bool:
        return self._done

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise EpisodeOver("environment not reset yet")
        return self._state


class DiagnosticEnv:
    """Stationary check environment: reward peaks at holding four replicas.

    No faults, no stress, no queueing: p moves by the action within
    [1, 10], the synthetic latency is 2/p, and reward = -|p - 4|. Used to
    verify that the learner can find and hold a known optimum.
    """

    TARGET = 4

    def __init__(self, env_config: EnvConfig = EnvConfig(), sim_config=None):
        self.config = env_config
        self.p = 1
        self.step_index = 0
        self._done = True
        self._state: EnvState | None = None

    def reset(self, seed: int | None = None) -> EnvState:
        self.p = 1
        self.step_index = 0
        self._done = False
        self._state = EnvState(t=2.0 / self.p, p=self.p)
        return self._state

    def step(self, action: int):
        if self._done:
            raise EpisodeOver("call reset() before stepping")
        self.step_index += 1
        self.p = min(max(self.p + (action - 1), 1), 10)
        reward = -abs(self.p - self.TARGET)
        breakdown = RewardBreakdown(reward_base=float(reward), penalty_stress=0.0,
                                    penalty_resource=0.0, heal_penalty_applied=0.0)
        self._done = self.step_index >= self.config.steps_per_episode
        info = {"step": self.step_index, "done": self._done,
                "pod_count": self.p, "replica_target": self.p,
                "response_time_s": 2.0 / self.p, "status": "200",
                "requested_replicas": self.p, "stress": None,
                "recovery_applied": 0, "healed": False}
        self._state = EnvState(t=2.0 / self.p, p=self.p)
        return self._state, breakdown, info

    @property
    def done(self) -> bool:
        return self._done

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise EpisodeOver("environment not reset yet")
        return self._state

"""Deterministic virtual-time simulation of a replicated deployment.

One Cluster models pods behind a round-robin balancer serving
encrypted-inference requests. Time is a virtual clock advanced by the
caller; nothing here touches wall time, so runs are fast and replayable.
Scaling is asynchronous like the real thing: the replica target moves
immediately, pods catch up after a startup delay, and terminated pods
linger until garbage collection.

All randomness (service jitter, request failures, stress spike sizes,
cache hits) flows from one seeded generator, so an identical seed and
call sequence replays an identical event trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

STRESS_MIN, STRESS_MAX = 5, 10


class PodPhase(Enum):
    STARTING = "starting"
    READY = "ready"
    TERMINATED = "terminated"


class RequestStatus(Enum):
    OK = "200"
    FAILURE = "failure"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SimConfig:
    service_time_s: float = 0.8
    service_jitter_s: float = 0.1
    pod_startup_delay_s: float = 2.0
    request_timeout_s: float = 10.0
    failure_probability: float = 0.02
    cache_hit_probability: float = 0.0
    cache_hit_service_s: float = 0.05
    max_replicas: int = 100
    cooldown_window_s: float = 30.0
    seed: int = 0
    service_sampler: object = None  # optional callable(rng) -> seconds

    def __post_init__(self):
        if self.service_time_s <= 0 or self.pod_startup_delay_s <= 0 \
                or self.request_timeout_s <= 0:
            raise ValueError("durations must be positive")
        for p in (self.failure_probability, self.cache_hit_probability):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        if self.max_replicas < 1:
            raise ValueError("max_replicas must be >= 1")


@dataclass
class Pod:
    pod_id: int
    phase: PodPhase
    ready_at: float
    next_free_at: float = 0.0


@dataclass(frozen=True)
class RequestOutcome:
    status: RequestStatus
    response_time_s: float

    @property
    def ok(self) -> bool:
        return self.status is RequestStatus.OK


@dataclass(frozen=True)
class StressResult:
    success_rate: float
    avg_response_s: float
    n_requests: int


@dataclass(frozen=True)
class HealReport:
    time_s: float
    removed_terminated: int
    restarted: int


@dataclass
class ScaleResult:
    applied: int
    overshoot: int  # amount the request exceeded the hard cap


class Cluster:
    """Discrete-event deployment state; single-threaded per instance."""

    def __init__(self, config: SimConfig, initial_replicas: int = 1):
        if initial_replicas < 1:
            raise ValueError("initial_replicas must be >= 1")
        self.config = config
        self.now = 0.0
        self.rng = np.random.default_rng(config.seed)
        self.replica_target = min(initial_replicas, config.max_replicas)
        self.pods: list[Pod] = []
        self.round_robin_cursor = 0
        self.last_heal_at: float | None = None
        self._next_pod_id = 0
        self.trace: list[tuple] = []
        for _ in range(self.replica_target):
            self._spawn_pod()

    # -- lifecycle -------------------------------------------------------

    def _spawn_pod(self) -> Pod:
        pod = Pod(pod_id=self._next_pod_id, phase=PodPhase.STARTING,
                  ready_at=self.now + self.config.pod_startup_delay_s)
        self._next_pod_id += 1
        self.pods.append(pod)
        self._log("pod_created", pod.pod_id)
        return pod

    def _log(self, kind: str, pod_id: int = -1):
        self.trace.append((round(self.now, 9), kind, pod_id))

    def _live_pods(self) -> list:
        return [p for p in self.pods if p.phase is not PodPhase.TERMINATED]

    def _ready_pods(self) -> list:
        return [p for p in self.pods if p.phase is PodPhase.READY]

    def advance(self, duration: float) -> None:
        """Move the virtual clock forward and apply pod phase transitions."""
        if duration < 0:
            raise ValueError("duration must be >= 0")
        self._settle(self.now + duration)

    def _settle(self, until: float) -> None:
        # fire startup transitions in event order, not call granularity
        while True:
            pending = [p for p in self.pods
                       if p.phase is PodPhase.STARTING and p.ready_at <= until]
            if not pending:
                break
            nxt = min(pending, key=lambda p: (p.ready_at, p.pod_id))
            self.now = max(self.now, nxt.ready_at)
            nxt.phase = PodPhase.READY
            nxt.next_free_at = max(nxt.next_free_at, self.now)
            self._log("pod_ready", nxt.pod_id)
        self.now = max(self.now, until)

    def set_replicas(self, target: int) -> ScaleResult:
        """Apply a new replica target, clamped to [1, max_replicas].

        Surplus pods are marked Terminated (newest first) and linger until
        the next self-heal; deficit pods start in the Starting phase.
        """
        overshoot = max(0, target - self.config.max_replicas)
        applied = min(max(1, target), self.config.max_replicas)
        self.replica_target = applied

        live = self._live_pods()
        if len(live) > applied:
            for pod in sorted(live, key=lambda p: -p.pod_id)[: len(live) - applied]:
                pod.phase = PodPhase.TERMINATED
                self._log("pod_terminated", pod.pod_id)
        else:
            for _ in range(applied - len(live)):
                self._spawn_pod()
        self.round_robin_cursor = 0
        self._log("scaled", applied)
        return ScaleResult(applied=applied, overshoot=overshoot)

    def pod_count(self) -> int:
        """Pods not Terminated (Starting + Ready): the observable ground truth."""
        return len(self._live_pods())

    def self_heal(self) -> HealReport:
        """Restart the deployment: gc Terminated pods, recycle the rest."""
        removed = [p for p in self.pods if p.phase is PodPhase.TERMINATED]
        survivors = self._live_pods()
        self.pods = survivors
        for pod in survivors:
            pod.phase = PodPhase.STARTING
            pod.ready_at = self.now + self.config.pod_startup_delay_s
            pod.next_free_at = self.now
            self._log("pod_recycled", pod.pod_id)
        self.last_heal_at = self.now
        self._log("self_heal", len(removed))
        return HealReport(time_s=self.now, removed_terminated=len(removed),
                          restarted=len(survivors))

    # -- request handling ------------------------------------------------

    def _sample_service_time(self) -> float:
        cfg = self.config
        if cfg.cache_hit_probability > 0 and \
                self.rng.random() < cfg.cache_hit_probability:
            return cfg.cache_hit_service_s
        if cfg.service_sampler is not None:
            return float(cfg.service_sampler(self.rng))
        jitter = cfg.service_jitter_s
        base = cfg.service_time_s
        if jitter > 0:
            base += float(self.rng.uniform(-jitter, jitter))
        return max(base, 1e-6)

    def _dispatch(self, submitted_at: float) -> RequestOutcome:
        """Route one request round-robin and book it on the chosen pod."""
        cfg = self.config
        deadline = submitted_at + cfg.request_timeout_s
        ready = self._ready_pods()
        if ready:
            pod = ready[self.round_robin_cursor % len(ready)]
            self.round_robin_cursor += 1
            start = max(submitted_at, pod.next_free_at)
        else:
            starting = [p for p in self.pods if p.phase is PodPhase.STARTING]
            candidates = [p for p in starting if p.ready_at <= deadline]
            if not candidates:
                self._log("request_timeout")
                return RequestOutcome(RequestStatus.TIMEOUT, cfg.request_timeout_s)
            pod = min(candidates, key=lambda p: (p.ready_at, p.pod_id))
            start = max(submitted_at, pod.ready_at, pod.next_free_at)

        service = self._sample_service_time()
        completes_at = start + service
        pod.next_free_at = completes_at  # server keeps working past a client timeout
        failed = self.rng.random() < cfg.failure_probability
        self._log("request_dispatched", pod.pod_id)
        if completes_at > deadline:
            return RequestOutcome(RequestStatus.TIMEOUT, cfg.request_timeout_s)
        if failed:
            return RequestOutcome(RequestStatus.FAILURE, completes_at - submitted_at)
        return RequestOutcome(RequestStatus.OK, completes_at - submitted_at)

    def measure_response(self) -> RequestOutcome:
        """Submit one probe request and advance the clock to its completion."""
        submitted = self.now
        outcome = self._dispatch(submitted)
        self._settle(submitted + outcome.response_time_s)
        return outcome

    def stress_test(self, rng: np.random.Generator | None = None) -> StressResult:
        """Burst of 5-10 simultaneous requests; timeouts count as failures."""
        rng = self.rng if rng is None else rng
        n = int(rng.integers(STRESS_MIN, STRESS_MAX + 1))
        submitted = self.now
        outcomes = [self._dispatch(submitted) for _ in range(n)]
        self._settle(submitted + max(o.response_time_s for o in outcomes))
        successes = sum(1 for o in outcomes if o.ok)
        return StressResult(
            success_rate=successes / n,
            avg_response_s=sum(o.response_time_s for o in outcomes) / n,
            n_requests=n,
        )


def new_cluster(config: SimConfig, initial_replicas: int = 1) -> Cluster:
    return Cluster(config, initial_replicas=initial_replicas)

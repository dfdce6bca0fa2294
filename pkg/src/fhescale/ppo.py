"""Proximal policy optimization, from scratch on numpy.

Two-headed tanh MLP (policy logits over the three scaling actions plus a
scalar value), generalized advantage estimation, and the clipped
surrogate update. Gradients are hand-derived layer by layer; the shapes
are small and fixed, and the explicit math is what the
finite-difference checks in the test suite verify.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EnvState, N_ACTIONS

CHECKPOINT_MAGIC = b"FSPN"
CHECKPOINT_VERSION = 1
_PARAM_ORDER = ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv")


@dataclass(frozen=True)
class PPOConfig:
    clip_epsilon: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    epochs: int = 10
    minibatch_size: int = 64
    entropy_coefficient: float = 0.0
    value_loss_coefficient: float = 0.5
    max_grad_norm: float = 0.5
    reward_scale: float = 1.0  # keeps value targets O(1); tanh trunks saturate on large ones
    rollout_steps: int = 256
    hidden_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.clip_epsilon:
            raise ValueError("clip epsilon must be positive")
        for name in ("discount", "gae_lambda"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


class PolicyNet:
    """Shared tanh trunk, zero-initialized policy and value heads.

    Zero heads make the initial policy exactly uniform and the initial
    value exactly zero, which keeps early updates well behaved.
    """

    def __init__(self, obs_dim: int = 2, n_actions: int = N_ACTIONS,
                 hidden_size: int = 64, seed: int = 0):
        rng = np.random.default_rng(seed)
        h = hidden_size

        def layer(n_out, n_in):
            return rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))

        self.params = {
            "w1": layer(h, obs_dim), "b1": np.zeros(h),
            "w2": layer(h, h), "b2": np.zeros(h),
            "wp": np.zeros((n_actions, h)), "bp": np.zeros(n_actions),
            "wv": np.zeros((1, h)), "bv": np.zeros(1),
        }
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hidden_size = h


def forward_batch(net: PolicyNet, states: np.ndarray) -> dict:
    """Full forward pass; returns the cache needed for backprop."""
    x = np.asarray(states, dtype=np.float64)
    p = net.params
    h1 = np.tanh(x @ p["w1"].T + p["b1"])
    h2 = np.tanh(h1 @ p["w2"].T + p["b2"])
    logits = h2 @ p["wp"].T + p["bp"]
    values = (h2 @ p["wv"].T + p["bv"])[:, 0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    return {"x": x, "h1": h1, "h2": h2, "logits": logits,
            "log_probs": log_probs, "probs": np.exp(log_probs),
            "values": values}


def forward(net: PolicyNet, state) -> tuple:
    """(action probabilities, value) for one normalized state."""
    state = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise ValueError("non-finite state")
    out = forward_batch(net, state[None, :])
    return out["probs"][0], float(out["values"][0])


def sample_action(probabilities: np.ndarray, rng: np.random.Generator):
    """Draw an action from the distribution; returns (action, log_prob)."""
    cdf = np.cumsum(probabilities)
    action = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    action = min(action, len(probabilities) - 1)
    return action, float(np.log(probabilities[action]))


def normalize_state(state: EnvState, t_cap: float = 10.0,
                    p_cap: int = 10) -> np.ndarray:
    return np.array([state.t / t_cap, state.p / p_cap])


@dataclass
class Trajectory:
    states: np.ndarray     # normalized, [n, obs_dim]
    actions: np.ndarray
    log_probs_old: np.ndarray
    rewards: np.ndarray
    values_old: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    extras: tuple = field(default=(), compare=False)  # (breakdown, info) pairs

    def __post_init__(self):
        n = len(self.states)
        for name in ("actions", "log_probs_old", "rewards", "values_old", "dones"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"trajectory field {name} has mismatched length")

    def __len__(self):
        return len(self.states)


def compute_gae(trajectory: Trajectory, discount: float, gae_lambda: float,
                bootstrap_value: float = 0.0) -> Trajectory:
    """Fill advantages (lambda-weighted TD errors) and returns in place."""
    n = len(trajectory)
    if n == 0:
        raise ValueError("empty trajectory")
    rewards = trajectory.rewards
    values = trajectory.values_old
    masks = 1.0 - trajectory.dones.astype(np.float64)
    advantages = np.zeros(n)
    gae = 0.0
    for t in reversed(range(n)):
        next_value = values[t + 1] if t + 1 < n else bootstrap_value
        delta = rewards[t] + discount * next_value * masks[t] - values[t]
        gae = delta + discount * gae_lambda * masks[t] * gae
        advantages[t] = gae
    trajectory.advantages = advantages
    trajectory.returns = advantages + values
    return trajectory


def loss_and_grads(net: PolicyNet, batch: dict, config: PPOConfig):
    """Clipped-surrogate loss and its gradients w.r.t. every parameter.

    batch keys: states, actions, log_probs_old, advantages, returns.
    """
    p = net.params
    eps = config.clip_epsilon
    c_v = config.value_loss_coefficient
    c_e = config.entropy_coefficient

    out = forward_batch(net, batch["states"])
    n = len(batch["states"])
    idx = np.arange(n)
    actions = batch["actions"].astype(np.int64)
    adv = batch["advantages"]
    log_probs = out["log_probs"]
    probs = out["probs"]
    values = out["values"]

    logp_a = log_probs[idx, actions]
    ratio = np.exp(logp_a - batch["log_probs_old"])
    surr_plain = ratio * adv
    surr_clip = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    policy_loss = -np.mean(np.minimum(surr_plain, surr_clip))
    value_err = values - batch["returns"]
    value_loss = np.mean(value_err ** 2)
    entropy = float(np.mean(-np.sum(probs * log_probs, axis=1)))
    loss = policy_loss + c_v * value_loss - c_e * entropy

    # d loss / d logp_a: gradient flows only where the unclipped term wins
    unclipped = (surr_plain <= surr_clip).astype(np.float64)
    g_logp_a = -(ratio * adv * unclipped) / n
    g_logits = g_logp_a[:, None] * (np.eye(net.n_actions)[actions] - probs)
    if c_e != 0.0:
        ent_per = -np.sum(probs * log_probs, axis=1)
        g_logits += (c_e / n) * probs * (log_probs + ent_per[:, None])
    g_values = c_v * 2.0 * value_err / n

    h1, h2, x = out["h1"], out["h2"], out["x"]
    grads = {
        "wp": g_logits.T @ h2, "bp": g_logits.sum(axis=0),
        "wv": g_values[None, :] @ h2, "bv": np.array([g_values.sum()]),
    }
    d_h2 = g_logits @ p["wp"] + g_values[:, None] @ p["wv"]
    d_z2 = d_h2 * (1.0 - h2 ** 2)
    grads["w2"] = d_z2.T @ h1
    grads["b2"] = d_z2.sum(axis=0)
    d_z1 = (d_z2 @ p["w2"]) * (1.0 - h1 ** 2)
    grads["w1"] = d_z1.T @ x
    grads["b1"] = d_z1.sum(axis=0)

    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
        "approx_kl": float(np.mean(batch["log_probs_old"] - logp_a)),
    }
    return stats, grads


def clip_grads_(grads: dict, max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm fits max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / (total + 1e-12)
        for key in grads:
            grads[key] *= factor
    return total


class Adam:
    """Per-parameter moment estimates; owned by the training loop."""

    def __init__(self, params: dict, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for key, grad in grads.items():
            self.m[key] = b1 * self.m[key] + (1 - b1) * grad
            self.v[key] = b2 * self.v[key] + (1 - b2) * grad ** 2
            m_hat = self.m[key] / (1 - b1 ** self.t)
            v_hat = self.v[key] / (1 - b2 ** self.t)
            params[key] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    aborted: bool = False


def ppo_update(net: PolicyNet, trajectory: Trajectory, config: PPOConfig,
               optimizer: Adam | None = None,
               rng: np.random.Generator | None = None) -> UpdateStats:
    """Run the clipped-surrogate epochs over one rollout."""
    if trajectory.advantages is None or trajectory.returns is None:
        raise ValueError("run compute_gae before the update")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    optimizer = optimizer or Adam(net.params, config.learning_rate)

    advantages = trajectory.advantages.copy()
    if len(advantages) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    n = len(trajectory)
    batch_size = min(config.minibatch_size, n)
    tallies = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            pick = order[start:start + batch_size]
            batch = {
                "states": trajectory.states[pick],
                "actions": trajectory.actions[pick],
                "log_probs_old": trajectory.log_probs_old[pick],
                "advantages": advantages[pick],
                "returns": trajectory.returns[pick],
            }
            stats, grads = loss_and_grads(net, batch, config)
            if not np.isfinite(stats["loss"]):
                warnings.warn("non-finite PPO loss; update aborted")
                return UpdateStats(policy_loss=stats["policy_loss"],
                                   value_loss=stats["value_loss"],
                                   entropy=stats["entropy"],
                                   clip_fraction=stats["clip_fraction"],
                                   approx_kl=stats["approx_kl"], aborted=True)
            clip_grads_(grads, config.max_grad_norm)
            optimizer.step(net.params, grads)
            tallies.append(stats)

    mean = lambda key: float(np.mean([s[key] for s in tallies]))
    return UpdateStats(policy_loss=mean("policy_loss"),
                       value_loss=mean("value_loss"), entropy=mean("entropy"),
                       clip_fraction=mean("clip_fraction"),
                       approx_kl=mean("approx_kl"))


def collect_rollout(env, net: PolicyNet, n_steps: int,
                    rng: np.random.Generator, t_cap: float = 10.0,
                    p_cap: int = 10, discount: float = 0.99,
                    reward_scale: float = 1.0,
                    bootstrap_timeouts: bool = True) -> Trajectory:
    """Gather n_steps on-policy transitions, resetting the env as needed.

    Episodes here are time slices of a continuing process, so by default
    the value of the post-timeout state is folded into the final reward
    (discounted); the advantage chain still cuts at the boundary.
    Training rewards are multiplied by reward_scale; reported metrics
    elsewhere always use the raw breakdown.
    """
    states, actions, log_probs, rewards, values, dones = [], [], [], [], [], []
    extras = []
    state = env.reset() if env.done else env.state
    obs = normalize_state(state, t_cap, p_cap)
    for _ in range(n_steps):
        probs, value = forward(net, obs)
        action, log_prob = sample_action(probs, rng)
        next_state, breakdown, info = env.step(action)
        reward = breakdown.total * reward_scale
        if info["done"] and bootstrap_timeouts:
            next_obs = normalize_state(next_state, t_cap, p_cap)
            reward += discount * forward(net, next_obs)[1]
        states.append(obs)
        actions.append(action)
        log_probs.append(log_prob)
        rewards.append(reward)
        values.append(value)
        dones.append(info["done"])
        extras.append((breakdown, info))
        if info["done"]:
            next_state = env.reset()
        obs = normalize_state(next_state, t_cap, p_cap)
    return Trajectory(states=np.array(states),
                      actions=np.array(actions, dtype=np.int64),
                      log_probs_old=np.array(log_probs),
                      rewards=np.array(rewards),
                      values_old=np.array(values),
                      dones=np.array(dones, dtype=bool),
                      extras=tuple(extras))


# -- checkpointing -------------------------------------------------------------

def save_checkpoint(net: PolicyNet, path) -> None:
    """Binary checkpoint: JSON layout header + little-endian float64 data."""
    header = {
        "version": CHECKPOINT_VERSION,
        "dtype": "<f8",
        "obs_dim": net.obs_dim,
        "n_actions": net.n_actions,
        "hidden_size": net.hidden_size,
        "layout": [[name, list(net.params[name].shape)] for name in _PARAM_ORDER],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(net.params[name], dtype="<f8").tobytes()
                    for name in _PARAM_ORDER)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_checkpoint(path) -> PolicyNet:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a policy checkpoint")
    header_len = struct.unpack("<I", raw[4:8])[0]
    header = json.loads(raw[8:8 + header_len].decode("utf-8"))
    if header["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['version']}")
    net = PolicyNet(obs_dim=header["obs_dim"], n_actions=header["n_actions"],
                    hidden_size=header["hidden_size"], seed=0)
    offset = 8 + header_len
    for name, shape in header["layout"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        net.params[name] = arr.reshape(shape).astype(np.float64)
        offset += count * 8
    return net

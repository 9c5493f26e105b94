"""Deep Q-learning: replay memory, Q-network updates and the training loop."""

from __future__ import annotations

import csv
import hashlib
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, NumericalError
from ..nn import Adam, DenseStack


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO memory with seeded uniform sampling (with replacement)."""

    def __init__(self, capacity=10_000, seed=0):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._data = deque(maxlen=self.capacity)
        self.rng = np.random.default_rng(seed)

    def __len__(self):
        return len(self._data)

    def add(self, t: Transition) -> None:
        if not np.isfinite(t.reward):
            raise NumericalError("non-finite reward")
        self._data.append(t)

    def items(self) -> list:
        return list(self._data)

    def sample_indices(self, k: int) -> np.ndarray:
        if not self._data:
            raise ConfigError("cannot sample from an empty buffer")
        return self.rng.integers(0, len(self._data), size=k)

    def sample(self, k: int) -> list:
        return [self._data[i] for i in self.sample_indices(k)]


@dataclass
class AgentConfig:
    hidden: tuple = (32, 32)
    batch_size: int = 32
    lr: float = 1e-3
    epsilon: float = 1.0
    epsilon_decay: float = 0.97
    epsilon_min: float = 0.0
    decay_every: str = "step"  # "step" or "episode"
    gamma: float = 0.3
    episodes: int = 50
    target_period: int = 50  # updates between target-network refreshes
    capacity: int = 10_000
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]")
        if not 0 < self.epsilon_decay < 1:
            raise ConfigError("epsilon_decay must be in (0, 1)")
        if not 0 <= self.epsilon_min <= self.epsilon <= 1:
            raise ConfigError("need 0 <= epsilon_min <= epsilon <= 1")
        if self.decay_every not in ("step", "episode"):
            raise ConfigError("decay_every must be 'step' or 'episode'")
        if self.batch_size < 1 or self.episodes < 1 or self.target_period < 1 or self.lr <= 0:
            raise ConfigError(f"invalid agent config {self}")


PRICING_AGENT = {"hidden": (32, 32), "epsilon_decay": 0.97, "gamma": 0.3}
SUPPLY_AGENT = {"hidden": (64, 64), "epsilon_decay": 0.995, "gamma": 0.3}


def stack_batch(batch):
    S = np.stack([t.state for t in batch])
    A = np.array([t.action for t in batch], np.int64)
    R = np.array([t.reward for t in batch], float)
    S2 = np.stack([t.next_state for t in batch])
    D = np.array([t.done for t in batch], float)
    return S, A, R, S2, D


def dqn_loss_and_grads(net: DenseStack, target: DenseStack, batch, gamma: float):
    """Squared Bellman error ``mean((Q(s,a) - y)^2)`` with ``y = r + gamma (1-done) max Q_target(s')``.

    Only ``net`` receives gradients; the target is treated as a constant.
    """
    S, A, R, S2, D = stack_batch(batch) if not isinstance(batch, tuple) else batch
    y = R + gamma * (1.0 - D) * target.predict(S2).max(axis=1)
    q, cache = net.forward(S)
    rows = np.arange(A.size)
    diff = q[rows, A] - y
    loss = float(np.mean(diff**2))
    dq = np.zeros_like(q)
    dq[rows, A] = 2.0 * diff / A.size
    grads, _ = net.backward(cache, dq)
    return loss, grads


class DQNAgent:
    def __init__(self, state_dim: int, n_actions: int, config: AgentConfig | None = None):
        self.config = cfg = config or AgentConfig()
        streams = np.random.SeedSequence(cfg.seed).spawn(3)
        self.rng = np.random.default_rng(streams[0])
        init_rng = np.random.default_rng(streams[1])
        self.memory = ReplayBuffer(cfg.capacity, streams[2])
        self.state_dim, self.n_actions = int(state_dim), int(n_actions)
        self.net = DenseStack([self.state_dim, *cfg.hidden, self.n_actions], init_rng)
        self.target = self.net.copy()
        self.opt = Adam(self.net.params, lr=cfg.lr)
        self.epsilon = cfg.epsilon
        self.n_updates = 0

    def q_values(self, state) -> np.ndarray:
        return self.net.predict(np.atleast_2d(state))[0]

    def greedy(self, state) -> int:
        return int(np.argmax(self.q_values(state)))  # first max -> lowest index

    def act(self, state, epsilon=None) -> int:
        eps = self.epsilon if epsilon is None else epsilon
        if not 0 <= eps <= 1:
            raise ConfigError("epsilon must be in [0, 1]")
        if eps > 0 and self.rng.random() < eps:
            return int(self.rng.integers(self.n_actions))
        return self.greedy(state)

    def update(self, batch) -> float:
        loss, grads = dqn_loss_and_grads(self.net, self.target, batch, self.config.gamma)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite DQN loss after {self.n_updates} updates")
        self.opt.step(self.net.params, grads)
        self.n_updates += 1
        if self.n_updates % self.config.target_period == 0:
            self.target = self.net.copy()
        return loss

    def decay_epsilon(self) -> None:
        self.epsilon = max(self.config.epsilon_min, self.epsilon * self.config.epsilon_decay)

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden"] = list(cfg["hidden"])
        return {"config": cfg, "net": self.net.to_dict(), "epsilon": self.epsilon,
                "n_updates": self.n_updates}


def state_hash(state) -> str:
    return hashlib.sha1(np.asarray(state, dtype=np.float64).tobytes()).hexdigest()[:16]


@dataclass
class TrainingLog:
    episodes: list = field(default_factory=list)  # {episode, mean_reward, epsilon, steps}
    actions: list = field(default_factory=list)  # {episode, step, state_hash, action, reward}
    trace: list = field(default_factory=list)  # env info dicts per step (+ episode, step, action)
    losses: list = field(default_factory=list)

    def mean_rewards(self) -> np.ndarray:
        return np.array([e["mean_reward"] for e in self.episodes])

    def action_counts(self, n_actions, from_episode=0) -> np.ndarray:
        a = [r["action"] for r in self.actions if r["episode"] >= from_episode]
        return np.bincount(np.asarray(a, np.int64), minlength=n_actions)

    def weekday_heatmap(self, n_actions, from_episode=0) -> np.ndarray:
        H = np.zeros((7, n_actions), np.int64)
        for r in self.trace:
            if r["episode"] >= from_episode and "weekday" in r:
                H[r["weekday"], r["action"]] += 1
        return H


def train_agent(env, config: AgentConfig | None = None, record_trace=False):
    """Run epsilon-greedy DQN for ``config.episodes`` episodes.

    One gradient update per environment step once the memory holds a batch;
    epsilon is multiplied by its decay after every step or after every
    episode (``decay_every``).  The logged epsilon is the value in force
    during that episode's last step.  Environment,
    agent and memory draw from independent streams of ``config.seed``.
    """
    cfg = config or AgentConfig()
    agent = DQNAgent(env.state_dim, env.n_actions, cfg)
    env_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    log = TrainingLog()
    for ep in range(cfg.episodes):
        s = env.reset(env_rng)
        rewards = []
        step = 0
        done = False
        while not done:
            a = agent.act(s)
            s2, r, done, info = env.step(a)
            agent.memory.add(Transition(s, a, r, s2, done))
            log.actions.append(
                {"episode": ep, "step": step, "state_hash": state_hash(s), "action": a, "reward": r}
            )
            if record_trace:
                log.trace.append({"episode": ep, "step": step, "action": a, "reward": r, **info})
            if len(agent.memory) >= cfg.batch_size:
                log.losses.append(agent.update(agent.memory.sample(cfg.batch_size)))
            if cfg.decay_every == "step":
                agent.decay_epsilon()
            rewards.append(r)
            s = s2
            step += 1
        log.episodes.append(
            {"episode": ep, "mean_reward": float(np.mean(rewards)), "epsilon": agent.epsilon,
             "steps": step}
        )
        if cfg.decay_every == "episode":
            agent.decay_epsilon()
    return agent, log


# ---------------------------------------------------------------------------
# Telemetry writers


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x):
    return f"{x:.10g}"


def write_episode_log(log: TrainingLog, path):
    _write(path, ["episode", "mean_reward", "epsilon"],
           [[e["episode"], _f(e["mean_reward"]), _f(e["epsilon"])] for e in log.episodes])


def write_action_log(log: TrainingLog, path):
    _write(path, ["episode", "step", "state_hash", "action", "reward"],
           [[r["episode"], r["step"], r["state_hash"], r["action"], _f(r["reward"])] for r in log.actions])


def write_action_histogram(log: TrainingLog, n_actions, labels, path, from_episode=0):
    counts = log.action_counts(n_actions, from_episode)
    total = max(int(counts.sum()), 1)
    _write(path, ["action", "value", "count", "frequency"],
           [[i, labels[i], int(c), _f(c / total)] for i, c in enumerate(counts)])


def write_weekday_heatmap(log: TrainingLog, n_actions, path, from_episode=0):
    H = log.weekday_heatmap(n_actions, from_episode)
    _write(path, ["weekday", *[f"action_{i}" for i in range(n_actions)]],
           [[d, *map(int, H[d])] for d in range(7)])


def write_supply_trace(log: TrainingLog, path):
    _write(path, ["episode", "step", "action", "demand", "supply", "stock", "shortage", "reward"],
           [[r["episode"], r["step"], r["action"], _f(r["demand"]), _f(r["supply"]), _f(r["stock"]),
             _f(r["shortage"]), _f(r["reward"])] for r in log.trace])

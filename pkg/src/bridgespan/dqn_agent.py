"""DQN training on the bridge gridworld, plus an exact value-iteration oracle."""

from __future__ import annotations

import io
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from bridgespan.environment import BridgeSpanEnv, EnvConfig
from bridgespan.neural import (
    AdamState,
    NetworkSpec,
    ParameterSet,
    adam_step,
    backward,
    forward,
    init_network,
)

log = logging.getLogger(__name__)

METRICS_HEADER = "episode,total_steps,epsilon,mean_loss,episode_return"


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.8
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 50_000
    replay_capacity: int = 20_000
    warmup: int = 1_000
    batch_size: int = 32
    learning_rate: float = 1e-4
    reward_scale: float = 1e-3
    target_sync_interval: int = 500
    episodes: int = 400
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.epsilon_decay_steps < 0:
            raise ValueError("epsilon_decay_steps must be >= 0")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= replay_capacity")
        if self.warmup < self.batch_size:
            raise ValueError("warmup must be >= batch_size")
        if self.learning_rate <= 0 or self.reward_scale <= 0:
            raise ValueError("learning_rate and reward_scale must be > 0")
        if self.target_sync_interval < 1 or self.episodes < 1:
            raise ValueError("target_sync_interval and episodes must be >= 1")

    def epsilon(self, total_steps: int) -> float:
        """Linear decay from ``epsilon_start`` to ``epsilon_end``, then flat."""
        if self.epsilon_decay_steps == 0 or total_steps >= self.epsilon_decay_steps:
            return self.epsilon_end
        frac = total_steps / self.epsilon_decay_steps
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def select_action(q: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action code."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


# replay ------------------------------------------------------------------------


class Transition(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int
    done: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def transitions(self) -> list[Transition]:
        return [Transition(int(s), int(a), float(r), int(n), bool(d)) for s, a, r, n, d in zip(*self)]


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions; the oldest entry is evicted first.

    Rendered images are not stored: every state index maps to one image.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._states = np.zeros(capacity, dtype=np.int64)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float64)
        self._next = np.zeros(capacity, dtype=np.int64)
        self._dones = np.zeros(capacity, dtype=bool)
        self._head = 0  # slot of the oldest entry once full
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        if t.action < 0:
            raise ValueError(f"invalid action {t.action}")
        slot = (self._head + self._size) % self.capacity
        if self._size == self.capacity:
            self._head = (self._head + 1) % self.capacity
        else:
            self._size += 1
        self._states[slot] = t.state
        self._actions[slot] = t.action
        self._rewards[slot] = t.reward
        self._next[slot] = t.next_state
        self._dones[slot] = t.done

    def _order(self) -> np.ndarray:
        return (self._head + np.arange(self._size)) % self.capacity

    def __iter__(self) -> Iterator[Transition]:
        return iter(self._gather(self._order()).transitions())

    def _gather(self, slots: np.ndarray) -> Batch:
        return Batch(
            self._states[slots], self._actions[slots], self._rewards[slots],
            self._next[slots], self._dones[slots],
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sample with replacement."""
        if self._size < batch_size:
            raise RuntimeError(f"buffer holds {self._size} transitions, need {batch_size}")
        positions = rng.integers(self._size, size=batch_size)
        return self._gather((self._head + positions) % self.capacity)

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        return self.sample(batch_size, rng).transitions()


# learning ----------------------------------------------------------------------


def compute_targets(
    rewards: np.ndarray, next_q: np.ndarray, gamma: float, reward_scale: float
) -> np.ndarray:
    """Bootstrap labels ``r * scale + gamma * max_a Q_target(s', a)``.

    Done flags mark the step budget, not a terminal state, so every label
    bootstraps.
    """
    next_q = np.asarray(next_q, dtype=np.float64)
    return np.asarray(rewards, dtype=np.float64) * reward_scale + gamma * next_q.max(axis=-1)


def train_step(
    online: ParameterSet,
    images: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    adam: AdamState,
) -> float:
    """One Adam step on the MSE between Q(s, a_taken) and ``targets``."""
    q, cache = forward(online, images, keep_cache=True)
    rows = np.arange(len(actions))
    residual = q[rows, actions] - targets.astype(q.dtype)
    loss = float(np.mean(residual.astype(np.float64) ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * residual / len(actions)
    adam_step(online, backward(online, cache, dq), adam)
    return loss


def normalized_images(env: BridgeSpanEnv) -> np.ndarray:
    return env.render_all().astype(np.float32) / np.float32(255.0)


def q_table(params: ParameterSet, images: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Q-values of every state, shape ``(num_states, num_actions)``."""
    return np.concatenate([forward(params, images[i : i + chunk]) for i in range(0, len(images), chunk)])


@dataclass
class TrainMetrics:
    episode: list[int] = field(default_factory=list)
    total_steps: list[int] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    mean_loss: list[float] = field(default_factory=list)  # nan while warming up
    episode_return: list[float] = field(default_factory=list)

    def append(self, episode: int, total_steps: int, epsilon: float, mean_loss: float, episode_return: float) -> None:
        self.episode.append(episode)
        self.total_steps.append(total_steps)
        self.epsilon.append(epsilon)
        self.mean_loss.append(mean_loss)
        self.episode_return.append(episode_return)

    def __len__(self) -> int:
        return len(self.episode)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(METRICS_HEADER + "\n")
        for row in zip(self.episode, self.total_steps, self.epsilon, self.mean_loss, self.episode_return):
            ep, steps, eps, loss, ret = row
            buf.write(f"{ep},{steps},{eps:.6f},{loss:.9g},{ret:.6f}\n")
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), newline="\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrainMetrics":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != METRICS_HEADER:
            raise ValueError(f"{path}: missing metrics header")
        metrics = cls()
        for line in lines[1:]:
            ep, steps, eps, loss, ret = line.split(",")
            metrics.append(int(ep), int(steps), float(eps), float(loss), float(ret))
        return metrics

    def trained_losses(self) -> np.ndarray:
        """Per-episode mean losses of episodes that ran at least one update."""
        losses = np.asarray(self.mean_loss, dtype=float)
        return losses[~np.isnan(losses)]


@dataclass
class TrainResult:
    params: ParameterSet
    metrics: TrainMetrics
    seconds: float


def train(env_config: EnvConfig, config: TrainConfig, progress: bool = False) -> TrainResult:
    """Run epsilon-greedy DQN with replay and a periodically synced target net.

    After ``warmup`` transitions, one update per environment step.
    """
    started = time.perf_counter()
    env = BridgeSpanEnv(env_config, seed=config.seed)
    spec = NetworkSpec.q_network(env_config.cell_pixels, env_config.num_materials, env.num_columns, env.num_actions)
    images = normalized_images(env)
    rng = np.random.default_rng([config.seed, 1])

    online = init_network(spec, seed=config.seed)
    target = online.copy()
    target_q = q_table(target, images)
    adam = AdamState.for_params(online, lr=config.learning_rate)
    buffer = ReplayBuffer(config.replay_capacity)
    metrics = TrainMetrics()

    total_steps = 0
    updates = 0
    for episode in range(1, config.episodes + 1):
        state, _ = env.reset()
        episode_return = 0.0
        losses = []
        done = False
        while not done:
            eps = config.epsilon(total_steps)
            action = select_action(forward(online, images[state]), eps, rng)
            next_state, reward, done, _, _ = env.step(action)
            buffer.push(Transition(state, action, reward, next_state, done))
            episode_return += reward
            total_steps += 1
            state = next_state

            if len(buffer) >= config.warmup:
                batch = buffer.sample(config.batch_size, rng)
                targets = compute_targets(batch.rewards, target_q[batch.next_states], config.gamma, config.reward_scale)
                losses.append(train_step(online, images[batch.states], batch.actions, targets, adam))
                updates += 1
                if updates % config.target_sync_interval == 0:
                    target.assign(online)
                    target_q = q_table(target, images)

        mean_loss = float(np.mean(losses)) if losses else float("nan")
        metrics.append(episode, total_steps, config.epsilon(total_steps), mean_loss, episode_return)
        if progress and (episode % 10 == 0 or episode == config.episodes):
            log.info("episode %d steps %d eps %.3f loss %.5g return %.1f",
                     episode, total_steps, config.epsilon(total_steps), mean_loss, episode_return)
    return TrainResult(online, metrics, time.perf_counter() - started)


# evaluation --------------------------------------------------------------------


def greedy_policy(params: ParameterSet, images: np.ndarray) -> np.ndarray:
    return np.argmax(q_table(params, images), axis=1)


def follow_policy(policy: Sequence[int], next_state: np.ndarray, start: int, max_len: int) -> list[int]:
    """Visited states of a deterministic policy from ``start`` for ``max_len`` steps."""
    trace = [int(start)]
    state = int(start)
    for _ in range(max_len):
        state = int(next_state[state, policy[state]])
        trace.append(state)
    return trace


def greedy_rollout(params: ParameterSet, env: BridgeSpanEnv, start: int, max_len: int | None = None,
                   images: np.ndarray | None = None) -> list[int]:
    """Trace of the epsilon = 0 policy; length is ``max_len + 1``."""
    env.state_to_grid(start)
    if images is None:
        images = normalized_images(env)
    policy = greedy_policy(params, images)
    next_state, _ = env.transition_table()
    return follow_policy(policy, next_state, start, env.config.max_steps if max_len is None else max_len)


def endpoint_coverage(policy: Sequence[int], env: BridgeSpanEnv, goal: int | None = None,
                      max_len: int | None = None) -> tuple[np.ndarray, float]:
    """Endpoints of rollouts from every start and the fraction ending at ``goal``.

    An endpoint only counts if the policy also holds ``goal`` in place.
    """
    goal = env.optimal_state() if goal is None else goal
    max_len = env.config.max_steps if max_len is None else max_len
    next_state, _ = env.transition_table()
    ends = np.array([follow_policy(policy, next_state, s, max_len)[-1] for s in range(env.num_states)])
    holds = next_state[goal, policy[goal]] == goal
    return ends, float(np.mean(ends == goal)) if holds else 0.0


@dataclass
class OracleResult:
    values: np.ndarray
    policy: np.ndarray
    q: np.ndarray
    iterations: int


def value_iteration_oracle(env: BridgeSpanEnv, gamma: float = 0.95, tol: float = 1e-10,
                           reward_scale: float = 1e-3, max_iter: int = 100_000) -> OracleResult:
    """Exact Bellman iteration on the deterministic gridworld MDP."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    next_state, reward = env.transition_table()
    reward = reward * reward_scale
    values = np.zeros(env.num_states)
    for iteration in range(1, max_iter + 1):
        q = reward + gamma * values[next_state]
        new_values = q.max(axis=1)
        delta = np.max(np.abs(new_values - values))
        values = new_values
        if delta < tol:
            break
    q = reward + gamma * values[next_state]
    return OracleResult(values, np.argmax(q, axis=1), q, iteration)


def config_fields(cls) -> list[str]:
    return [f.name for f in fields(cls)]

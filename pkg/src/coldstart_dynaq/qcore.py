"""Tabular Q-values over cost-to-go, with the cost-minimizing update rule.

All Q operations work on dense state/action indices; the env module owns
the bijection between states and indices.
"""

import json
import math

import numpy as np


class QTable:
    """Dense [num_states x num_actions] table of estimated discounted cost."""

    def __init__(self, num_states: int, num_actions: int, alpha: float, gamma: float):
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"alpha must be in (0,1), got {alpha}")
        if not (0.0 < gamma < 1.0):
            raise ValueError(f"gamma must be in (0,1), got {gamma}")
        self.alpha = alpha
        self.gamma = gamma
        self.values = np.zeros((num_states, num_actions))

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    @property
    def num_actions(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "QTable":
        out = QTable(self.num_states, self.num_actions, self.alpha, self.gamma)
        out.values = self.values.copy()
        return out


def q_update(q: QTable, s: int, a: int, cost: float, s_next: int) -> float:
    """One Q-learning step toward cost + gamma * min_a' Q(s', a').

    Only the (s, a) entry changes. Returns the updated entry.
    """
    if not math.isfinite(cost):
        raise ValueError(f"cost must be finite, got {cost}")
    target = cost + q.gamma * q.values[s_next].min()
    q.values[s, a] += q.alpha * (target - q.values[s, a])
    return float(q.values[s, a])


def select_action(q: QTable, s: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the cost row: explore uniformly, else argmin.

    Greedy ties are broken uniformly at random, which keeps early training
    (all-zero rows) from locking onto action 0.
    """
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError(f"epsilon must be in [0,1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(q.num_actions))
    row = q.values[s]
    best = np.flatnonzero(row == row.min())
    return int(best[rng.integers(len(best))])


def greedy_policy(q: QTable) -> np.ndarray:
    """Per-state argmin action, lowest index on ties (deterministic testing)."""
    return np.argmin(q.values, axis=1)


def save_qtable(q: QTable, path) -> None:
    payload = {
        "shape": list(q.values.shape),
        "alpha": q.alpha,
        "gamma": q.gamma,
        "values": q.values.ravel().tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_qtable(path) -> QTable:
    with open(path) as fh:
        payload = json.load(fh)
    n_s, n_a = payload["shape"]
    q = QTable(n_s, n_a, payload["alpha"], payload["gamma"])
    q.values = np.array(payload["values"]).reshape(n_s, n_a)
    return q

"""Learned environment model M(s, a) used for Dyna-style planning.

Because the next state is a deterministic function of (state, action,
demand), transitions are modeled over the 11 demand classes rather than
over raw next states: the model recovers the demand implied by each
observed transition and estimates its distribution. Three variants share
one interface: counting (tabular), a deterministic network, and an
MC-dropout network. Only (s, a) pairs seen in the real environment may be
simulated from.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import nn
from .env import (
    Action,
    CostParams,
    InventoryState,
    state_index,
    step,
)

VARIANTS = ("tabular", "det-net", "mc-dropout")

_HIDDEN = (128, 64)
_COST_TOL = 1e-9


class UnvisitedPairError(KeyError):
    """Planning queried a (state, action) pair never observed for real."""


class InconsistentTransitionError(ValueError):
    """No demand in [0, d_max] explains the observed transition."""


@dataclass(frozen=True)
class ModelSpaces:
    cost_params: CostParams
    s_max: int = 10
    a_max: int = 10
    d_max: int = 10


class EnvModel:
    def __init__(
        self,
        spaces: ModelSpaces,
        variant: str = "tabular",
        rng: np.random.Generator | None = None,
        mc_samples: int = 10,
        transition_loss: str = "categorical",
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown model variant {variant!r}")
        self.spaces = spaces
        self.variant = variant
        self.mc_samples = mc_samples
        self.rng = rng if rng is not None else np.random.default_rng()
        # distinct observed (state, action) pairs, in first-seen order
        self.visited: dict[tuple[int, int], tuple[InventoryState, Action]] = {}
        if variant == "tabular":
            self.demand_counts = np.zeros(spaces.d_max + 1)
            self.cost_sums: dict[tuple[int, int], float] = {}
            self.cost_counts: dict[tuple[int, int], int] = {}
        else:
            dropout = 0.5 if variant == "mc-dropout" else 0.0
            head = "categorical" if transition_loss == "categorical" else "categorical_mse"
            sizes = [4, *_HIDDEN]
            self.transition_net = nn.Network(
                [*sizes, spaces.d_max + 1], dropout=dropout, head=head, rng=self.rng
            )
            self.cost_net = nn.Network(
                [*sizes, 1], dropout=dropout, head="regression", rng=self.rng
            )
            self.transition_adam = nn.AdamState(self.transition_net)
            self.cost_adam = nn.AdamState(self.cost_net)

    def _key(self, s: InventoryState, a: Action) -> tuple[int, int]:
        return (state_index(s, self.spaces.s_max), a.order_qty)

    def _encode(self, s: InventoryState, a: Action) -> np.ndarray:
        sp = self.spaces
        return np.array(
            [s.s1 / sp.s_max, s.s2 / sp.s_max, s.s3 / sp.s_max, a.order_qty / sp.a_max]
        )

    def copy(self) -> "EnvModel":
        import copy as _copy

        return _copy.deepcopy(self)


def recover_demand(
    spaces: ModelSpaces, s: InventoryState, a: Action, s_next: InventoryState, cost: float
) -> int:
    """Invert the day dynamics to find the demand behind a transition.

    When several demands lead to the same next state (stock-out
    saturation), the shortage term of the cost disambiguates; if it still
    ties, the smallest demand is returned.
    """
    matches = []
    for d in range(spaces.d_max + 1):
        out = step(s, a, d, spaces.cost_params, s_max=spaces.s_max, a_max=spaces.a_max)
        if out.next_state == s_next:
            matches.append((d, out.cost))
    if not matches:
        raise InconsistentTransitionError(
            f"no demand in [0, {spaces.d_max}] yields {s_next} from {s}, {a}"
        )
    for d, c in matches:
        if abs(c - cost) <= _COST_TOL:
            return d
    return matches[0][0]


def demand_to_next_state(
    spaces: ModelSpaces, s: InventoryState, a: Action, d: int
) -> InventoryState:
    return step(s, a, d, spaces.cost_params, s_max=spaces.s_max, a_max=spaces.a_max).next_state


def model_update(
    m: EnvModel, s: InventoryState, a: Action, s_next: InventoryState, cost: float
) -> None:
    """Fold one real transition into the model and the visit memory."""
    d = recover_demand(m.spaces, s, a, s_next, cost)
    key = m._key(s, a)
    if key not in m.visited:
        m.visited[key] = (s, a)
    if m.variant == "tabular":
        m.demand_counts[d] += 1
        m.cost_sums[key] = m.cost_sums.get(key, 0.0) + cost
        m.cost_counts[key] = m.cost_counts.get(key, 0) + 1
    else:
        x = m._encode(s, a)
        nn.train_step(m.transition_net, m.transition_adam, x[None, :], np.array([d]), rng=m.rng)
        nn.train_step(m.cost_net, m.cost_adam, x[None, :], np.array([[cost]]), rng=m.rng)


def _require_visited(m: EnvModel, s: InventoryState, a: Action) -> tuple[int, int]:
    key = m._key(s, a)
    if key not in m.visited:
        raise UnvisitedPairError(f"pair ({s}, {a}) never observed")
    return key


def transition_pmf(
    m: EnvModel, s: InventoryState, a: Action, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Estimated demand-class distribution for a visited pair."""
    _require_visited(m, s, a)
    if m.variant == "tabular":
        return m.demand_counts / m.demand_counts.sum()
    x = m._encode(s, a)
    if m.variant == "det-net":
        pmf = nn.forward(m.transition_net, x)
    else:
        pmf = nn.mc_predict(
            m.transition_net, x, samples=m.mc_samples, rng=rng if rng is not None else m.rng
        ).mean
    return pmf / pmf.sum()


def estimate_cost(
    m: EnvModel, s: InventoryState, a: Action, rng: np.random.Generator | None = None
) -> float:
    _require_visited(m, s, a)
    if m.variant == "tabular":
        key = m._key(s, a)
        return m.cost_sums[key] / m.cost_counts[key]
    x = m._encode(s, a)
    if m.variant == "det-net":
        return float(nn.forward(m.cost_net, x)[0])
    pred = nn.mc_predict(m.cost_net, x, samples=m.mc_samples, rng=rng if rng is not None else m.rng)
    return float(pred.mean[0])


def simulate(
    m: EnvModel, s: InventoryState, a: Action, rng: np.random.Generator
) -> tuple[InventoryState, float]:
    """Draw a simulated (next state, cost) for a previously visited pair."""
    _require_visited(m, s, a)
    pmf = transition_pmf(m, s, a, rng=rng)
    d = int(np.searchsorted(np.cumsum(pmf), rng.random(), side="right"))
    d = min(d, m.spaces.d_max)
    s_next = demand_to_next_state(m.spaces, s, a, d)
    return s_next, estimate_cost(m, s, a, rng=rng)


def transition_prob(
    m: EnvModel, s: InventoryState, a: Action, s_next: InventoryState
) -> float:
    """Model probability of landing in s_next from a visited (s, a)."""
    pmf = transition_pmf(m, s, a)
    total = 0.0
    for d in range(m.spaces.d_max + 1):
        if demand_to_next_state(m.spaces, s, a, d) == s_next:
            total += float(pmf[d])
    return total


def sample_visited(m: EnvModel, rng: np.random.Generator) -> tuple[InventoryState, Action]:
    """Uniform draw over the distinct observed (state, action) pairs."""
    if not m.visited:
        raise UnvisitedPairError("model has no observed pairs yet")
    pairs = list(m.visited.values())
    return pairs[int(rng.integers(len(pairs)))]


def save_model(m: EnvModel, path) -> None:
    meta = {
        "variant": m.variant,
        "mc_samples": m.mc_samples,
        "s_max": m.spaces.s_max,
        "a_max": m.spaces.a_max,
        "d_max": m.spaces.d_max,
        "cost_params": [
            m.spaces.cost_params.b1,
            m.spaces.cost_params.b2,
            m.spaces.cost_params.b3,
            m.spaces.cost_params.cs,
        ],
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    keys = list(m.visited)
    arrays["visited"] = np.array(keys, dtype=int).reshape(len(keys), 2)
    if m.variant == "tabular":
        arrays["demand_counts"] = m.demand_counts
        arrays["cost_sums"] = np.array([m.cost_sums[k] for k in keys])
        arrays["cost_counts"] = np.array([m.cost_counts[k] for k in keys])
    else:
        for prefix, net in (("t", m.transition_net), ("c", m.cost_net)):
            arrays[f"{prefix}_head"] = np.frombuffer(net.head.encode(), dtype=np.uint8)
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                arrays[f"{prefix}_w{i}"] = w
                arrays[f"{prefix}_b{i}"] = b
    np.savez(path, **arrays)


def load_model(path) -> EnvModel:
    from .env import state_from_index

    data = np.load(path)
    meta = json.loads(bytes(data["meta"]).decode())
    b1, b2, b3, cs = meta["cost_params"]
    spaces = ModelSpaces(
        cost_params=CostParams(b1, b2, b3, cs),
        s_max=meta["s_max"],
        a_max=meta["a_max"],
        d_max=meta["d_max"],
    )
    transition_loss = "categorical"
    if meta["variant"] != "tabular":
        transition_loss = (
            "categorical" if bytes(data["t_head"]).decode() == "categorical" else "mse"
        )
    m = EnvModel(
        spaces,
        variant=meta["variant"],
        mc_samples=meta["mc_samples"],
        transition_loss=transition_loss,
        rng=np.random.default_rng(0),
    )
    keys = [tuple(row) for row in data["visited"]]
    for s_idx, a_qty in keys:
        m.visited[(int(s_idx), int(a_qty))] = (
            state_from_index(int(s_idx), spaces.s_max),
            Action(int(a_qty)),
        )
    if m.variant == "tabular":
        m.demand_counts = data["demand_counts"]
        for k, c_sum, c_cnt in zip(keys, data["cost_sums"], data["cost_counts"]):
            key = (int(k[0]), int(k[1]))
            m.cost_sums[key] = float(c_sum)
            m.cost_counts[key] = int(c_cnt)
    else:
        for prefix, net in (("t", m.transition_net), ("c", m.cost_net)):
            net.weights = [data[f"{prefix}_w{i}"] for i in range(len(net.sizes) - 1)]
            net.biases = [data[f"{prefix}_b{i}"] for i in range(len(net.sizes) - 1)]
    return m

"""Perishable-inventory MDP with three shelf-life buckets and FIFO consumption.

A day unfolds as: yesterday's order arrives and all stock ages one day
(units that hit zero shelf-life are discarded), holding cost is charged on
the post-receive stock, demand is served oldest-first, and unmet demand is
lost and penalized. Holding cost is charged on the pre-sale inventory, not
the end-of-day inventory.
"""

from dataclasses import dataclass

S_MAX_DEFAULT = 10
A_MAX_DEFAULT = 10


class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on."""


@dataclass(frozen=True)
class InventoryState:
    """Stock levels bucketed by remaining shelf-life in days (1, 2, 3)."""

    s1: int
    s2: int
    s3: int

    def total(self) -> int:
        return self.s1 + self.s2 + self.s3


@dataclass(frozen=True)
class Action:
    """Order quantity placed at the end of the day, delivered next morning."""

    order_qty: int


@dataclass(frozen=True)
class CostParams:
    """Per-unit holding costs by shelf-life bucket and the shortage penalty.

    b1 > b2 >= b3 >= 0: the oldest stock is the most expensive to hold since
    it is discarded at the end of the day.
    """

    b1: float = 0.7
    b2: float = 0.3
    b3: float = 0.0
    cs: float = 1.0

    def __post_init__(self):
        if not (self.b1 > self.b2 >= self.b3 >= 0.0):
            raise DomainError(f"need b1 > b2 >= b3 >= 0, got {self}")
        if self.cs < 0.0:
            raise DomainError(f"shortage cost must be >= 0, got {self.cs}")


@dataclass(frozen=True)
class DayOutcome:
    next_state: InventoryState
    cost: float
    shortage: int
    demand_served: int


def _check_state(state: InventoryState, s_max: int) -> None:
    for v in (state.s1, state.s2, state.s3):
        if not (0 <= v <= s_max):
            raise DomainError(f"state component {v} outside [0, {s_max}]")


def age_and_receive(
    state: InventoryState,
    action: Action,
    s_max: int = S_MAX_DEFAULT,
    a_max: int = A_MAX_DEFAULT,
) -> InventoryState:
    """Shift every bucket down one day of shelf-life and receive the order.

    The previous one-day bucket is implicitly discarded; its cost was
    already charged through the b1 holding term.
    """
    _check_state(state, s_max)
    if not (0 <= action.order_qty <= a_max):
        raise DomainError(f"order {action.order_qty} outside [0, {a_max}]")
    return InventoryState(state.s2, state.s3, action.order_qty)


def period_cost(state: InventoryState, demand: int, params: CostParams) -> float:
    """Holding cost on the post-receive stock plus the lost-sales penalty."""
    if demand < 0:
        raise DomainError(f"demand must be >= 0, got {demand}")
    shortage = max(demand - state.total(), 0)
    return (
        params.b1 * state.s1
        + params.b2 * state.s2
        + params.b3 * state.s3
        + params.cs * shortage
    )


def consume_demand(state: InventoryState, demand: int) -> InventoryState:
    """Serve demand oldest stock first (FIFO over shelf-life buckets)."""
    if demand < 0:
        raise DomainError(f"demand must be >= 0, got {demand}")
    s1 = max(state.s1 - demand, 0)
    s2 = state.s2 if demand < state.s1 else max(state.s2 - (demand - state.s1), 0)
    if demand < state.s1 + state.s2:
        s3 = state.s3
    else:
        s3 = max(state.s3 - (demand - state.s1 - state.s2), 0)
    return InventoryState(s1, s2, s3)


def step(
    state: InventoryState,
    action: Action,
    demand: int,
    params: CostParams,
    s_max: int = S_MAX_DEFAULT,
    a_max: int = A_MAX_DEFAULT,
) -> DayOutcome:
    """Run one full day: receive/age, charge cost, serve demand."""
    aged = age_and_receive(state, action, s_max=s_max, a_max=a_max)
    cost = period_cost(aged, demand, params)
    after_sales = consume_demand(aged, demand)
    served = min(demand, aged.total())
    return DayOutcome(
        next_state=after_sales,
        cost=cost,
        shortage=demand - served,
        demand_served=served,
    )


def enumerate_states(s_max: int = S_MAX_DEFAULT) -> list[InventoryState]:
    """All states in the dense index order used by state_index."""
    n = s_max + 1
    return [
        InventoryState(s1, s2, s3)
        for s1 in range(n)
        for s2 in range(n)
        for s3 in range(n)
    ]


def enumerate_actions(a_max: int = A_MAX_DEFAULT) -> list[Action]:
    return [Action(q) for q in range(a_max + 1)]


def state_index(state: InventoryState, s_max: int = S_MAX_DEFAULT) -> int:
    """Dense index in [0, (s_max+1)^3), lexicographic in (s1, s2, s3)."""
    _check_state(state, s_max)
    n = s_max + 1
    return (state.s1 * n + state.s2) * n + state.s3


def state_from_index(index: int, s_max: int = S_MAX_DEFAULT) -> InventoryState:
    n = s_max + 1
    if not (0 <= index < n**3):
        raise DomainError(f"state index {index} outside [0, {n ** 3})")
    s3 = index % n
    s2 = (index // n) % n
    s1 = index // (n * n)
    return InventoryState(s1, s2, s3)


def num_states(s_max: int = S_MAX_DEFAULT) -> int:
    return (s_max + 1) ** 3


def num_actions(a_max: int = A_MAX_DEFAULT) -> int:
    return a_max + 1

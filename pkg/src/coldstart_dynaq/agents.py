"""Training loops: Q-learning, classic Dyna-Q, and adjusted Dyna-Q.

All three are the same loop with different schedules: Q-learning runs zero
planning steps, classic Dyna-Q keeps exploration and planning constant,
and adjusted Dyna-Q decays both with a search-then-convergence schedule of
the global environment-step counter. An optional warm start replaces the
zero Q-table and empty model with ones pre-trained on forecasted demand.

Randomness is split into three independent streams (environment demand,
exploration, planning) plus one for network dropout, so planning depth
never perturbs the real demand sequence.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .demand import DemandDistribution, sample
from .env import Action, InventoryState, num_actions, num_states, state_index, step
from .envmodel import (
    EnvModel,
    ModelSpaces,
    UnvisitedPairError,
    model_update,
    sample_visited,
    simulate,
    transition_prob,
)
from .metrics import RunMetrics
from .qcore import QTable, greedy_policy, q_update, select_action
from .schedule import StcSchedule, constant, stc_steps, stc_value

ALGORITHMS = ("q-learning", "dyna-q", "adjusted-dyna-q")


@dataclass
class AgentConfig:
    algorithm: str
    alpha: float = 0.3
    gamma: float = 0.9
    epsilon_schedule: StcSchedule = field(default_factory=lambda: constant(0.4))
    planning_schedule: StcSchedule = field(default_factory=lambda: constant(0.0))
    model_variant: str = "tabular"
    transition_loss: str = "categorical"
    warm_start: object = None
    horizon: int = 100
    episodes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        eps, plan = self.epsilon_schedule, self.planning_schedule
        if self.algorithm == "q-learning":
            if not (plan.initial == plan.floor == 0.0):
                raise ValueError("q-learning requires a constant-zero planning schedule")
        elif self.algorithm == "dyna-q":
            if eps.initial != eps.floor or plan.initial != plan.floor:
                raise ValueError("classic dyna-q requires constant epsilon and planning")


@dataclass
class TrainedAgent:
    q: QTable
    model: EnvModel
    episode_metrics: list
    planning_steps: int
    probe_trace: list = field(default_factory=list)


def _probe(model: EnvModel, pair) -> float | None:
    s, a, s_next = pair
    try:
        return transition_prob(model, s, a, s_next)
    except UnvisitedPairError:
        return None


def train(
    config: AgentConfig,
    true_demand: DemandDistribution,
    spaces: ModelSpaces,
    initial_state: InventoryState,
    probe_pair: tuple | None = None,
) -> TrainedAgent:
    """Run the configured training loop against the true demand process.

    probe_pair, when given as (state, action, next_state), logs the model's
    transition-probability estimate for that pair after every environment
    step (None while the pair is still unvisited).
    """
    ss = np.random.SeedSequence(config.seed)
    env_rng, explore_rng, plan_rng, model_rng = (
        np.random.default_rng(child) for child in ss.spawn(4)
    )
    n_s, n_a = num_states(spaces.s_max), num_actions(spaces.a_max)
    if config.warm_start is not None:
        q = config.warm_start.q0.copy()
        q.alpha, q.gamma = config.alpha, config.gamma
        model = config.warm_start.m0.copy()
        model.rng = model_rng
    else:
        q = QTable(n_s, n_a, config.alpha, config.gamma)
        model = EnvModel(
            spaces,
            variant=config.model_variant,
            rng=model_rng,
            transition_loss=config.transition_loss,
        )

    t = 0
    planning_total = 0
    episode_metrics = []
    probe_trace = []
    for _ in range(config.episodes):
        s = initial_state
        started = time.perf_counter()
        daily_costs = []
        shortage_days = 0
        holding = 0.0
        for _ in range(config.horizon):
            eps = stc_value(config.epsilon_schedule, t)
            n_plan = stc_steps(config.planning_schedule, t)
            t += 1

            s_idx = state_index(s, spaces.s_max)
            a_idx = select_action(q, s_idx, eps, explore_rng)
            d = sample(true_demand, env_rng)
            out = step(
                s, Action(a_idx), d, spaces.cost_params,
                s_max=spaces.s_max, a_max=spaces.a_max,
            )
            q_update(q, s_idx, a_idx, out.cost, state_index(out.next_state, spaces.s_max))
            model_update(model, s, Action(a_idx), out.next_state, out.cost)

            for _ in range(n_plan):
                ps, pa = sample_visited(model, plan_rng)
                sim_next, sim_cost = simulate(model, ps, pa, plan_rng)
                q_update(
                    q,
                    state_index(ps, spaces.s_max),
                    pa.order_qty,
                    sim_cost,
                    state_index(sim_next, spaces.s_max),
                )
            planning_total += n_plan

            daily_costs.append(out.cost)
            shortage_days += out.shortage > 0
            holding += s.s2 + s.s3 + a_idx
            if probe_pair is not None:
                probe_trace.append(_probe(model, probe_pair))
            s = out.next_state
        episode_metrics.append(
            RunMetrics(
                total_cost=float(sum(daily_costs)),
                daily_costs=daily_costs,
                shortage_fraction=shortage_days / config.horizon,
                avg_holding=holding / config.horizon,
                wall_seconds=time.perf_counter() - started,
            )
        )
    return TrainedAgent(
        q=q,
        model=model,
        episode_metrics=episode_metrics,
        planning_steps=planning_total,
        probe_trace=probe_trace,
    )


def evaluate(
    agent: TrainedAgent,
    true_demand: DemandDistribution,
    spaces: ModelSpaces,
    initial_state: InventoryState,
    days: int,
    repetitions: int,
    rng: np.random.Generator,
) -> list[RunMetrics]:
    """Run the deterministic greedy policy against fresh demand draws."""
    policy = greedy_policy(agent.q)
    results = []
    for _ in range(repetitions):
        s = initial_state
        started = time.perf_counter()
        daily_costs = []
        shortage_days = 0
        holding = 0.0
        for _ in range(days):
            a_idx = int(policy[state_index(s, spaces.s_max)])
            d = sample(true_demand, rng)
            out = step(
                s, Action(a_idx), d, spaces.cost_params,
                s_max=spaces.s_max, a_max=spaces.a_max,
            )
            daily_costs.append(out.cost)
            shortage_days += out.shortage > 0
            holding += s.s2 + s.s3 + a_idx
            s = out.next_state
        results.append(
            RunMetrics(
                total_cost=float(sum(daily_costs)),
                daily_costs=daily_costs,
                shortage_fraction=shortage_days / days,
                avg_holding=holding / days,
                wall_seconds=time.perf_counter() - started,
            )
        )
    return results

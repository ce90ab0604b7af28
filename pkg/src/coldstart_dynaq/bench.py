"""Experiment harness: algorithm comparisons, the two one-month scenarios,
and transition-probability tracking, with reproducible record files.

Every run's randomness derives from the master seed through spawn keys, so
adding runs never changes the randomness of existing ones. Record files
(JSON lines + CSV) contain only deterministic quantities; wall-clock
timings go to a separate sidecar since they are hardware-dependent. The
testable surrogate for training time is the cumulative planning-step
count, which is a deterministic function of the schedules.
"""

import csv
import datetime as dt
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .agents import AgentConfig, TrainedAgent, evaluate, train
from .demand import (
    DemandDistribution,
    discretized_gamma,
    load_transactions,
    synthesize_history,
)
from .env import Action, CostParams, InventoryState
from .envmodel import ModelSpaces
from .forecast import Forecaster, WarmStart, build_warm_start, generate_offline, train_forecaster
from .metrics import RunMetrics
from .schedule import StcSchedule, constant, stc_steps

# The five benchmark configurations compared in the one-month scenarios.
SCENARIO_CONFIGS = (
    ("adjusted-dyna-q", True),
    ("adjusted-dyna-q", False),
    ("dyna-q", True),
    ("dyna-q", False),
    ("q-learning", False),
)

# Monitored transition for probability tracking: post-sale stock (0,0,3), order 2,
# demand 2 lands in (0,1,2).
PROBE_STATE = InventoryState(0, 0, 3)
PROBE_ACTION = Action(2)
PROBE_NEXT = InventoryState(0, 1, 2)
PROBE_DEMAND_CLASS = 2


@dataclass
class ScheduleParams:
    alpha: float
    gamma: float
    eps0: float
    eps_min: float
    eps_smoothing: float
    n0: float
    n_min: float
    n_smoothing: float


TABLE1_PARAMS = ScheduleParams(0.3, 0.9, 0.4, 0.1, 7500.0, 100.0, 10.0, 5000.0)
SCENARIO1_PARAMS = ScheduleParams(0.1, 0.9, 0.4, 0.0, 1000.0, 100.0, 0.0, 1000.0)
SCENARIO2_PARAMS = ScheduleParams(0.1, 0.9, 0.3, 0.1, 1000.0, 20.0, 10.0, 1000.0)


@dataclass
class ExperimentSpec:
    name: str = "experiment"
    out_dir: str | None = None
    master_seed: int = 0
    workers: int = 1

    mu: float = 5.0
    sigma2: float = 5.0
    d_max: int = 10
    binning: str = "center"
    cost_params: CostParams = field(default_factory=CostParams)
    s_max: int = 10
    a_max: int = 10
    initial_state: InventoryState = field(default_factory=lambda: InventoryState(0, 0, 5))

    model_variant: str = "tabular"
    transition_loss: str = "categorical"
    algorithms: tuple = ("adjusted-dyna-q", "dyna-q", "q-learning")
    repetitions: int = 20
    train_episodes: int = 100
    horizon: int = 100
    test_days: int = 100
    test_repetitions: int = 1

    # transfer-learning source product (synthetic stand-in by default)
    dataset_path: str | None = None
    product_name: str = "Boule 200g"
    source_mean: float = 4.48
    source_var: float = 5.0
    source_days: int = 500
    window: int = 7
    forecaster_epochs: int = 200
    offline_horizon: int = 10
    warm_epochs: int = 50
    warm_epsilon: float = 0.2

    def spaces(self) -> ModelSpaces:
        return ModelSpaces(
            cost_params=self.cost_params,
            s_max=self.s_max,
            a_max=self.a_max,
            d_max=self.d_max,
        )

    def true_demand(self) -> DemandDistribution:
        return discretized_gamma(self.mu, self.sigma2, self.d_max, binning=self.binning)


def seed_int(master_seed: int, *key: int) -> int:
    """Stable per-run integer seed derived from the master seed."""
    return int(np.random.SeedSequence(master_seed, spawn_key=key).generate_state(1)[0])


def derived_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def agent_config(
    params: ScheduleParams,
    algorithm: str,
    seed: int,
    spec: ExperimentSpec,
    episodes: int,
    horizon: int,
    warm_start: WarmStart | None = None,
) -> AgentConfig:
    """Schedule wiring per algorithm: adjusted decays via STC, classic holds
    the initial values constant, Q-learning never plans."""
    if algorithm == "adjusted-dyna-q":
        eps = StcSchedule(params.eps0, params.eps_min, params.eps_smoothing)
        plan = StcSchedule(params.n0, params.n_min, params.n_smoothing)
    elif algorithm == "dyna-q":
        eps = constant(params.eps0)
        plan = constant(params.n0)
    elif algorithm == "q-learning":
        eps = constant(params.eps0)
        plan = constant(0.0)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return AgentConfig(
        algorithm=algorithm,
        alpha=params.alpha,
        gamma=params.gamma,
        epsilon_schedule=eps,
        planning_schedule=plan,
        model_variant=spec.model_variant,
        transition_loss=spec.transition_loss,
        warm_start=warm_start,
        horizon=horizon,
        episodes=episodes,
        seed=seed,
    )


def total_planning_steps(plan: StcSchedule, steps: int) -> int:
    """Deterministic cumulative planning-step count over a horizon."""
    return sum(stc_steps(plan, t) for t in range(steps))


def source_series(spec: ExperimentSpec):
    """Demand history of the similar existing product: real transactions if
    a dataset path is configured, synthetic draws otherwise."""
    if spec.dataset_path is not None:
        return load_transactions(spec.dataset_path, spec.product_name)
    dist = discretized_gamma(spec.source_mean, spec.source_var, spec.d_max, binning=spec.binning)
    rng = derived_rng(spec.master_seed, 90001)
    return synthesize_history(dist, spec.source_days, dt.date(2021, 1, 1), rng)


def fit_forecaster(spec: ExperimentSpec) -> Forecaster:
    return train_forecaster(
        source_series(spec),
        window=spec.window,
        epochs=spec.forecaster_epochs,
        rng=derived_rng(spec.master_seed, 90002),
        d_max=spec.d_max,
    )


def make_warm_start(
    spec: ExperimentSpec, forecaster: Forecaster, params: ScheduleParams, rep: int
) -> WarmStart:
    offline = generate_offline(
        forecaster,
        start_date=forecaster.history.dates[-1] + dt.timedelta(days=1),
        h=spec.offline_horizon,
        rng=derived_rng(spec.master_seed, 90003, rep),
    )
    return build_warm_start(
        offline,
        spec.spaces(),
        alpha=params.alpha,
        gamma=params.gamma,
        epochs=spec.warm_epochs,
        epsilon=spec.warm_epsilon,
        model_variant=spec.model_variant,
        transition_loss=spec.transition_loss,
        initial_state=spec.initial_state,
        seed=seed_int(spec.master_seed, 90004, rep),
    )


def _train_stats(agent: TrainedAgent) -> dict:
    totals = [m.total_cost for m in agent.episode_metrics]
    return {
        "avg_total_cost": float(np.mean(totals)),
        "episode_total_costs": [round(t, 10) for t in totals],
        "shortage_percentage": float(np.mean([m.shortage_fraction for m in agent.episode_metrics])),
        "avg_holding": float(np.mean([m.avg_holding for m in agent.episode_metrics])),
        "total_cost_variance": float(np.var(totals, ddof=1)) if len(totals) > 1 else 0.0,
        "planning_steps": agent.planning_steps,
    }


def _eval_stats(results: list[RunMetrics]) -> dict:
    totals = [m.total_cost for m in results]
    return {
        "avg_total_cost": float(np.mean(totals)),
        "total_costs": [round(t, 10) for t in totals],
        "shortage_percentage": float(np.mean([m.shortage_fraction for m in results])),
        "avg_holding": float(np.mean([m.avg_holding for m in results])),
        "total_cost_variance": float(np.var(totals, ddof=1)) if len(totals) > 1 else 0.0,
    }


def _wall_seconds(agent: TrainedAgent) -> float:
    return float(sum(m.wall_seconds for m in agent.episode_metrics))


# ---------------------------------------------------------------- table 1


def _table1_one_seed(spec: ExperimentSpec, rep: int) -> list[dict]:
    demand_dist = spec.true_demand()
    spaces = spec.spaces()
    records = []
    for j, algorithm in enumerate(spec.algorithms):
        config = agent_config(
            TABLE1_PARAMS,
            algorithm,
            seed_int(spec.master_seed, rep, j),
            spec,
            spec.train_episodes,
            spec.horizon,
        )
        agent = train(config, demand_dist, spaces, spec.initial_state)
        # same test demand stream for every algorithm: paired comparison
        test = evaluate(
            agent, demand_dist, spaces, spec.initial_state,
            spec.test_days, spec.test_repetitions,
            derived_rng(spec.master_seed, rep, 500),
        )
        records.append({
            "experiment": "table1",
            "replication": rep,
            "algorithm": algorithm,
            "sigma2": spec.sigma2,
            "model_variant": spec.model_variant,
            "avg_daily_cost": float(np.mean([m.total_cost / spec.test_days for m in test])),
            "train": _train_stats(agent),
            "wall_train_seconds": _wall_seconds(agent),
        })
    return records


def improvement(baseline: float, value: float) -> float:
    """(baseline - value) / baseline, the relative improvement fraction."""
    return (baseline - value) / baseline


def run_table1(spec: ExperimentSpec) -> dict:
    """Train/test comparison of the configured algorithms at one sigma^2."""
    nested = _map_reps(_table1_one_seed, spec)
    records = [r for group in nested for r in group]

    total_steps = spec.train_episodes * spec.horizon
    plan_counts = {
        "adjusted-dyna-q": total_planning_steps(
            StcSchedule(TABLE1_PARAMS.n0, TABLE1_PARAMS.n_min, TABLE1_PARAMS.n_smoothing),
            total_steps,
        ),
        "dyna-q": round(TABLE1_PARAMS.n0) * total_steps,
        "q-learning": 0,
    }
    summary = {}
    for algorithm in spec.algorithms:
        costs = [r["avg_daily_cost"] for r in records if r["algorithm"] == algorithm]
        summary[algorithm] = {
            "mean_daily_cost": float(np.mean(costs)),
            "planning_steps": plan_counts[algorithm],
        }
    if "q-learning" in summary:
        base = summary["q-learning"]["mean_daily_cost"]
        for algorithm in spec.algorithms:
            summary[algorithm]["cost_improvement_vs_qlearning"] = improvement(
                base, summary[algorithm]["mean_daily_cost"]
            )
    if "dyna-q" in summary:
        base_steps = summary["dyna-q"]["planning_steps"]
        for algorithm in spec.algorithms:
            summary[algorithm]["planning_improvement_vs_dynaq"] = (
                improvement(base_steps, summary[algorithm]["planning_steps"])
                if base_steps else 0.0
            )
    report = {"experiment": "table1", "spec_name": spec.name, "summary": summary}
    _emit(spec, records, report, _table_rows_table1(spec, summary))
    return {"records": records, "report": report}


def _table_rows_table1(spec, summary):
    rows = []
    for algorithm, stats in summary.items():
        rows.append({
            "algorithm": algorithm,
            "sigma2": spec.sigma2,
            "model": spec.model_variant,
            "mean_daily_cost": f"{stats['mean_daily_cost']:.4f}",
            "cost_improvement_vs_qlearning": f"{stats.get('cost_improvement_vs_qlearning', 0.0):.4f}",
            "planning_steps": stats["planning_steps"],
            "planning_improvement_vs_dynaq": f"{stats.get('planning_improvement_vs_dynaq', 0.0):.4f}",
        })
    return rows


# ------------------------------------------------------------- scenarios


def _scenario_one_rep(spec: ExperimentSpec, params: ScheduleParams, testing: bool,
                      forecaster: Forecaster, rep: int) -> list[dict]:
    """One harness replication of a scenario.

    Training is a single cold-start month: horizon steps from scratch, all
    the history a newly launched product has. Scenario 1 repeats that
    training train_episodes times independently and reports statistics
    across the runs; scenario 2 trains once and tests the greedy policy
    test_repetitions times.
    """
    demand_dist = spec.true_demand()
    spaces = spec.spaces()
    warm = make_warm_start(spec, forecaster, params, rep)
    runs = 1 if testing else spec.train_episodes
    records = []
    for j, (algorithm, transfer) in enumerate(SCENARIO_CONFIGS):
        agents = []
        for i in range(runs):
            config = agent_config(
                params,
                algorithm,
                seed_int(spec.master_seed, rep, j, i),
                spec,
                episodes=1,
                horizon=spec.horizon,
                warm_start=warm if transfer else None,
            )
            agents.append(train(config, demand_dist, spaces, spec.initial_state))
        all_metrics = [a.episode_metrics[0] for a in agents]
        totals = [m.total_cost for m in all_metrics]
        record = {
            "experiment": "scenario2" if testing else "scenario1",
            "replication": rep,
            "algorithm": algorithm,
            "transfer": transfer,
            "sigma2": spec.sigma2,
            "model_variant": spec.model_variant,
            "train": {
                "avg_total_cost": float(np.mean(totals)),
                "episode_total_costs": [round(t, 10) for t in totals],
                "shortage_percentage": float(np.mean([m.shortage_fraction for m in all_metrics])),
                "avg_holding": float(np.mean([m.avg_holding for m in all_metrics])),
                "total_cost_variance": float(np.var(totals, ddof=1)) if runs > 1 else 0.0,
                "planning_steps": sum(a.planning_steps for a in agents),
            },
            "wall_train_seconds": float(sum(_wall_seconds(a) for a in agents)),
        }
        if testing:
            test = evaluate(
                agents[0], demand_dist, spaces, spec.initial_state,
                spec.test_days, spec.test_repetitions,
                derived_rng(spec.master_seed, rep, 500, j),
            )
            record["test"] = _eval_stats(test)
        records.append(record)
    return records


def _scenario_report(spec: ExperimentSpec, records: list[dict], testing: bool) -> dict:
    key = "test" if testing else "train"
    summary = {}
    for algorithm, transfer in SCENARIO_CONFIGS:
        rows = [
            r for r in records
            if r["algorithm"] == algorithm and r["transfer"] == transfer
        ]
        summary[f"{algorithm}|transfer={transfer}"] = {
            "avg_total_cost": float(np.mean([r[key]["avg_total_cost"] for r in rows])),
            "shortage_percentage": float(np.mean([r[key]["shortage_percentage"] for r in rows])),
            "avg_holding": float(np.mean([r[key]["avg_holding"] for r in rows])),
            "total_cost_variance": float(np.mean([r[key]["total_cost_variance"] for r in rows])),
        }
    return {
        "experiment": "scenario2" if testing else "scenario1",
        "spec_name": spec.name,
        "summary": summary,
    }


def _scenario_defaults(spec: ExperimentSpec) -> ExperimentSpec:
    return replace(spec, horizon=30, test_days=30, test_repetitions=100)


def run_scenario1(spec: ExperimentSpec) -> dict:
    """Training-month comparison of the five configurations (cost, shortage,
    holding, across-episode cost variance)."""
    spec = _scenario_defaults(spec)
    forecaster = fit_forecaster(spec)
    nested = _map_reps(_scenario_one_rep, spec, SCENARIO1_PARAMS, False, forecaster)
    records = [r for group in nested for r in group]
    report = _scenario_report(spec, records, testing=False)
    _emit(spec, records, report, _scenario_rows(report, "train"))
    return {"records": records, "report": report}


def run_scenario2(spec: ExperimentSpec) -> dict:
    """Scenario-1-style training then a 30-day greedy test repeated 100x."""
    spec = _scenario_defaults(spec)
    forecaster = fit_forecaster(spec)
    nested = _map_reps(_scenario_one_rep, spec, SCENARIO2_PARAMS, True, forecaster)
    records = [r for group in nested for r in group]
    report = _scenario_report(spec, records, testing=True)
    _emit(spec, records, report, _scenario_rows(report, "test"))
    return {"records": records, "report": report}


def _scenario_rows(report, phase):
    rows = []
    for name, stats in report["summary"].items():
        algorithm, transfer = name.split("|transfer=")
        rows.append({
            "algorithm": algorithm,
            "transfer": transfer,
            "phase": phase,
            "avg_total_cost": f"{stats['avg_total_cost']:.4f}",
            "shortage_percentage": f"{stats['shortage_percentage']:.4f}",
            "avg_holding": f"{stats['avg_holding']:.4f}",
            "total_cost_variance": f"{stats['total_cost_variance']:.4f}",
        })
    return rows


# ----------------------------------------------------------------- fig 3


def _fig3_one_rep(spec: ExperimentSpec, forecaster: Forecaster, rep: int) -> list[dict]:
    demand_dist = spec.true_demand()
    spaces = spec.spaces()
    warm = make_warm_start(spec, forecaster, SCENARIO2_PARAMS, rep)
    probe = (PROBE_STATE, PROBE_ACTION, PROBE_NEXT)
    records = []
    for j, (algorithm, transfer) in enumerate(SCENARIO_CONFIGS):
        config = agent_config(
            SCENARIO2_PARAMS,
            algorithm,
            seed_int(spec.master_seed, rep, j),
            spec,
            episodes=1,
            horizon=spec.horizon,
            warm_start=warm if transfer else None,
        )
        agent = train(config, demand_dist, spaces, spec.initial_state, probe_pair=probe)
        records.append({
            "experiment": "fig3",
            "replication": rep,
            "algorithm": algorithm,
            "transfer": transfer,
            "trace": [None if p is None else round(p, 12) for p in agent.probe_trace],
        })
    return records


def run_fig3(spec: ExperimentSpec) -> dict:
    """Per-iteration model estimates of the monitored transition, plus the
    true probability line from the discretized-Gamma pmf."""
    spec = replace(spec, horizon=30)
    forecaster = fit_forecaster(spec)
    nested = _map_reps(_fig3_one_rep, spec, forecaster)
    records = [r for group in nested for r in group]
    true_value = float(spec.true_demand().pmf[PROBE_DEMAND_CLASS])
    report = {
        "experiment": "fig3",
        "spec_name": spec.name,
        "true_probability": true_value,
        "iterations": spec.horizon,
    }
    rows = []
    for r in records:
        for it, p in enumerate(r["trace"]):
            rows.append({
                "replication": r["replication"],
                "algorithm": r["algorithm"],
                "transfer": r["transfer"],
                "iteration": it + 1,
                "estimate": "" if p is None else f"{p:.6f}",
                "true_probability": f"{true_value:.6f}",
            })
    _emit(spec, records, report, rows)
    return {"records": records, "report": report, "true_probability": true_value}


# ------------------------------------------------------------- plumbing


def _map_reps(fn, spec: ExperimentSpec, *args):
    reps = range(spec.repetitions)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(fn, *zip(*[(spec, *args, r) for r in reps])))
    return [fn(spec, *args, r) for r in reps]


def _strip_timings(record: dict) -> dict:
    return {k: v for k, v in record.items() if not k.startswith("wall_")}


def _emit(spec: ExperimentSpec, records, report, table_rows) -> None:
    if spec.out_dir is None:
        return
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = report["experiment"]
    with open(out / f"{prefix}_records.jsonl", "w") as fh:
        for record in records:
            fh.write(json.dumps(_strip_timings(record), sort_keys=True) + "\n")
    with open(out / f"{prefix}_report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if table_rows:
        with open(out / f"{prefix}_summary.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(table_rows[0]))
            writer.writeheader()
            writer.writerows(table_rows)
    timings = [
        {"replication": r.get("replication"), "algorithm": r.get("algorithm"),
         "wall_train_seconds": r.get("wall_train_seconds")}
        for r in records if "wall_train_seconds" in r
    ]
    if timings:
        with open(out / f"{prefix}_timings.json", "w") as fh:
            json.dump(timings, fh, indent=2)
            fh.write("\n")

import numpy as np
import pytest

from coldstart_dynaq.demand import discretized_gamma, point_mass, sample
from coldstart_dynaq.env import Action, CostParams, InventoryState, enumerate_states, step
from coldstart_dynaq.envmodel import (
    EnvModel,
    InconsistentTransitionError,
    ModelSpaces,
    UnvisitedPairError,
    load_model,
    model_update,
    recover_demand,
    sample_visited,
    save_model,
    simulate,
    transition_prob,
)

SPACES = ModelSpaces(cost_params=CostParams())
PAIR_S = InventoryState(0, 0, 3)
PAIR_A = Action(2)
PAIR_NEXT = InventoryState(0, 1, 2)


def observe(m, s, a, d):
    out = step(s, a, d, SPACES.cost_params)
    model_update(m, s, a, out.next_state, out.cost)
    return out


class TestRecoverDemand:
    def test_round_trip_all_demands(self):
        for s in enumerate_states(s_max=2):
            for a in (Action(0), Action(2), Action(5)):
                for d in range(11):
                    out = step(s, a, d, SPACES.cost_params)
                    assert recover_demand(SPACES, s, a, out.next_state, out.cost) == d

    def test_inconsistent_transition(self):
        with pytest.raises(InconsistentTransitionError):
            recover_demand(SPACES, InventoryState(0, 0, 0), Action(0), InventoryState(5, 5, 5), 0.0)


class TestTabularUpdate:
    def test_single_observation_point_mass(self):
        m = EnvModel(SPACES)
        observe(m, PAIR_S, PAIR_A, 2)
        pmf = m.demand_counts / m.demand_counts.sum()
        assert pmf[2] == 1.0

    def test_empirical_frequencies(self):
        m = EnvModel(SPACES)
        for d in (2, 2, 3):
            observe(m, PAIR_S, PAIR_A, d)
        pmf = m.demand_counts / m.demand_counts.sum()
        assert pmf[2] == pytest.approx(2 / 3)
        assert pmf[3] == pytest.approx(1 / 3)

    def test_monte_carlo_convergence(self):
        dist = discretized_gamma(5.0, 5.0, 10)
        rng = np.random.default_rng(0)
        m = EnvModel(SPACES)
        for _ in range(10**4):
            observe(m, PAIR_S, PAIR_A, sample(dist, rng))
        pmf = m.demand_counts / m.demand_counts.sum()
        assert 0.5 * np.abs(pmf - dist.pmf).sum() < 0.03


class TestSimulate:
    def test_deterministic_composition(self):
        m = EnvModel(SPACES)
        observe(m, PAIR_S, PAIR_A, 2)
        rng = np.random.default_rng(1)
        for _ in range(20):
            s_next, _ = simulate(m, PAIR_S, PAIR_A, rng)
            assert s_next == PAIR_NEXT

    def test_cost_running_mean_of_constant(self):
        m = EnvModel(SPACES)
        out = observe(m, PAIR_S, PAIR_A, 2)
        observe(m, PAIR_S, PAIR_A, 2)
        _, c = simulate(m, PAIR_S, PAIR_A, np.random.default_rng(2))
        assert c == pytest.approx(out.cost)

    def test_seeded_reproducibility(self):
        dist = discretized_gamma(5.0, 3.0, 10)
        m = EnvModel(SPACES)
        rng = np.random.default_rng(3)
        for _ in range(50):
            observe(m, PAIR_S, PAIR_A, sample(dist, rng))
        a = [simulate(m, PAIR_S, PAIR_A, np.random.default_rng(4)) for _ in range(10)]
        b = [simulate(m, PAIR_S, PAIR_A, np.random.default_rng(4)) for _ in range(10)]
        assert a == b

    def test_unvisited_pair_errors(self):
        m = EnvModel(SPACES)
        with pytest.raises(UnvisitedPairError):
            simulate(m, PAIR_S, PAIR_A, np.random.default_rng(0))

    def test_outputs_reachable_states(self):
        dist = discretized_gamma(5.0, 5.0, 10)
        m = EnvModel(SPACES)
        rng = np.random.default_rng(5)
        for _ in range(100):
            observe(m, PAIR_S, PAIR_A, sample(dist, rng))
        reachable = {
            step(PAIR_S, PAIR_A, d, SPACES.cost_params).next_state for d in range(11)
        }
        for _ in range(100):
            s_next, _ = simulate(m, PAIR_S, PAIR_A, rng)
            assert s_next in reachable


class TestTransitionProb:
    def test_point_mass(self):
        m = EnvModel(SPACES)
        observe(m, PAIR_S, PAIR_A, 2)
        assert transition_prob(m, PAIR_S, PAIR_A, PAIR_NEXT) == 1.0

    def test_unreachable_next_state(self):
        m = EnvModel(SPACES)
        observe(m, PAIR_S, PAIR_A, 2)
        assert transition_prob(m, PAIR_S, PAIR_A, InventoryState(9, 9, 9)) == 0.0

    def test_unvisited_error(self):
        m = EnvModel(SPACES)
        with pytest.raises(UnvisitedPairError):
            transition_prob(m, PAIR_S, PAIR_A, PAIR_NEXT)

    def test_concentration_after_30_days(self):
        dist = discretized_gamma(5.0, 5.0, 10)
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            m = EnvModel(SPACES)
            for _ in range(30):
                observe(m, PAIR_S, PAIR_A, sample(dist, rng))
            est = transition_prob(m, PAIR_S, PAIR_A, PAIR_NEXT)
            hits += abs(est - dist.pmf[2]) <= 0.1
        assert hits >= 80


class TestSampleVisited:
    def test_single_pair(self):
        m = EnvModel(SPACES)
        observe(m, PAIR_S, PAIR_A, 2)
        assert sample_visited(m, np.random.default_rng(0)) == (PAIR_S, PAIR_A)

    def test_two_pairs_balanced(self):
        m = EnvModel(SPACES)
        observe(m, PAIR_S, PAIR_A, 2)
        observe(m, InventoryState(1, 1, 1), Action(5), 0)
        rng = np.random.default_rng(1)
        draws = [sample_visited(m, rng)[1].order_qty for _ in range(10**4)]
        frac = draws.count(2) / len(draws)
        assert 0.47 < frac < 0.53

    def test_empty_memory(self):
        m = EnvModel(SPACES)
        with pytest.raises(UnvisitedPairError):
            sample_visited(m, np.random.default_rng(0))


@pytest.mark.parametrize("variant", ["det-net", "mc-dropout"])
class TestNetVariants:
    def test_pmf_valid_after_updates(self, variant):
        m = EnvModel(SPACES, variant=variant, rng=np.random.default_rng(6))
        dist = discretized_gamma(5.0, 5.0, 10)
        rng = np.random.default_rng(7)
        for _ in range(30):
            observe(m, PAIR_S, PAIR_A, sample(dist, rng))
        pmf = [
            transition_prob(m, PAIR_S, PAIR_A, step(PAIR_S, PAIR_A, d, SPACES.cost_params).next_state)
            for d in range(11)
        ]
        assert all(p >= 0 for p in pmf)

    def test_simulate_runs(self, variant):
        m = EnvModel(SPACES, variant=variant, rng=np.random.default_rng(8))
        observe(m, PAIR_S, PAIR_A, 2)
        s_next, cost = simulate(m, PAIR_S, PAIR_A, np.random.default_rng(9))
        assert isinstance(cost, float)
        reachable = {
            step(PAIR_S, PAIR_A, d, SPACES.cost_params).next_state for d in range(11)
        }
        assert s_next in reachable

    def test_net_learns_point_mass(self, variant):
        if variant == "mc-dropout":
            pytest.skip("dropout keeps the categorical output diffuse at this scale")
        m = EnvModel(SPACES, variant=variant, rng=np.random.default_rng(10))
        for _ in range(300):
            observe(m, PAIR_S, PAIR_A, 2)
        assert transition_prob(m, PAIR_S, PAIR_A, PAIR_NEXT) > 0.8


@pytest.mark.parametrize("variant", ["tabular", "det-net"])
def test_save_load_round_trip(tmp_path, variant):
    m = EnvModel(SPACES, variant=variant, rng=np.random.default_rng(11))
    dist = discretized_gamma(5.0, 3.0, 10)
    rng = np.random.default_rng(12)
    for _ in range(20):
        observe(m, PAIR_S, PAIR_A, sample(dist, rng))
    path = tmp_path / "model.npz"
    save_model(m, path)
    loaded = load_model(path)
    assert loaded.variant == m.variant
    assert set(loaded.visited) == set(m.visited)
    assert transition_prob(loaded, PAIR_S, PAIR_A, PAIR_NEXT) == pytest.approx(
        transition_prob(m, PAIR_S, PAIR_A, PAIR_NEXT)
    )

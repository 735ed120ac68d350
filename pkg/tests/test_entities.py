"""Entity models: demand process, stage costs, storage dynamics, generators."""

import numpy as np
import pytest

from fdsm.entities import (AggregatorSpec, DemandProcess, GeneratorSpec,
                           aggregator_stage_cost, build_aggregator_mdp,
                           build_generator_mdp, snap_index,
                           storage_transition)


@pytest.fixture(scope="module")
def default_demand():
    return DemandProcess()


def test_peak_demand_statistics(default_demand):
    # first aggregator, hour 18: mean 50, range 5 (peak window)
    assert default_demand.mean(0, 18) == pytest.approx(50.0)
    assert default_demand.range_(18) == pytest.approx(5.0)
    # third aggregator, hour 3: mean 25 + 2*0.5 = 26, range 2 (off-peak)
    assert default_demand.mean(2, 3) == pytest.approx(26.0)
    assert default_demand.range_(3) == pytest.approx(2.0)


def test_demand_samples_within_interval(default_demand):
    rng = np.random.default_rng(0)
    grid = np.linspace(20.0, 60.0, 41)   # 1 MW steps, snap error < 1
    for _ in range(200):
        d = grid[default_demand.sample(0, 18, rng, grid)]
        assert 45.0 - 0.5 <= d <= 55.0 + 0.5
        d = grid[default_demand.sample(2, 3, rng, grid)]
        assert 24.0 - 0.5 <= d <= 28.0 + 0.5


def test_zero_range_is_deterministic():
    dp = DemandProcess(peak_range=0.0, off_range=0.0)
    rng = np.random.default_rng(1)
    grid = np.linspace(0.0, 60.0, 61)
    assert grid[dp.sample(0, 18, rng, grid)] == pytest.approx(50.0)


def test_kernel_is_a_distribution(default_demand):
    grid = default_demand.grid(0, 5)
    for hour in range(24):
        p = default_demand.kernel(0, hour, grid)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(p >= 0)


def test_kernel_matches_sampling_frequencies(default_demand):
    grid = default_demand.grid(0, 3)
    p = default_demand.kernel(0, 18, grid)
    rng = np.random.default_rng(2)
    counts = np.zeros(len(grid))
    n = 20000
    for _ in range(n):
        counts[default_demand.sample(0, 18, rng, grid)] += 1
    assert np.max(np.abs(counts / n - p)) < 0.02


def test_stage_cost_examples():
    assert aggregator_stage_cost(4.0, 0.0, 10.0, 1000.0) == pytest.approx(12.0)
    assert aggregator_stage_cost(5.0, 0.0, 5.0, 1000.0) == pytest.approx(0.0)
    assert aggregator_stage_cost(5.0, 0.0, 0.0, 1000.0) == pytest.approx(1000.0)
    # storage covering the gap avoids the penalty
    assert aggregator_stage_cost(5.0, 5.0, 0.0, 1000.0) == pytest.approx(0.0)


def test_storage_transition_rules():
    fine = np.linspace(0.0, 25.0, 26)
    assert storage_transition(2.0, 5.0, 4.0, 25.0, fine) == pytest.approx(3.0)
    assert storage_transition(24.0, 5.0, 1.0, 25.0, fine) == pytest.approx(25.0)
    assert storage_transition(0.0, 0.0, 3.0, 25.0, fine) == pytest.approx(0.0)


def test_storage_snap_round_half_up():
    grid = np.array([0.0, 10.0, 20.0])
    assert storage_transition(0.0, 9.0, 4.0, 20.0, grid) == pytest.approx(10.0)
    assert snap_index(5.0, grid) == 1    # exact midpoint rounds up
    assert snap_index(4.99, grid) == 0


def test_conventional_generator_cost():
    spec = GeneratorSpec(index=1, kind="conventional",
                         production_grid=np.array([0.0, 10.0, 20.0]))
    # 0.5 * 10^2 + 0.1 * (10 - 8)^2
    assert spec.stage_cost(10.0, 8.0) == pytest.approx(50.4)
    assert spec.marginal_cost(10.0, 10.0) == pytest.approx(10.0)


def test_renewable_generator_cost():
    spec = GeneratorSpec(index=2, kind="renewable",
                         production_grid=np.array([0.0, 10.0]),
                         capacity_grid=np.array([10.0]))
    assert spec.stage_cost(10.0) == pytest.approx(20.0)
    assert spec.marginal_cost(3.0) == pytest.approx(2.0)


def test_generator_cost_convex_in_action():
    spec = GeneratorSpec(index=1, kind="conventional",
                         production_grid=np.linspace(0, 100, 11))
    mdp = build_generator_mdp(spec)
    second = np.diff(mdp.cost, n=2, axis=1)
    assert np.all(second >= -1e-9)


def test_renewable_capacity_masks_actions():
    spec = GeneratorSpec(index=1, kind="renewable",
                         production_grid=np.array([0.0, 20.0, 40.0, 60.0]),
                         capacity_grid=np.array([20.0, 60.0]))
    mdp = build_generator_mdp(spec)
    assert list(mdp.feasible[0]) == [True, True, False, False]
    assert list(mdp.feasible[1]) == [True, True, True, True]
    # i.i.d. capacity: next-state distribution uniform, action independent
    assert np.allclose(mdp.next_p, 0.5)


def test_aggregator_mdp_shape_and_kernel():
    demand = DemandProcess(hours_per_day=3, peak_window=(2, 2),
                           peak_base=20.0, off_base=10.0,
                           peak_range=2.0, off_range=2.0)
    spec = AggregatorSpec(index=0, demand_grid=demand.grid(0, 2),
                          storage_grid=np.array([0.0, 5.0]),
                          action_grid=np.array([0.0, 10.0]),
                          capacity=5.0, penalty=50.0)
    mdp = build_aggregator_mdp(spec, demand)
    assert mdp.n_states == 3 * 2 * 2
    assert mdp.n_actions == 2
    assert np.allclose(mdp.next_p.sum(axis=2), 1.0)
    # hour advances cyclically
    s = mdp.labels.index((2, 0, 0))
    nxt = mdp.next_idx[s, 0]
    assert all(mdp.labels[j][0] == 0 for j in nxt)

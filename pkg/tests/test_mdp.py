"""Tabular MDP machinery against enumeration oracles and analytic cases."""

import numpy as np
import pytest

from fdsm.entities import AggregatorSpec, DemandProcess, build_aggregator_mdp
from fdsm.mdp import (ModelError, TabularMdp, bellman_backup, policy_value,
                      value_iterate)


def single_state_mdp(cost):
    return TabularMdp(cost=np.array([[cost]]), quantity=np.zeros((1, 1)),
                      next_idx=np.zeros((1, 1, 1), dtype=int),
                      next_p=np.ones((1, 1, 1)))


def two_state_mdp():
    """2 states x 2 actions with mixed transitions, no pricing."""
    cost = np.array([[1.0, 3.0], [2.0, 0.5]])
    next_idx = np.array([[[0, 1], [0, 1]],
                         [[0, 1], [0, 1]]])
    next_p = np.array([[[0.3, 0.7], [0.9, 0.1]],
                       [[0.6, 0.4], [0.2, 0.8]]])
    return TabularMdp(cost=cost, quantity=np.zeros((2, 2)),
                      next_idx=next_idx, next_p=next_p)


def test_fixed_point_single_state():
    v, _ = value_iterate(single_state_mdp(5.0), delta=0.9, tol=1e-12)
    assert v[0] == pytest.approx(5.0, abs=1e-9)


def test_zero_costs_zero_value():
    mdp = two_state_mdp()
    mdp.cost[:] = 0.0
    v, _ = value_iterate(mdp, price=0.0, delta=0.95, tol=1e-12)
    assert np.allclose(v, 0.0)


def test_two_state_matches_policy_enumeration():
    """Oracle: solve all four stationary policies by linear equations."""
    mdp = two_state_mdp()
    delta = 0.9
    best = np.full(2, np.inf)
    for a0 in (0, 1):
        for a1 in (0, 1):
            pol = (a0, a1)
            c = np.array([mdp.cost[s, pol[s]] for s in range(2)])
            P = np.zeros((2, 2))
            for s in range(2):
                for k in range(2):
                    P[s, mdp.next_idx[s, pol[s], k]] += mdp.next_p[s, pol[s], k]
            v = np.linalg.solve(np.eye(2) - delta * P, (1 - delta) * c)
            best = np.minimum(best, v)
    v_star, pol_star = value_iterate(mdp, delta=delta, tol=1e-13)
    assert np.max(np.abs(v_star - best)) <= 1e-8
    # returned policy attains the optimal value under exact evaluation
    assert np.max(np.abs(policy_value(mdp, pol_star, delta=delta) - best)) <= 1e-8


def test_contraction_monotone_residuals():
    mdp = two_state_mdp()
    v = np.zeros(2)
    residuals = []
    for _ in range(60):
        v_new, _ = bellman_backup(mdp, v, 0.0, 0.9)
        residuals.append(np.max(np.abs(v_new - v)))
        v = v_new
    diffs = np.diff(residuals)
    assert np.all(diffs <= 1e-12)


def test_discount_domain_error():
    with pytest.raises(ValueError, match="discount"):
        value_iterate(single_state_mdp(1.0), delta=1.0)
    with pytest.raises(ValueError, match="discount"):
        value_iterate(single_state_mdp(1.0), delta=-0.1)


def test_empty_action_set_rejected():
    with pytest.raises(ModelError, match="empty action set"):
        TabularMdp(cost=np.zeros((1, 2)), quantity=np.zeros((1, 2)),
                   next_idx=np.zeros((1, 2, 1), dtype=int),
                   next_p=np.ones((1, 2, 1)),
                   feasible=np.zeros((1, 2), dtype=bool))


def test_substochastic_kernel_rejected():
    with pytest.raises(ModelError, match="sum to 1"):
        TabularMdp(cost=np.zeros((1, 1)), quantity=np.zeros((1, 1)),
                   next_idx=np.zeros((1, 1, 1), dtype=int),
                   next_p=np.full((1, 1, 1), 0.5))


def test_tie_break_lowest_action():
    mdp = single_state_mdp(0.0)
    mdp2 = TabularMdp(cost=np.zeros((1, 3)), quantity=np.zeros((1, 3)),
                      next_idx=np.zeros((1, 3, 1), dtype=int),
                      next_p=np.ones((1, 3, 1)))
    _, pol = value_iterate(mdp2, delta=0.5)
    assert pol[0] == 0


def aggregator_fixture():
    demand = DemandProcess(hours_per_day=2, peak_window=(1, 1),
                           peak_base=20.0, off_base=10.0,
                           peak_range=4.0, off_range=4.0)
    spec = AggregatorSpec(index=0, demand_grid=demand.grid(0, 3),
                          storage_grid=np.array([0.0, 10.0, 20.0]),
                          action_grid=np.array([0.0, 10.0, 20.0, 30.0]),
                          capacity=20.0, penalty=100.0)
    return spec, build_aggregator_mdp(spec, demand)


def test_price_monotone_purchases():
    spec, mdp = aggregator_fixture()
    prev = None
    for price in np.linspace(0.0, 8.0, 17):
        _, pol = value_iterate(mdp, price=price, delta=0.9, tol=1e-10)
        buys = spec.action_grid[pol]
        if prev is not None:
            assert np.all(buys <= prev + 1e-9)
        prev = buys


def test_warm_start_agrees_with_cold():
    spec, mdp = aggregator_fixture()
    v_cold, p_cold = value_iterate(mdp, price=2.0, delta=0.9, tol=1e-11)
    v_other, _ = value_iterate(mdp, price=1.5, delta=0.9, tol=1e-11)
    v_warm, p_warm = value_iterate(mdp, price=2.0, delta=0.9, tol=1e-11,
                                   v0=v_other)
    assert np.max(np.abs(v_warm - v_cold)) <= 1e-8
    assert np.array_equal(p_cold, p_warm)

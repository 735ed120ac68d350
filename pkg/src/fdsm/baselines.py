"""Comparison decision rules: myopic, single-user Lyapunov, shared-multiplier
coordination (MU-MDP).  The centralized benchmark lives in centralized.py."""

from __future__ import annotations

import numpy as np

from .coordinator import Coordinator
from .entities import aggregator_stage_cost

STRATEGY_KINDS = ("proposed", "centralized", "myopic", "lyapunov", "mumdp")

DRIFT_WITH_DEMAND = "with-demand"     # (e + a - d)^2 - e^2
DRIFT_STORAGE_ONLY = "storage-only"   # (e + a)^2 - e^2


def myopic_decide(spec, demand, storage, price):
    """Minimize the current cost only (zero-discount special case)."""
    ag = np.asarray(spec.action_grid)
    costs = np.array([
        aggregator_stage_cost(demand, storage, a, spec.penalty,
                              spec.overage_coeff) + price * a
        for a in ag])
    return int(costs.argmin())


def lyapunov_drift(storage, action, demand, variant=DRIFT_WITH_DEMAND):
    if variant == DRIFT_WITH_DEMAND:
        return (storage + action - demand) ** 2 - storage ** 2
    if variant == DRIFT_STORAGE_ONLY:
        return (storage + action) ** 2 - storage ** 2
    raise ValueError(f"unknown drift variant {variant!r}")


def lyapunov_decide(spec, demand, storage, price, variant=DRIFT_WITH_DEMAND):
    """Single-user drift-penalty rule: current cost plus the storage drift."""
    ag = np.asarray(spec.action_grid)
    costs = np.array([
        aggregator_stage_cost(demand, storage, a, spec.penalty,
                              spec.overage_coeff) + price * a
        + lyapunov_drift(storage, a, demand, variant)
        for a in ag])
    return int(costs.argmin())


def make_mumdp_coordinator(system, **kwargs):
    """Coordinator with one multiplier vector shared across all ISO states."""
    return Coordinator(system.constraints, system.agg_mdps, system.gen_mdps,
                       system.delta, shared_multiplier=True, **kwargs)

"""Episode simulator: runs any strategy through the stochastic environment
(hourly demand, renewable capacity, line degradation), accounts stage costs,
and estimates locational marginal prices for the price comparison.

Payments between aggregators and the ISO cancel in the system total, so
recorded costs exclude them; announced prices are still logged per period.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .baselines import (DRIFT_WITH_DEMAND, lyapunov_decide, myopic_decide)
from .entities import aggregator_stage_cost, snap_index


def sample_demand(demand_process, i, hour, rng, grid):
    """One demand draw in MW, snapped to the aggregator's grid."""
    return float(grid[demand_process.sample(i, hour, rng, grid)])


# ---------------------------------------------------------------------------
# dispatch

def greedy_dispatch(system, s0, prev_outputs, target_mw, lock=None,
                    eps_extra=None):
    """Minimum-cost generation meeting ``target_mw``, by greedy grid steps.

    Stage costs are convex in output, so repeatedly taking the cheapest
    per-MW increment across generators is optimal on the grid.  ``lock``
    pins listed generators at given outputs (used when checking entity-chosen
    outputs); ``eps_extra`` adds load for finite-difference sensitivities.
    Returns (outputs, total cost, marginal $/MW of last increment, feasible).
    """
    G = system.n_generators
    out = np.zeros(G)
    levels = np.zeros(G, dtype=int)
    caps = np.array([min(system.renewable_cap(g, s0),
                         system.gen_specs[g].production_grid[-1])
                     for g in range(G)])
    if lock is not None:
        for g, mw in lock.items():
            out[g] = mw
            levels[g] = snap_index(mw, system.gen_specs[g].production_grid)
    target = target_mw + (eps_extra or 0.0)
    marginal = 0.0
    while out.sum() < target - 1e-9:
        best, best_rate, best_step = -1, np.inf, 0.0
        for g in range(G):
            if lock is not None and g in lock:
                continue
            grid = system.gen_specs[g].production_grid
            if levels[g] + 1 >= len(grid) or grid[levels[g] + 1] > caps[g] + 1e-9:
                continue
            step = grid[levels[g] + 1] - grid[levels[g]]
            dc = (system.gen_specs[g].stage_cost(grid[levels[g] + 1], prev_outputs[g])
                  - system.gen_specs[g].stage_cost(grid[levels[g]], prev_outputs[g]))
            rate = dc / step
            if rate < best_rate - 1e-12:
                best, best_rate, best_step = g, rate, step
        if best < 0:
            break
        levels[best] += 1
        out[best] = system.gen_specs[best].production_grid[levels[best]]
        marginal = best_rate
    cost = sum(system.gen_specs[g].stage_cost(out[g], prev_outputs[g])
               for g in range(G))
    feasible = out.sum() >= target - 1e-9
    return out, float(cost), float(marginal), feasible


# ---------------------------------------------------------------------------
# strategies

class ProposedStrategy:
    """Aggregator decisions from a (trained) price coordinator.

    Generation is left to the episode's dispatch: the ISO serves whatever
    load realizes at minimum current cost.  The generator MDPs' role is in
    the coordination phase, where their priced responses shape the
    multipliers and hence the prices the aggregators see here.
    """

    kind = "proposed"

    def __init__(self, coordinator):
        self.coordinator = coordinator

    def decide(self, system, s0, agg_labels):
        agg_p, _ = self.coordinator.prices_for(s0)
        acts = []
        for i, lab in enumerate(agg_labels):
            si = system.agg_state_index(i, lab)
            _, pol = self.coordinator.solve_aggregator(i, agg_p[i])
            acts.append(int(pol[si]))
        return acts, None, agg_p

    def observe(self, marginal):
        pass


class MumdpStrategy(ProposedStrategy):
    kind = "mumdp"


class MyopicStrategy:
    """Aggregators minimize current cost at the running baseline price; the
    ISO dispatches greedily.  The price each period is the previous period's
    marginal dispatch cost."""

    kind = "myopic"

    def __init__(self, initial_price=0.0):
        self.price = float(initial_price)

    def _choose(self, spec, d, e):
        return myopic_decide(spec, d, e, self.price)

    def decide(self, system, s0, agg_labels):
        acts = []
        for i, lab in enumerate(agg_labels):
            spec = system.agg_specs[i]
            _, di, ei = lab
            acts.append(self._choose(spec, spec.demand_grid[di],
                                     spec.storage_grid[ei]))
        prices = np.full(system.n_aggregators, self.price)
        return acts, None, prices

    def observe(self, marginal):
        self.price = marginal


class LyapunovStrategy(MyopicStrategy):
    kind = "lyapunov"

    def __init__(self, initial_price=0.0, variant=DRIFT_WITH_DEMAND):
        super().__init__(initial_price)
        self.variant = variant

    def _choose(self, spec, d, e):
        return lyapunov_decide(spec, d, e, self.price, self.variant)


class CentralizedStrategy:
    kind = "centralized"

    def __init__(self, policy):
        self.policy = policy

    def decide(self, system, s0, agg_labels):
        gen_comps = [system.iso_space.generator_component(s0, g)
                     for g in range(system.n_generators)]
        hour = agg_labels[0][0]
        pairs = [(di, ei) for (_, di, ei) in agg_labels]
        ai, gi = self.policy.joint_action(hour, pairs, gen_comps,
                                          system.iso_space.degraded_line(s0))
        gen_out = np.array([system.gen_specs[g].production_grid[gi[g]]
                            for g in range(system.n_generators)])
        return list(ai), gen_out, np.zeros(system.n_aggregators)

    def observe(self, marginal):
        pass


# ---------------------------------------------------------------------------
# episodes

@dataclass
class EpisodeTrace:
    """Per-period record of one simulated run."""

    kind: str
    seed: int
    iso_states: list = field(default_factory=list)
    hours: list = field(default_factory=list)
    demands: list = field(default_factory=list)        # (I,) MW
    storages: list = field(default_factory=list)       # (I,) MW
    agg_actions: list = field(default_factory=list)    # (I,) MW
    gen_outputs: list = field(default_factory=list)    # (G,) MW
    gen_prev: list = field(default_factory=list)       # (G,) MW
    agg_prices: list = field(default_factory=list)     # (I,) $/MW
    agg_costs: list = field(default_factory=list)      # (I,) $
    gen_costs: list = field(default_factory=list)      # (G,) $
    extra_costs: list = field(default_factory=list)    # shortfall penalties
    slacks: list = field(default_factory=list)         # max constraint value
    safeguard: list = field(default_factory=list)
    infeasible: list = field(default_factory=list)

    @property
    def n_periods(self):
        return len(self.hours)

    def total_costs(self):
        """System stage cost per period (payments excluded)."""
        return np.array([sum(a) + sum(g) + x for a, g, x in
                         zip(self.agg_costs, self.gen_costs, self.extra_costs)])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "hour", "demands", "storages", "agg_actions",
                        "gen_outputs", "agg_prices", "agg_costs", "gen_costs",
                        "extra_cost", "slack", "safeguard", "infeasible"])
            for t in range(self.n_periods):
                w.writerow([
                    t, self.hours[t],
                    _pack(self.demands[t]), _pack(self.storages[t]),
                    _pack(self.agg_actions[t]), _pack(self.gen_outputs[t]),
                    _pack(self.agg_prices[t]), _pack(self.agg_costs[t]),
                    _pack(self.gen_costs[t]), f"{self.extra_costs[t]:.6g}",
                    f"{self.slacks[t]:.6g}", int(self.safeguard[t]),
                    int(self.infeasible[t])])


def _pack(xs):
    return " ".join(f"{x:.6g}" for x in np.atleast_1d(xs))


def audit_trace(trace, system, tol=1e-9):
    """Recompute every recorded stage cost from states and actions."""
    for t in range(trace.n_periods):
        for i in range(system.n_aggregators):
            sp = system.agg_specs[i]
            c = aggregator_stage_cost(trace.demands[t][i], trace.storages[t][i],
                                      trace.agg_actions[t][i], sp.penalty,
                                      sp.overage_coeff)
            if abs(c - trace.agg_costs[t][i]) > tol:
                return False
        for g in range(system.n_generators):
            c = system.gen_specs[g].stage_cost(trace.gen_outputs[t][g],
                                               trace.gen_prev[t][g])
            if abs(c - trace.gen_costs[t][g]) > tol:
                return False
    return True


def run_episode(system, strategy, horizon, seed=0, start_storage_index=0,
                flow_tol=1e-6):
    """Simulate ``horizon`` periods under ``strategy``.

    Each period: observe states, announce prices, aggregators purchase, the
    ISO dispatches (honoring entity-chosen outputs when they cover the load,
    otherwise re-dispatching greedily with the safeguard flag set), costs are
    recorded.  A shortfall that survives the safeguard is charged at the
    largest aggregator penalty rate and flagged, never raised.
    """
    rng = np.random.default_rng(seed)
    s0 = system.iso_space.initial_state(rng)
    labels = [system.initial_agg_label(i, rng, storage_index=start_storage_index)
              for i in range(system.n_aggregators)]
    prev_out = np.array([system.gen_prev_output(g, s0)
                         for g in range(system.n_generators)])
    trace = EpisodeTrace(kind=strategy.kind, seed=seed)
    max_penalty = max((sp.penalty for sp in system.agg_specs), default=0.0)

    for _ in range(horizon):
        hour = labels[0][0] if labels else 0
        d = np.array([system.agg_specs[i].demand_grid[lab[1]]
                      for i, lab in enumerate(labels)])
        e = np.array([system.agg_specs[i].storage_grid[lab[2]]
                      for i, lab in enumerate(labels)])
        acts, desired, prices = strategy.decide(system, s0, labels)
        a_mw = np.array([system.agg_specs[i].action_grid[acts[i]]
                         for i in range(system.n_aggregators)])
        load = a_mw.sum()

        safeguard = False
        if desired is not None:
            caps = [system.renewable_cap(g, s0)
                    for g in range(system.n_generators)]
            covered = desired.sum() >= load - 1e-9
            within = all(desired[g] <= caps[g] + 1e-9
                         for g in range(system.n_generators))
            if covered and within:
                out = np.asarray(desired, dtype=float)
                marginal = max((system.gen_specs[g].marginal_cost(out[g], prev_out[g])
                                for g in range(system.n_generators)
                                if out[g] > 1e-9), default=0.0)
                feasible = True
            else:
                out, _, marginal, feasible = greedy_dispatch(
                    system, s0, prev_out, load)
                safeguard = True
        else:
            out, _, marginal, feasible = greedy_dispatch(
                system, s0, prev_out, load)

        extra = 0.0
        infeasible = not feasible
        if infeasible:
            extra = (load - out.sum()) * max_penalty

        agg_costs = [aggregator_stage_cost(d[i], e[i], a_mw[i],
                                           system.agg_specs[i].penalty,
                                           system.agg_specs[i].overage_coeff)
                     for i in range(system.n_aggregators)]
        gen_costs = [system.gen_specs[g].stage_cost(out[g], prev_out[g])
                     for g in range(system.n_generators)]
        f = system.constraints.evaluate(out, a_mw,
                                        system.iso_space.degraded_line(s0))
        trace.iso_states.append(s0)
        trace.hours.append(hour)
        trace.demands.append(d)
        trace.storages.append(e)
        trace.agg_actions.append(a_mw)
        trace.gen_outputs.append(out.copy())
        trace.gen_prev.append(prev_out.copy())
        trace.agg_prices.append(np.asarray(prices, dtype=float))
        trace.agg_costs.append(agg_costs)
        trace.gen_costs.append(gen_costs)
        trace.extra_costs.append(extra)
        trace.slacks.append(float(f.max()))
        trace.safeguard.append(safeguard)
        trace.infeasible.append(infeasible)

        strategy.observe(marginal)
        labels = [system.agg_next_label(i, lab, a_mw[i], rng)
                  for i, lab in enumerate(labels)]
        idxs = [system.snap_gen_output(g, out[g])
                for g in range(system.n_generators)]
        prev_out = out
        s0 = system.iso_space.step(s0, idxs, rng)
    return trace


# ---------------------------------------------------------------------------
# accounting

def discounted_total(trace, delta):
    """Eq.-style normalized discounted system cost: (1-delta) sum delta^t c_t."""
    if not 0.0 <= delta < 1.0:
        raise ValueError("discount must lie in [0, 1)")
    c = trace.total_costs()
    if delta == 0.0:
        return float(c[0]) if len(c) else 0.0
    w = delta ** np.arange(len(c))
    return float((1.0 - delta) * (w @ c))


@dataclass
class CostReport:
    kind: str
    seed: int
    normalized_cost: float          # $ per hour per bus
    discounted_cost: float
    undiscounted_total: float
    per_aggregator: np.ndarray
    mean_prices: np.ndarray
    safeguard_rate: float
    infeasible_rate: float


def cost_report(trace, system, delta=None):
    delta = system.delta if delta is None else delta
    T = max(trace.n_periods, 1)
    total = float(trace.total_costs().sum())
    per_agg = np.array([np.mean([c[i] for c in trace.agg_costs])
                        for i in range(system.n_aggregators)]) \
        if trace.n_periods else np.zeros(system.n_aggregators)
    mean_prices = np.mean(trace.agg_prices, axis=0) \
        if trace.n_periods else np.zeros(system.n_aggregators)
    return CostReport(
        kind=trace.kind, seed=trace.seed,
        normalized_cost=total / T / system.grid.n_buses,
        discounted_cost=discounted_total(trace, delta),
        undiscounted_total=total,
        per_aggregator=per_agg,
        mean_prices=np.asarray(mean_prices, dtype=float),
        safeguard_rate=float(np.mean(trace.safeguard)) if trace.n_periods else 0.0,
        infeasible_rate=float(np.mean(trace.infeasible)) if trace.n_periods else 0.0)


# ---------------------------------------------------------------------------
# locational marginal prices

def continuous_dispatch(system, s0, prev_outputs, load, tol=1e-10):
    """One-shot minimum-cost economic dispatch, off the production grid.

    Splits ``load`` across generators at equal marginal cost (water filling
    with a bisection on the shadow price), respecting capacity limits.
    Returns (outputs, total cost, feasible).
    """
    G = system.n_generators
    caps = np.array([min(system.renewable_cap(g, s0),
                         system.gen_specs[g].production_grid[-1])
                     for g in range(G)])
    if load <= tol:
        return np.zeros(G), 0.0, True
    if load > caps.sum() + 1e-9:
        return caps, float(sum(system.gen_specs[g].stage_cost(caps[g],
                                                              prev_outputs[g])
                               for g in range(G))), False

    def output_at(mu, g):
        sp = system.gen_specs[g]
        if sp.kind == "renewable":
            # constant marginal: all-or-nothing at its unit cost
            return caps[g] if mu >= sp.unit_cost else 0.0
        # marginal = 2*(gc + rc)*a - 2*rc*prev, solve for a
        gc, rc = sp.gen_coeff, sp.ramp_coeff
        a = (mu / 2.0 + rc * prev_outputs[g]) / (gc + rc)
        return float(np.clip(a, 0.0, caps[g]))

    lo, hi = 0.0, 1.0
    while sum(output_at(hi, g) for g in range(G)) < load:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sum(output_at(mid, g) for g in range(G)) < load:
            lo = mid
        else:
            hi = mid
    out = np.array([output_at(hi, g) for g in range(G)])
    # trim any overshoot starting from the most expensive marginal unit
    rates = np.array([
        system.gen_specs[g].unit_cost if system.gen_specs[g].kind == "renewable"
        else system.gen_specs[g].marginal_cost(out[g], prev_outputs[g])
        for g in range(G)])
    excess = out.sum() - load
    if excess > 0:
        for g in np.argsort(-rates):
            take = min(excess, out[g])
            out[g] -= take
            excess -= take
            if excess <= tol:
                break
    cost = sum(system.gen_specs[g].stage_cost(out[g], prev_outputs[g])
               for g in range(G))
    return out, float(cost), True


def estimate_lmp(trace, system):
    """Expected LMP per aggregator over the trace's visited states.

    For each period the one-shot minimum-cost dispatch of the recorded load
    is re-solved; the LMP at aggregator i is the forward finite difference of
    the dispatch cost when i's purchase grows by one action-grid step.
    Periods whose base dispatch is infeasible are skipped with a warning.
    """
    I = system.n_aggregators
    sums = np.zeros(I)
    counts = np.zeros(I)
    for t in range(trace.n_periods):
        load = float(np.sum(trace.agg_actions[t]))
        s0 = trace.iso_states[t]
        prev = trace.gen_prev[t]
        _, c0, ok = continuous_dispatch(system, s0, prev, load)
        if not ok:
            warnings.warn(f"period {t}: dispatch infeasible, skipped in LMP")
            continue
        for i in range(I):
            grid = system.agg_specs[i].action_grid
            steps = np.diff(np.unique(grid))
            eps = float(steps.min()) if len(steps) else 1.0
            _, c1, ok1 = continuous_dispatch(system, s0, prev, load + eps)
            if not ok1:
                continue
            sums[i] += (c1 - c0) / eps
            counts[i] += 1
    with np.errstate(invalid="ignore"):
        out = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return out

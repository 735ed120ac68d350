"""The assembled scenario: grid, constraint set, entity models, dynamics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cdf import GridModel
from .constraints import ConstraintSet
from .entities import (AggregatorSpec, DemandProcess, GeneratorSpec,
                       IsoStateSpace, build_aggregator_mdp,
                       build_generator_mdp, snap_index, storage_transition)


@dataclass
class SystemModel:
    grid: GridModel
    constraints: ConstraintSet
    demand: DemandProcess
    agg_specs: list
    agg_mdps: list
    gen_specs: list
    gen_mdps: list
    iso_space: IsoStateSpace
    delta: float = 0.99

    @property
    def n_aggregators(self):
        return len(self.agg_specs)

    @property
    def n_generators(self):
        return len(self.gen_specs)

    def agg_dims(self, i):
        spec = self.agg_specs[i]
        return (self.demand.hours_per_day, len(spec.demand_grid),
                len(spec.storage_grid))

    def agg_state_index(self, i, label):
        h, di, ei = label
        _, nd, ne = self.agg_dims(i)
        return (h * nd + di) * ne + ei

    def initial_agg_label(self, i, rng, hour=0, storage_index=0):
        di = self.demand.sample(i, hour, rng, self.agg_specs[i].demand_grid)
        return (hour, di, storage_index)

    def agg_next_label(self, i, label, action_mw, rng):
        spec = self.agg_specs[i]
        h, di, ei = label
        h2 = (h + 1) % self.demand.hours_per_day
        d = spec.demand_grid[di]
        e = spec.storage_grid[ei]
        e2 = storage_transition(e, action_mw, d, spec.capacity,
                                spec.storage_grid)
        e2i = snap_index(e2, spec.storage_grid)
        d2i = self.demand.sample(i, h2, rng, spec.demand_grid)
        return (h2, d2i, e2i)

    def snap_gen_output(self, g, output_mw):
        return snap_index(output_mw, self.gen_specs[g].production_grid)

    def renewable_cap(self, g, iso_state):
        spec = self.gen_specs[g]
        if spec.kind != "renewable":
            return float(spec.production_grid[-1])
        return float(spec.capacity_grid[self.iso_space.generator_component(iso_state, g)])

    def gen_prev_output(self, g, iso_state):
        spec = self.gen_specs[g]
        if spec.kind != "renewable":
            return float(spec.production_grid[self.iso_space.generator_component(iso_state, g)])
        return 0.0


def build_system(grid, constraints, demand, *, n_aggregators=None,
                 storage_capacity=25.0, storage_levels=3, demand_levels=3,
                 action_grid=None, penalty=500.0, overage_coeff=2.0,
                 n_renewable=0, production_grid=None, capacity_grid=None,
                 gen_coeff=0.5, ramp_coeff=0.1, line_degradation=True,
                 delta=0.99):
    """Assemble entity models on top of a mapped grid.

    Renewable generators take the lowest indices (cheapest unit costs), as in
    the simulation setup where generators are indexed starting from the
    renewables.
    """
    I = grid.n_aggregators if n_aggregators is None else n_aggregators
    G = grid.n_generators
    if action_grid is None:
        action_grid = np.linspace(0.0, 60.0, 3)
    if production_grid is None:
        production_grid = np.linspace(0.0, 120.0, 5)
    if capacity_grid is None:
        capacity_grid = np.linspace(90.0, 110.0, 3)

    agg_specs, agg_mdps = [], []
    for i in range(I):
        spec = AggregatorSpec(
            index=i,
            demand_grid=demand.grid(i, demand_levels),
            storage_grid=np.linspace(0.0, storage_capacity, storage_levels),
            action_grid=np.asarray(action_grid, dtype=float),
            capacity=storage_capacity,
            penalty=penalty,
            overage_coeff=overage_coeff)
        agg_specs.append(spec)
        agg_mdps.append(build_aggregator_mdp(spec, demand))

    gen_specs, gen_mdps = [], []
    for g in range(G):
        if g < n_renewable:
            spec = GeneratorSpec(index=g + 1, kind="renewable",
                                 production_grid=np.asarray(production_grid, dtype=float),
                                 capacity_grid=np.asarray(capacity_grid, dtype=float))
        else:
            spec = GeneratorSpec(index=g + 1, kind="conventional",
                                 production_grid=np.asarray(production_grid, dtype=float),
                                 gen_coeff=gen_coeff, ramp_coeff=ramp_coeff)
        gen_specs.append(spec)
        gen_mdps.append(build_generator_mdp(spec))

    iso = IsoStateSpace(generators=gen_specs, n_lines=grid.n_lines,
                        line_degradation=line_degradation)
    return SystemModel(grid=grid, constraints=constraints, demand=demand,
                       agg_specs=agg_specs, agg_mdps=agg_mdps,
                       gen_specs=gen_specs, gen_mdps=gen_mdps,
                       iso_space=iso, delta=delta)


def run_coordination(system, coordinator, n_iterations, seed=0, eps=None,
                     min_iterations=50, record=None):
    """Drive coordination rounds along a simulated system trajectory.

    States evolve under the entities' own requested actions; multipliers and
    prices update each round.  Stops early once every entity's value table
    moved by at most ``eps`` (sup-norm) between rounds, after
    ``min_iterations``.  Returns the number of rounds executed.
    """
    rng = np.random.default_rng(seed)
    s0 = system.iso_space.initial_state(rng)
    agg_labels = [system.initial_agg_label(i, rng)
                  for i in range(system.n_aggregators)]
    done = 0
    for k in range(n_iterations):
        agg_states = [system.agg_state_index(i, lab)
                      for i, lab in enumerate(agg_labels)]
        gen_comps = [system.iso_space.generator_component(s0, g)
                     for g in range(system.n_generators)]
        diag = coordinator.coordination_round(
            s0, agg_states, gen_comps,
            degraded_line=system.iso_space.degraded_line(s0))
        if record is not None:
            record.append(diag)
        agg_labels = [system.agg_next_label(i, lab, diag.agg_requests[i], rng)
                      for i, lab in enumerate(agg_labels)]
        action_indices = [system.snap_gen_output(g, diag.iso_actions[g])
                          for g in range(system.n_generators)]
        s0 = system.iso_space.step(s0, action_indices, rng)
        done = k + 1
        if eps is not None and k + 1 >= min_iterations and diag.value_shift <= eps:
            break
    return done

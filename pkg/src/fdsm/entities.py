"""Entity models: hourly demand process, aggregator MDPs, generator MDPs.

Continuous MW quantities are quantized onto uniform grids; snapping is
nearest-point with ties rounded up so kernels stay closed on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp


def snap_index(x, grid):
    """Nearest grid index, round-half-up."""
    grid = np.asarray(grid)
    d = np.abs(grid - x)
    best = np.flatnonzero(d <= d.min() + 1e-12)
    return int(best[-1]) if len(best) > 1 else int(best[0])


def uniform_grid(lo, hi, n):
    if n == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class DemandProcess:
    """Per-aggregator hourly demand: uniform around an hour-of-day mean.

    Aggregator i's mean is ``peak_base + i*0.5`` MW inside the peak window and
    ``off_base + i*0.5`` outside (i is the 0-based aggregator index).
    """

    hours_per_day: int = 24
    peak_window: tuple[int, int] = (17, 22)   # inclusive
    peak_base: float = 50.0
    off_base: float = 25.0
    per_agg_step: float = 0.5
    peak_range: float = 5.0
    off_range: float = 2.0

    def is_peak(self, hour):
        lo, hi = self.peak_window
        return lo <= (hour % self.hours_per_day) <= hi

    def mean(self, i, hour):
        base = self.peak_base if self.is_peak(hour) else self.off_base
        return base + i * self.per_agg_step

    def range_(self, hour):
        return self.peak_range if self.is_peak(hour) else self.off_range

    def grid(self, i, n_levels):
        """Uniform demand grid covering every hour's support for aggregator i."""
        los, his = [], []
        for h in range(self.hours_per_day):
            los.append(self.mean(i, h) - self.range_(h))
            his.append(self.mean(i, h) + self.range_(h))
        return uniform_grid(min(los), max(his), n_levels)

    def kernel(self, i, hour, grid):
        """Distribution over grid indices of the snapped uniform draw."""
        grid = np.asarray(grid)
        m, r = self.mean(i, hour), self.range_(hour)
        p = np.zeros(len(grid))
        if r <= 0:
            p[snap_index(m, grid)] = 1.0
            return p
        lo, hi = m - r, m + r
        # snap cell of grid point j is [mid(j-1,j), mid(j,j+1))
        edges = np.empty(len(grid) + 1)
        edges[0], edges[-1] = -np.inf, np.inf
        edges[1:-1] = 0.5 * (grid[:-1] + grid[1:])
        for j in range(len(grid)):
            a = max(lo, edges[j])
            b = min(hi, edges[j + 1])
            p[j] = max(0.0, b - a) / (hi - lo)
        p /= p.sum()
        return p

    def sample(self, i, hour, rng, grid):
        m, r = self.mean(i, hour), self.range_(hour)
        x = m if r <= 0 else rng.uniform(m - r, m + r)
        return snap_index(x, grid)


def aggregator_stage_cost(demand, storage, action, penalty, overage_coeff=2.0):
    """Operational cost: linear overage charge plus the unmet-demand penalty."""
    cost = overage_coeff * max(action - demand, 0.0)
    if storage + action < demand - 1e-9:
        cost += penalty
    return cost


def storage_transition(storage, action, demand, capacity, storage_grid):
    """Next storage MW: surplus energy clamped to capacity, grid-snapped."""
    e = min(max(storage + action - demand, 0.0), capacity)
    return float(np.asarray(storage_grid)[snap_index(e, storage_grid)])


@dataclass(frozen=True)
class AggregatorSpec:
    index: int
    demand_grid: np.ndarray
    storage_grid: np.ndarray
    action_grid: np.ndarray
    capacity: float
    penalty: float
    overage_coeff: float = 2.0


def build_aggregator_mdp(spec, demand_process):
    """State (hour, demand level, storage level); action = purchase level."""
    H = demand_process.hours_per_day
    dg, eg, ag = (np.asarray(spec.demand_grid), np.asarray(spec.storage_grid),
                  np.asarray(spec.action_grid))
    ND, NE, NA = len(dg), len(eg), len(ag)
    S = H * ND * NE
    labels = []
    cost = np.zeros((S, NA))
    qty = np.tile(ag, (S, 1))
    next_idx = np.zeros((S, NA, ND), dtype=int)
    next_p = np.zeros((S, NA, ND))
    kernels = [demand_process.kernel(spec.index, h, dg) for h in range(H)]
    for h in range(H):
        h2 = (h + 1) % H
        pk = kernels[h2]
        for di in range(ND):
            for ei in range(NE):
                s = (h * ND + di) * NE + ei
                labels.append((h, di, ei))
                d, e = dg[di], eg[ei]
                for ai in range(NA):
                    a = ag[ai]
                    cost[s, ai] = aggregator_stage_cost(
                        d, e, a, spec.penalty, spec.overage_coeff)
                    e2 = storage_transition(e, a, d, spec.capacity, eg)
                    e2i = snap_index(e2, eg)
                    for d2i in range(ND):
                        next_idx[s, ai, d2i] = (h2 * ND + d2i) * NE + e2i
                        next_p[s, ai, d2i] = pk[d2i]
    return TabularMdp(cost=cost, quantity=qty, next_idx=next_idx,
                      next_p=next_p, labels=labels, action_grid=ag)


def conventional_stage_cost(a, prev, gen_coeff=0.5, ramp_coeff=0.1):
    return gen_coeff * a * a + ramp_coeff * (a - prev) ** 2


@dataclass(frozen=True)
class GeneratorSpec:
    index: int                    # 1-based; renewables first
    kind: str                     # "conventional" | "renewable"
    production_grid: np.ndarray
    capacity_grid: np.ndarray | None = None   # renewable only
    gen_coeff: float = 0.5
    ramp_coeff: float = 0.1

    @property
    def unit_cost(self):
        # renewable marginal cost equals the generator index, cheapest first
        return float(self.index)

    def stage_cost(self, a, prev=0.0):
        if self.kind == "renewable":
            return self.unit_cost * a
        return conventional_stage_cost(a, prev, self.gen_coeff, self.ramp_coeff)

    def marginal_cost(self, a, prev=0.0):
        if self.kind == "renewable":
            return self.unit_cost
        return 2 * self.gen_coeff * a + 2 * self.ramp_coeff * (a - prev)


def build_generator_mdp(spec):
    """Conventional: state = previous output level (ramping memory).
    Renewable: state = available-capacity level, i.i.d. uniform; actions above
    the current capacity are infeasible."""
    pg = np.asarray(spec.production_grid)
    NA = len(pg)
    if spec.kind == "conventional":
        S = NA
        cost = np.zeros((S, NA))
        for si in range(S):
            for ai in range(NA):
                cost[si, ai] = spec.stage_cost(pg[ai], pg[si])
        qty = np.tile(pg, (S, 1))
        next_idx = np.arange(NA)[None, :, None].repeat(S, axis=0)
        next_p = np.ones((S, NA, 1))
        return TabularMdp(cost=cost, quantity=qty, next_idx=next_idx,
                          next_p=next_p, labels=[(s,) for s in range(S)],
                          action_grid=pg)
    cg = np.asarray(spec.capacity_grid)
    S = len(cg)
    cost = np.tile(spec.unit_cost * pg, (S, 1))
    qty = np.tile(pg, (S, 1))
    feas = pg[None, :] <= cg[:, None] + 1e-9
    next_idx = np.arange(S)[None, None, :].repeat(S, axis=0).repeat(NA, axis=1)
    next_p = np.full((S, NA, S), 1.0 / S)
    return TabularMdp(cost=cost, quantity=qty, next_idx=next_idx,
                      next_p=next_p, feasible=feas,
                      labels=[(s,) for s in range(S)], action_grid=pg)


@dataclass
class IsoStateSpace:
    """Composite ISO state: per-generator components plus the degraded line.

    A component is the previous-output index for conventional generators and
    the available-capacity index for renewables; the line component is -1 when
    degradation is disabled.
    """

    generators: list = field(default_factory=list)   # GeneratorSpec
    n_lines: int = 0
    line_degradation: bool = True

    def component_sizes(self):
        out = []
        for g in self.generators:
            if g.kind == "conventional":
                out.append(len(g.production_grid))
            else:
                out.append(len(g.capacity_grid))
        return out

    def n_states(self):
        n = 1
        for k in self.component_sizes():
            n *= k
        if self.line_degradation:
            n *= self.n_lines
        return n

    def initial_state(self, rng):
        comps = []
        for g in self.generators:
            if g.kind == "conventional":
                comps.append(0)
            else:
                comps.append(int(rng.integers(len(g.capacity_grid))))
        line = int(rng.integers(self.n_lines)) if self.line_degradation else -1
        return (tuple(comps), line)

    def step(self, state, action_indices, rng):
        """Advance after the ISO dispatches ``action_indices`` (one per gen)."""
        comps = []
        for g, ai in zip(self.generators, action_indices):
            if g.kind == "conventional":
                # snap realized output back onto the production grid
                comps.append(int(ai))
            else:
                comps.append(int(rng.integers(len(g.capacity_grid))))
        line = int(rng.integers(self.n_lines)) if self.line_degradation else -1
        return (tuple(comps), line)

    def degraded_line(self, state):
        return state[1]

    def generator_component(self, state, g):
        return state[0][g]

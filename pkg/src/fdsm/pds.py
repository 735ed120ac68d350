"""Post-decision-state online learning for aggregators.

The post-decision state (PDS) is the aggregator's situation right after the
purchase is made but before the next demand arrives: the hour and demand are
unchanged and storage moves deterministically to clamp(e + a - d).  All the
randomness sits between the PDS and the next pre-decision state, so a learner
that keeps a PDS value table U never needs the demand kernel: action selection
is a deterministic lookup

    a = argmin_a (1 - delta) [c(d, e, a) + y a] + delta U(h, d, e_pds(a))

and U is improved from observed transitions only.
"""

from __future__ import annotations

import csv

import numpy as np

from .entities import aggregator_stage_cost, snap_index, storage_transition
from .mdp import value_iterate


def pds_storage(spec, storage, action, demand):
    """Deterministic storage component of the PDS, snapped to the grid."""
    e2 = storage_transition(storage, action, demand, spec.capacity,
                            spec.storage_grid)
    return snap_index(e2, spec.storage_grid)


def blend(u_old, v_sample, alpha):
    """Robbins-Monro mix of the stored PDS value with a fresh sample."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    return (1.0 - alpha) * u_old + alpha * v_sample


def pds_q_values(spec, u_table, hour, di, ei, price, delta):
    """One Q value per action: immediate priced cost plus discounted U."""
    d = spec.demand_grid[di]
    e = spec.storage_grid[ei]
    q = np.empty(len(spec.action_grid))
    for ai, a in enumerate(spec.action_grid):
        c = aggregator_stage_cost(d, e, a, spec.penalty, spec.overage_coeff)
        ep = pds_storage(spec, e, a, d)
        q[ai] = (1.0 - delta) * (c + price * a) + delta * u_table[hour, di, ep]
    return q


def pds_step(spec, state, price, u_table, alpha, delta, prev_pds=None,
             v_table=None):
    """One learning update at ``state`` = (hour, demand idx, storage idx).

    Picks the greedy action, refreshes V at the current state with the
    attained minimum, and blends U at ``prev_pds`` (the PDS visited last
    period) toward that fresh V sample with rate ``alpha``.  Returns
    (action index, new V entry, new U entry or None).  Tables are modified
    in place when given.
    """
    hour, di, ei = state
    q = pds_q_values(spec, u_table, hour, di, ei, price, delta)
    action = int(q.argmin())
    v_new = float(q[action])
    if v_table is not None:
        v_table[hour, di, ei] = v_new
    u_new = None
    if prev_pds is not None:
        u_new = blend(u_table[prev_pds], v_new, alpha)
        u_table[prev_pds] = u_new
    return action, v_new, u_new


class PdsLearner:
    """Online learner for a single aggregator facing a fixed price.

    Exploration is epsilon-greedy with epsilon = eps0 * decay^k; the learning
    rate at a PDS is 1 / (1 + visits to that PDS).
    """

    def __init__(self, spec, demand_process, price, delta, eps0=0.1,
                 eps_decay=0.999, seed=0):
        self.spec = spec
        self.demand = demand_process
        self.price = float(price)
        self.delta = float(delta)
        self.eps0 = eps0
        self.eps_decay = eps_decay
        self.rng = np.random.default_rng(seed)
        H = demand_process.hours_per_day
        nd, ne = len(spec.demand_grid), len(spec.storage_grid)
        self.v = np.zeros((H, nd, ne))
        self.u = np.zeros((H, nd, ne))
        self.pds_visits = np.zeros((H, nd, ne), dtype=int)
        self.k = 0
        self._prev_pds = None
        # precomputed per (d, e, a): priced stage cost and PDS storage index
        na = len(spec.action_grid)
        self._c = np.zeros((nd, ne, na))
        self._ep = np.zeros((nd, ne, na), dtype=int)
        for di in range(nd):
            for ei in range(ne):
                for ai, a in enumerate(spec.action_grid):
                    d, e = spec.demand_grid[di], spec.storage_grid[ei]
                    self._c[di, ei, ai] = aggregator_stage_cost(
                        d, e, a, spec.penalty, spec.overage_coeff) + self.price * a
                    self._ep[di, ei, ai] = pds_storage(spec, e, a, d)
        # per-hour cumulative demand kernels for fast sampling
        self._cum = np.stack([
            np.cumsum(demand_process.kernel(spec.index, h, spec.demand_grid))
            for h in range(H)])

    def epsilon(self):
        return self.eps0 * self.eps_decay ** self.k

    def step(self, state):
        """Advance one period from ``state``; returns (action idx, next state,
        absolute V change at the state)."""
        hour, di, ei = state
        q = ((1.0 - self.delta) * self._c[di, ei]
             + self.delta * self.u[hour, di, self._ep[di, ei]])
        greedy = int(q.argmin())
        action = greedy
        if self.rng.random() < self.epsilon():
            action = int(self.rng.integers(len(self.spec.action_grid)))
        vmin = float(q[greedy])
        residual = abs(vmin - self.v[hour, di, ei])
        self.v[hour, di, ei] = vmin
        if self._prev_pds is not None:
            alpha = 1.0 / (1.0 + self.pds_visits[self._prev_pds])
            self.u[self._prev_pds] = blend(self.u[self._prev_pds], vmin, alpha)
            self.pds_visits[self._prev_pds] += 1
        ep = int(self._ep[di, ei, action])
        self._prev_pds = (hour, di, ep)
        h2 = (hour + 1) % self.demand.hours_per_day
        d2 = int(np.searchsorted(self._cum[h2], self.rng.random(),
                                 side="right"))
        d2 = min(d2, len(self.spec.demand_grid) - 1)
        self.k += 1
        return action, (h2, d2, ep), residual

    def run(self, n_steps, start=None, curve=None, curve_stride=100,
            probe=None):
        """Learn for ``n_steps`` periods; optionally append (step, residual,
        probe value) rows to ``curve`` every ``curve_stride`` steps."""
        if start is None:
            d0 = self.demand.sample(self.spec.index, 0, self.rng,
                                    self.spec.demand_grid)
            start = (0, d0, 0)
        state = start
        if probe is None:
            probe = (0, 0, 0)
        for _ in range(n_steps):
            _, state, residual = self.step(state)
            if curve is not None and self.k % curve_stride == 0:
                curve.append((self.k, residual, float(self.v[probe])))
        return state


def pds_run(spec, demand_process, price, delta, n_steps, seed=0, **kwargs):
    """Train a fresh learner and return it."""
    learner = PdsLearner(spec, demand_process, price, delta, seed=seed,
                         **kwargs)
    learner.run(n_steps)
    return learner


def exact_tables(mdp, spec, demand_process, price, delta, tol=1e-10):
    """Oracle (V*, U*) pair from exact value iteration on the built MDP.

    U* at a PDS is the expected next-period V* with demand drawn from the
    true kernel; used to check the learner, never by it.
    """
    v_flat, _ = value_iterate(mdp, price=price, delta=delta, tol=tol)
    H = demand_process.hours_per_day
    nd, ne = len(spec.demand_grid), len(spec.storage_grid)
    v = v_flat.reshape(H, nd, ne)
    u = np.zeros_like(v)
    for h in range(H):
        h2 = (h + 1) % H
        kern = demand_process.kernel(spec.index, h2, spec.demand_grid)
        for di in range(nd):
            for ep in range(ne):
                u[h, di, ep] = float(kern @ v[h2, :, ep])
    return v, u


def write_learning_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "bellman_residual", "probe_value"])
        for step, residual, probe in curve:
            w.writerow([step, f"{residual:.8g}", f"{probe:.8g}"])

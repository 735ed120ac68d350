"""Centralized benchmark: one constrained MDP over the joint state of every
entity, solved by value iteration.  Tractable only at desk scale; refuses
instances beyond the configured product-state limit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TabularMdp, value_iterate


class IntractableError(RuntimeError):
    """Joint state space exceeds the centralized solver's limit."""

    def __init__(self, n_states, limit):
        super().__init__(
            f"centralized solve refused: joint state space has {n_states} "
            f"states, limit is {limit}")
        self.n_states = n_states
        self.limit = limit


@dataclass
class JointIndex:
    """Mixed-radix encoding of the joint state and joint action."""

    hours: int
    agg_dims: list          # (ND_i, NE_i)
    gen_dims: list          # component count per generator
    line_states: int        # 1 when degradation is off
    agg_actions: list
    gen_actions: list

    def __post_init__(self):
        sizes = [self.hours]
        for nd, ne in self.agg_dims:
            sizes += [nd, ne]
        sizes += list(self.gen_dims)
        sizes.append(self.line_states)
        self.state_sizes = sizes
        self.state_strides = _strides(sizes)
        asizes = list(self.agg_actions) + list(self.gen_actions)
        self.action_sizes = asizes
        self.action_strides = _strides(asizes)
        self.n_states = int(np.prod(sizes))
        self.n_actions = int(np.prod(asizes))

    def encode_state(self, h, agg_labels, gen_comps, line):
        parts = [h]
        for (d, e) in agg_labels:
            parts += [d, e]
        parts += list(gen_comps)
        parts.append(max(line, 0) if self.line_states > 1 else 0)
        return int(np.dot(parts, self.state_strides))

    def decode_state(self, s):
        parts = _decode(s, self.state_sizes)
        h = parts[0]
        I = len(self.agg_dims)
        aggs = [(parts[1 + 2 * i], parts[2 + 2 * i]) for i in range(I)]
        gens = parts[1 + 2 * I:1 + 2 * I + len(self.gen_dims)]
        line = parts[-1] if self.line_states > 1 else -1
        return h, aggs, gens, line

    def decode_action(self, a):
        parts = _decode(a, self.action_sizes)
        I = len(self.agg_actions)
        return parts[:I], parts[I:]


def _strides(sizes):
    st = [1] * len(sizes)
    for k in range(len(sizes) - 2, -1, -1):
        st[k] = st[k + 1] * sizes[k + 1]
    return np.asarray(st, dtype=np.int64)


def _decode(x, sizes):
    out = []
    for sz in reversed(sizes):
        out.append(x % sz)
        x //= sz
    return list(reversed(out))


def build_joint_mdp(system, state_limit=100_000, work_limit=40_000_000,
                    feas_tol=1e-9):
    """Assemble the joint constrained MDP.  Returns (TabularMdp, JointIndex)."""
    demand = system.demand
    H = demand.hours_per_day
    I, G = system.n_aggregators, system.n_generators
    iso = system.iso_space
    Ls = system.grid.n_lines if iso.line_degradation else 1

    idx = JointIndex(
        hours=H,
        agg_dims=[(len(sp.demand_grid), len(sp.storage_grid))
                  for sp in system.agg_specs],
        gen_dims=iso.component_sizes(),
        line_states=Ls,
        agg_actions=[len(sp.action_grid) for sp in system.agg_specs],
        gen_actions=[len(sp.production_grid) for sp in system.gen_specs])
    S, A = idx.n_states, idx.n_actions
    if S > state_limit:
        raise IntractableError(S, state_limit)

    renewables = [g for g, sp in enumerate(system.gen_specs)
                  if sp.kind == "renewable"]
    # outcome space: next demands x next renewable caps x next line
    out_sizes = [len(sp.demand_grid) for sp in system.agg_specs]
    out_sizes += [len(system.gen_specs[g].capacity_grid) for g in renewables]
    out_sizes.append(Ls)
    K = int(np.prod(out_sizes))
    if S * A * K > work_limit:
        raise IntractableError(S, state_limit)

    # per-action decoded MW and per-entity action indices
    act_agg = np.zeros((A, I), dtype=int)
    act_gen = np.zeros((A, G), dtype=int)
    for a in range(A):
        ai, gi = idx.decode_action(a)
        act_agg[a] = ai
        act_gen[a] = gi
    agg_mw = np.stack([system.agg_specs[i].action_grid[act_agg[:, i]]
                       for i in range(I)], axis=1)          # (A, I)
    gen_mw = np.stack([system.gen_specs[g].production_grid[act_gen[:, g]]
                       for g in range(G)], axis=1)          # (A, G)

    # constraint feasibility per (line state, joint action)
    cs = system.constraints
    base = gen_mw @ cs.coeff_iso.T + agg_mw @ cs.coeff_agg.T   # (A, N)
    feas_line = np.zeros((Ls, A), dtype=bool)
    for l in range(Ls):
        off = cs.offset(l if iso.line_degradation else -1)
        feas_line[l] = (base + off).max(axis=1) <= feas_tol

    # per-aggregator tables over (d, e, a)
    agg_cost, agg_e2 = [], []
    from .entities import aggregator_stage_cost, snap_index, storage_transition
    for i, sp in enumerate(system.agg_specs):
        nd, ne, na = len(sp.demand_grid), len(sp.storage_grid), len(sp.action_grid)
        c = np.zeros((nd, ne, na))
        e2 = np.zeros((nd, ne, na), dtype=int)
        for di in range(nd):
            for ei in range(ne):
                for ai in range(na):
                    d, e, a = sp.demand_grid[di], sp.storage_grid[ei], sp.action_grid[ai]
                    c[di, ei, ai] = aggregator_stage_cost(
                        d, e, a, sp.penalty, sp.overage_coeff)
                    e2[di, ei, ai] = snap_index(
                        storage_transition(e, a, d, sp.capacity, sp.storage_grid),
                        sp.storage_grid)
        agg_cost.append(c)
        agg_e2.append(e2)

    # per-generator tables over (component, a)
    gen_cost, gen_feas, gen_comp2 = [], [], []
    for g, sp in enumerate(system.gen_specs):
        na = len(sp.production_grid)
        if sp.kind == "conventional":
            nc = len(sp.production_grid)
            c = np.array([[sp.stage_cost(sp.production_grid[a], sp.production_grid[s])
                           for a in range(na)] for s in range(nc)])
            f = np.ones((nc, na), dtype=bool)
            comp2 = np.tile(np.arange(na), (nc, 1))   # next comp = chosen level
        else:
            nc = len(sp.capacity_grid)
            c = np.tile(sp.unit_cost * sp.production_grid, (nc, 1))
            f = sp.production_grid[None, :] <= sp.capacity_grid[:, None] + 1e-9
            comp2 = np.full((nc, na), -1)             # resampled, not action-driven
        gen_cost.append(c)
        gen_feas.append(f)
        gen_comp2.append(comp2)

    # outcome decomposition: strides and probabilities per hour
    st = idx.state_strides
    I2 = 1 + 2 * I
    agg_d_stride = [st[1 + 2 * i] for i in range(I)]
    agg_e_stride = [st[2 + 2 * i] for i in range(I)]
    gen_stride = [st[I2 + g] for g in range(G)]
    line_stride = st[-1]

    out_combos = np.stack(np.meshgrid(
        *[np.arange(sz) for sz in out_sizes], indexing="ij"),
        axis=-1).reshape(K, len(out_sizes))
    out_static = np.zeros(K, dtype=np.int64)
    for j, g in enumerate(renewables):
        out_static += out_combos[:, I + j] * gen_stride[g]
    out_static += out_combos[:, -1] * line_stride
    p_static = np.ones(K)
    for j, g in enumerate(renewables):
        p_static /= len(system.gen_specs[g].capacity_grid)
    p_static /= Ls

    out_part_h = np.zeros((H, K), dtype=np.int64)
    out_prob_h = np.zeros((H, K))
    for h in range(H):
        h2 = (h + 1) % H
        part = np.full(K, h2 * st[0], dtype=np.int64) + out_static
        prob = p_static.copy()
        for i in range(I):
            kern = demand.kernel(i, h2, system.agg_specs[i].demand_grid)
            part += out_combos[:, i] * agg_d_stride[i]
            prob *= kern[out_combos[:, i]]
        out_part_h[h] = part
        out_prob_h[h] = prob

    cost = np.zeros((S, A))
    feas = np.zeros((S, A), dtype=bool)
    next_idx = np.zeros((S, A, K), dtype=np.int64)
    next_p = np.zeros((S, A, K))
    labels = []
    for s in range(S):
        h, aggs, gens, line = idx.decode_state(s)
        labels.append((h, tuple(aggs), tuple(gens), line))
        c = np.zeros(A)
        act_part = np.zeros(A, dtype=np.int64)
        ok = feas_line[max(line, 0) if Ls > 1 else 0].copy()
        for i in range(I):
            di, ei = aggs[i]
            c += agg_cost[i][di, ei][act_agg[:, i]]
            act_part += agg_e2[i][di, ei][act_agg[:, i]] * agg_e_stride[i]
        for g in range(G):
            comp = gens[g]
            c += gen_cost[g][comp][act_gen[:, g]]
            ok &= gen_feas[g][comp][act_gen[:, g]]
            if system.gen_specs[g].kind == "conventional":
                act_part += gen_comp2[g][comp][act_gen[:, g]] * gen_stride[g]
        cost[s] = c
        feas[s] = ok
        next_idx[s] = act_part[:, None] + out_part_h[h][None, :]
        next_p[s] = out_prob_h[h][None, :]
        if not ok.any():
            # no jointly feasible action: fall back to the least-violating one
            viol = (base + cs.offset(line)).max(axis=1)
            feas[s, int(viol.argmin())] = True

    mdp = TabularMdp(cost=cost, quantity=np.zeros((S, A)), next_idx=next_idx,
                     next_p=next_p, feasible=feas, labels=labels)
    return mdp, idx


@dataclass
class CentralizedPolicy:
    index: JointIndex
    values: np.ndarray
    policy: np.ndarray

    def joint_action(self, h, agg_labels, gen_comps, line):
        """Per-entity action indices at a joint state; aggregator labels are
        (d, e) pairs."""
        s = self.index.encode_state(h, agg_labels, gen_comps, line)
        return self.index.decode_action(int(self.policy[s]))


def centralized_solve(system, delta=None, tol=1e-8, state_limit=100_000,
                      work_limit=40_000_000):
    """Optimal joint value/policy under the operating constraints."""
    delta = system.delta if delta is None else delta
    mdp, idx = build_joint_mdp(system, state_limit=state_limit,
                               work_limit=work_limit)
    v, pol = value_iterate(mdp, price=0.0, delta=delta, tol=tol)
    return CentralizedPolicy(index=idx, values=v, policy=pol), mdp

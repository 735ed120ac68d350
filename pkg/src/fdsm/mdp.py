"""Finite discounted MDPs with a linear price term on the traded quantity.

States and actions are indices into caller-defined grids.  Transitions are
stored support-based (``next_idx``/``next_p``) so large product spaces stay
cheap.  All solvers minimize ``(1-delta)*(cost + price*quantity) + delta*E[V]``
with deterministic lowest-index tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    pass


@dataclass
class TabularMdp:
    cost: np.ndarray          # (S, A) stage cost, $ per period
    quantity: np.ndarray      # (S, A) MW traded, priced linearly
    next_idx: np.ndarray      # (S, A, K) successor state indices
    next_p: np.ndarray        # (S, A, K) successor probabilities
    feasible: np.ndarray | None = None  # (S, A) bool, None = all feasible
    labels: list = field(default_factory=list)   # state tuples, optional
    action_grid: np.ndarray | None = None        # MW value per action index

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.quantity = np.asarray(self.quantity, dtype=float)
        S, A = self.cost.shape
        if self.quantity.shape != (S, A):
            raise ModelError("quantity shape mismatch")
        if self.next_idx.shape != self.next_p.shape or self.next_idx.shape[:2] != (S, A):
            raise ModelError("transition shape mismatch")
        if np.any(self.next_p < -1e-15):
            raise ModelError("negative transition probability")
        sums = self.next_p.sum(axis=2)
        if self.feasible is not None:
            self.feasible = np.asarray(self.feasible, dtype=bool)
            if not self.feasible.any(axis=1).all():
                bad = int(np.flatnonzero(~self.feasible.any(axis=1))[0])
                raise ModelError(f"state {bad} has an empty action set")
            sums = np.where(self.feasible, sums, 1.0)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise ModelError("transition distributions must sum to 1")

    @property
    def n_states(self):
        return self.cost.shape[0]

    @property
    def n_actions(self):
        return self.cost.shape[1]


def priced_cost(mdp, price):
    return mdp.cost + price * mdp.quantity


def bellman_backup(mdp, values, price, delta):
    """One sweep; returns (new values, greedy policy)."""
    ev = np.einsum("sak,sak->sa", mdp.next_p, values[mdp.next_idx])
    q = (1.0 - delta) * priced_cost(mdp, price) + delta * ev
    if mdp.feasible is not None:
        q = np.where(mdp.feasible, q, np.inf)
    return q.min(axis=1), q.argmin(axis=1)


def value_iterate(mdp, price=0.0, delta=0.99, tol=1e-9, max_sweeps=200000,
                  v0=None):
    """Solve to a sup-norm Bellman residual of at most ``tol``.

    Returns (values, policy).  ``v0`` warm-starts the iteration.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"discount must be in [0, 1), got {delta}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.zeros(mdp.n_states) if v0 is None else np.asarray(v0, dtype=float).copy()
    policy = np.zeros(mdp.n_states, dtype=int)
    for _ in range(max_sweeps):
        v_new, policy = bellman_backup(mdp, v, price, delta)
        resid = np.max(np.abs(v_new - v))
        v = v_new
        if resid <= tol:
            break
    else:
        raise RuntimeError(f"value iteration did not reach tol={tol}")
    return v, policy


def policy_value(mdp, policy, price=0.0, delta=0.99):
    """Exact discounted value of a stationary policy (linear solve)."""
    S = mdp.n_states
    rows = np.arange(S)
    c = priced_cost(mdp, price)[rows, policy]
    P = np.zeros((S, S))
    idx = mdp.next_idx[rows, policy]   # (S, K)
    p = mdp.next_p[rows, policy]
    for s in range(S):
        np.add.at(P[s], idx[s], p[s])
    return np.linalg.solve(np.eye(S) - delta * P, (1.0 - delta) * c)


def stationary_distribution(mdp, policy, iters=2000):
    """Long-run state distribution under a policy (power iteration from uniform)."""
    S = mdp.n_states
    rows = np.arange(S)
    P = np.zeros((S, S))
    idx = mdp.next_idx[rows, policy]
    p = mdp.next_p[rows, policy]
    for s in range(S):
        np.add.at(P[s], idx[s], p[s])
    mu = np.full(S, 1.0 / S)
    for _ in range(iters):
        nxt = mu @ P
        if np.max(np.abs(nxt - mu)) < 1e-14:
            mu = nxt
            break
        mu = nxt
    return mu


def dump_tables_csv(mdp, values, policy, path):
    """Debug CSV: state label columns, value, action index (and MW if known)."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        width = len(mdp.labels[0]) if mdp.labels else 1
        header = [f"state_{k}" for k in range(width)] + ["value", "action"]
        if mdp.action_grid is not None:
            header.append("action_mw")
        w.writerow(header)
        for s in range(mdp.n_states):
            label = list(mdp.labels[s]) if mdp.labels else [s]
            row = label + [f"{values[s]:.6f}", int(policy[s])]
            if mdp.action_grid is not None:
                row.append(f"{mdp.action_grid[policy[s]]:.4f}")
            w.writerow(row)

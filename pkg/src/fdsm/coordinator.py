"""Distributed price coordination: per-ISO-state multipliers, conjectured
prices, and the stochastic projected-subgradient update loop.

The ISO keeps one nonnegative multiplier vector per visited ISO state (lazily
created at zero) and derives each entity's scalar conjectured price as the
inner product of the multipliers with that entity's constraint column.
Aggregator subproblems are solved per announced price and memoized on a
quantized price key.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .mdp import value_iterate


def price_from_multiplier(lam, constraints, entity):
    """Conjectured price for ``entity`` = ("agg", i) or ("gen", g)."""
    kind, k = entity
    lam = np.asarray(lam, dtype=float)
    if kind == "agg":
        return float(lam @ constraints.aggregator_column(k))
    if kind == "gen":
        return float(lam @ constraints.generator_column(k))
    raise ValueError(f"unknown entity kind {kind!r}")


def update_multipliers(lam, f_hat, step):
    """Projected subgradient step: max(lam + step*f_hat, 0) element-wise."""
    if step <= 0:
        raise ValueError("step size must be positive")
    return np.maximum(np.asarray(lam) + step * np.asarray(f_hat), 0.0)


def has_converged(tables_prev, tables_new, eps):
    """True iff every entity's value table moved by at most its tolerance.

    ``eps`` may be a scalar or a per-entity sequence.
    """
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (len(tables_new),))
    for (a, b, e) in zip(tables_prev, tables_new, eps):
        if a.shape != b.shape:
            raise ValueError("value tables have mismatched grids")
        if np.max(np.abs(a - b)) > e:
            return False
    return True


class MultiplierTable:
    """Lazy map from ISO-state key to a nonnegative multiplier vector."""

    def __init__(self, n_rows):
        self.n_rows = n_rows
        self.entries = {}
        self.visits = {}

    def get(self, key):
        if key not in self.entries:
            self.entries[key] = np.zeros(self.n_rows)
            self.visits[key] = 0
        return self.entries[key]

    def lookup(self, key):
        """Read-only lookup; unseen states fall back to the visit-weighted
        mean of known entries (zero when nothing was learned)."""
        if key in self.entries:
            return self.entries[key]
        if not self.entries:
            return np.zeros(self.n_rows)
        tot = sum(self.visits.values())
        if tot == 0:
            return np.zeros(self.n_rows)
        acc = np.zeros(self.n_rows)
        for k, lam in self.entries.items():
            acc += self.visits[k] * lam
        return acc / tot


@dataclass
class PurchaseAverager:
    """Running empirical mean of the aggregators' purchase requests."""

    sums: np.ndarray
    count: int = 0

    @classmethod
    def for_aggregators(cls, n):
        return cls(sums=np.zeros(n))

    def update(self, requests):
        self.sums = self.sums + np.asarray(requests, dtype=float)
        self.count += 1
        return self.sums / self.count

    @property
    def mean(self):
        return self.sums / max(self.count, 1)


class _SolveCache:
    """Price-keyed memo of (values, policy) for one entity's MDP."""

    def __init__(self, mdp, delta, tol, resolution):
        self.mdp = mdp
        self.delta = delta
        self.tol = tol
        self.resolution = resolution
        self.entries = {}

    def quantize(self, price):
        return round(price / self.resolution) * self.resolution

    def solve(self, price):
        key = self.quantize(price)
        if key not in self.entries:
            warm = None
            if self.entries:
                nearest = min(self.entries, key=lambda p: abs(p - key))
                warm = self.entries[nearest][0]
            self.entries[key] = value_iterate(
                self.mdp, price=key, delta=self.delta, tol=self.tol, v0=warm)
        return self.entries[key]


@dataclass
class RoundDiagnostics:
    iteration: int
    key: object
    f_hat: np.ndarray
    lam: np.ndarray
    agg_prices: np.ndarray
    gen_prices: np.ndarray
    agg_requests: np.ndarray
    iso_actions: np.ndarray
    value_shift: float


class Coordinator:
    """Owns the multiplier/price tables and runs Table-style rounds.

    ``shared_multiplier=True`` collapses the table to a single vector (the
    multi-user-MDP baseline).  ``exact_mean=True`` replaces the run-time
    empirical purchase mean with the state-average of the current policies.
    """

    def __init__(self, constraints, agg_mdps, gen_mdps, delta,
                 solve_tol=1e-7, price_resolution=0.01,
                 shared_multiplier=False, exact_mean=False):
        self.constraints = constraints
        self.delta = delta
        self.shared_multiplier = shared_multiplier
        self.exact_mean = exact_mean
        self.multipliers = MultiplierTable(constraints.row_count)
        self.averager = PurchaseAverager.for_aggregators(len(agg_mdps))
        self.agg_caches = [_SolveCache(m, delta, solve_tol, price_resolution)
                           for m in agg_mdps]
        self.gen_caches = [_SolveCache(m, delta, solve_tol, price_resolution)
                           for m in gen_mdps]
        self._prev_values = None
        self.iteration = 0

    def table_key(self, s0):
        return () if self.shared_multiplier else s0

    def prices_for(self, s0):
        """Current conjectured prices (read-only, no update)."""
        lam = self.multipliers.lookup(self.table_key(s0))
        agg = np.array([price_from_multiplier(lam, self.constraints, ("agg", i))
                        for i in range(len(self.agg_caches))])
        gen = np.array([price_from_multiplier(lam, self.constraints, ("gen", g))
                        for g in range(len(self.gen_caches))])
        return agg, gen

    def solve_aggregator(self, i, price):
        return self.agg_caches[i].solve(price)

    def solve_generator(self, g, price):
        return self.gen_caches[g].solve(price)

    def coordination_round(self, s0, agg_states, gen_components,
                           degraded_line=-1):
        """One iteration: solve subproblems at current prices, collect the
        aggregators' requests, update multipliers and prices for ``s0``.

        ``agg_states``/``gen_components`` are the entities' current state
        indices.  Returns :class:`RoundDiagnostics`.
        """
        key = self.table_key(s0)
        lam = self.multipliers.get(key).copy()
        agg_prices, gen_prices = self.prices_for(s0)

        requests = np.zeros(len(self.agg_caches))
        agg_solves = []
        for i, si in enumerate(agg_states):
            v, pol = self.solve_aggregator(i, agg_prices[i])
            agg_solves.append((v, pol))
            ai = int(pol[si])
            grid = self.agg_caches[i].mdp.action_grid
            if grid is None or si >= len(pol):
                raise ValueError("aggregator request off the action grid")
            requests[i] = grid[ai]

        iso_actions = np.zeros(len(self.gen_caches))
        gen_solves = []
        for g, sg in enumerate(gen_components):
            v, pol = self.solve_generator(g, gen_prices[g])
            gen_solves.append((v, pol))
            iso_actions[g] = self.gen_caches[g].mdp.action_grid[int(pol[sg])]

        if self.exact_mean:
            mean_purchases = np.array([
                cache.mdp.action_grid[pol].mean()
                for cache, (_, pol) in zip(self.agg_caches, agg_solves)])
            self.averager.update(requests)
        else:
            mean_purchases = self.averager.update(requests)

        f_hat = self.constraints.evaluate(iso_actions, mean_purchases,
                                          degraded_line)
        self.multipliers.visits[key] += 1
        step = 1.0 / self.multipliers.visits[key]
        self.multipliers.entries[key] = update_multipliers(lam, f_hat, step)

        values = [v for v, _ in agg_solves] + [v for v, _ in gen_solves]
        shift = np.inf
        if self._prev_values is not None:
            shift = max(np.max(np.abs(a - b))
                        for a, b in zip(self._prev_values, values))
        self._prev_values = values
        self.iteration += 1
        new_agg_prices, new_gen_prices = self.prices_for(s0)
        return RoundDiagnostics(
            iteration=self.iteration, key=key, f_hat=f_hat,
            lam=self.multipliers.entries[key].copy(),
            agg_prices=new_agg_prices, gen_prices=new_gen_prices,
            agg_requests=requests, iso_actions=iso_actions,
            value_shift=float(shift))

    def value_tables(self, s0):
        """Entity value tables at the current prices for ``s0``."""
        agg_prices, gen_prices = self.prices_for(s0)
        out = [self.solve_aggregator(i, p)[0]
               for i, p in enumerate(agg_prices)]
        out += [self.solve_generator(g, p)[0]
                for g, p in enumerate(gen_prices)]
        return out


def write_diagnostics_csv(path, diagnostics):
    """Per-iteration diagnostics stream (k, state key, multipliers, prices,
    constraint values)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "s0", "lambda", "agg_prices", "gen_prices", "f_hat",
                    "value_shift"])
        for d in diagnostics:
            w.writerow([
                d.iteration, repr(d.key),
                " ".join(f"{x:.6g}" for x in d.lam),
                " ".join(f"{x:.6g}" for x in d.agg_prices),
                " ".join(f"{x:.6g}" for x in d.gen_prices),
                " ".join(f"{x:.6g}" for x in d.f_hat),
                f"{d.value_shift:.6g}",
            ])

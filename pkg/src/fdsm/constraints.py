"""Linear operating constraints and their per-entity decomposition.

Rows 0..L-1 bound forward line flows, rows L..2L-1 the reverse flows, and the
last row is supply adequacy (total purchases <= total generation).  The whole
set evaluates as ``coeff_iso @ a0 + coeff_agg @ a + offset <= 0`` and splits
exactly into per-entity blocks, with the capacity offsets carried by the ISO
block so aggregator blocks are pure linear maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cdf import GridValidationError
from .dcflow import build_ptdf


@dataclass(frozen=True)
class ConstraintSet:
    coeff_iso: np.ndarray   # N x G
    coeff_agg: np.ndarray   # N x I
    base_offset: np.ndarray  # N, capacities at nominal ratings
    n_lines: int
    nominal_capacities: np.ndarray  # L

    @property
    def row_count(self):
        return 2 * self.n_lines + 1

    def offset(self, degraded_line=-1):
        """Offset vector with one line derated 10% (-1: all nominal)."""
        caps = self.nominal_capacities.copy()
        if degraded_line >= 0:
            caps[degraded_line] *= 0.9
        L = self.n_lines
        out = np.zeros(2 * L + 1)
        out[:L] = -caps
        out[L:2 * L] = -caps
        return out

    def evaluate(self, a_iso, a_agg, degraded_line=-1):
        """f(s0, a0, a) as an N-vector; nonpositive means feasible."""
        return (self.coeff_iso @ np.asarray(a_iso, dtype=float)
                + self.coeff_agg @ np.asarray(a_agg, dtype=float)
                + self.offset(degraded_line))

    def iso_block(self, a_iso, degraded_line=-1):
        """f_0(s0, a0): the ISO's share, carrying the constant offsets."""
        return self.coeff_iso @ np.asarray(a_iso, dtype=float) + self.offset(degraded_line)

    def aggregator_block(self, i, a_i):
        """f_i(s0, a_i) for aggregator i; linear, no offset."""
        return self.coeff_agg[:, i] * a_i

    def aggregator_column(self, i):
        return self.coeff_agg[:, i]

    def generator_column(self, g):
        return self.coeff_iso[:, g]


def assemble_constraints(model, ptdf=None):
    """Build the constraint set for a model with a total entity-bus mapping."""
    if model.n_generators == 0 or model.n_aggregators == 0:
        raise GridValidationError("model has no entity-to-bus mapping")
    if ptdf is None:
        ptdf = build_ptdf(model)
    pos = {b.id: k for k, b in enumerate(model.buses)}
    L = model.n_lines
    G, I = model.n_generators, model.n_aggregators
    N = 2 * L + 1
    coeff_iso = np.zeros((N, G))
    coeff_agg = np.zeros((N, I))
    for g, bus in enumerate(model.generator_buses):
        col = ptdf[:, pos[bus]]
        coeff_iso[:L, g] = col
        coeff_iso[L:2 * L, g] = -col
        coeff_iso[2 * L, g] = -1.0
    for i, bus in enumerate(model.aggregator_buses):
        col = ptdf[:, pos[bus]]
        coeff_agg[:L, i] = -col
        coeff_agg[L:2 * L, i] = col
        coeff_agg[2 * L, i] = 1.0
    caps = np.array([ln.nominal_capacity for ln in model.lines])
    base = np.zeros(N)
    base[:L] = -caps
    base[L:2 * L] = -caps
    return ConstraintSet(coeff_iso=coeff_iso, coeff_agg=coeff_agg,
                         base_offset=base, n_lines=L,
                         nominal_capacities=caps)

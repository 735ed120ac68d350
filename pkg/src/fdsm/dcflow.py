"""DC power flow: susceptance matrices and PTDF computation."""

from __future__ import annotations

import numpy as np


class NetworkError(ValueError):
    pass


def _bus_positions(model):
    return {b.id: k for k, b in enumerate(model.buses)}


def susceptance_matrix(model):
    """Full B matrix (B[k,k] = sum of 1/x over incident lines)."""
    pos = _bus_positions(model)
    nb = model.n_buses
    B = np.zeros((nb, nb))
    for ln in model.lines:
        f, t = pos[ln.from_bus], pos[ln.to_bus]
        b = 1.0 / ln.reactance
        B[f, f] += b
        B[t, t] += b
        B[f, t] -= b
        B[t, f] -= b
    return B


def connected_components(model):
    pos = _bus_positions(model)
    adj = {k: set() for k in range(model.n_buses)}
    for ln in model.lines:
        f, t = pos[ln.from_bus], pos[ln.to_bus]
        adj[f].add(t)
        adj[t].add(f)
    seen = set()
    comps = []
    for start in range(model.n_buses):
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        comps.append(comp)
    return comps


def solve_dc_flows(model, injections, slack=None):
    """Line flows for a balanced injection vector by direct solve of B'theta = P'.

    ``injections`` is ordered like ``model.buses`` in MW; flow on line l is
    (theta_from - theta_to)/x_l, positive from ``from_bus`` to ``to_bus``.
    """
    slack = model.slack_bus if slack is None else slack
    pos = _bus_positions(model)
    s = pos[slack]
    keep = [k for k in range(model.n_buses) if k != s]
    B = susceptance_matrix(model)
    P = np.asarray(injections, dtype=float)
    try:
        theta_red = np.linalg.solve(B[np.ix_(keep, keep)], P[keep])
    except np.linalg.LinAlgError as exc:
        raise NetworkError(f"singular reduced susceptance matrix: {exc}") from exc
    theta = np.zeros(model.n_buses)
    theta[keep] = theta_red
    flows = np.empty(model.n_lines)
    for k, ln in enumerate(model.lines):
        flows[k] = (theta[pos[ln.from_bus]] - theta[pos[ln.to_bus]]) / ln.reactance
    return flows


def build_ptdf(model, slack=None):
    """L x B power transfer distribution factor matrix, slack-referenced.

    Column b gives line flows for 1 MW injected at bus b and withdrawn at the
    slack; the slack column is identically zero.
    """
    comps = connected_components(model)
    if len(comps) > 1:
        comps.sort(key=len, reverse=True)
        orphan = sorted(model.buses[k].id for c in comps[1:] for k in c)
        raise NetworkError(f"network is disconnected; unreachable buses: {orphan}")
    slack = model.slack_bus if slack is None else slack
    pos = _bus_positions(model)
    s = pos[slack]
    nb, nl = model.n_buses, model.n_lines
    keep = [k for k in range(nb) if k != s]
    B = susceptance_matrix(model)
    try:
        Binv = np.linalg.inv(B[np.ix_(keep, keep)])
    except np.linalg.LinAlgError as exc:
        raise NetworkError(f"singular reduced susceptance matrix: {exc}") from exc
    # theta sensitivity, zero row/column at the slack
    X = np.zeros((nb, nb))
    X[np.ix_(keep, keep)] = Binv
    ptdf = np.zeros((nl, nb))
    for k, ln in enumerate(model.lines):
        f, t = pos[ln.from_bus], pos[ln.to_bus]
        ptdf[k, :] = (X[f, :] - X[t, :]) / ln.reactance
    ptdf[:, s] = 0.0
    return ptdf

"""Scenario presets and the experiment driver.

A run sweeps storage capacity and/or renewable uncertainty, trains the price
coordinator per scenario, simulates every requested scheme over the seed
list, and writes costs.csv / prices.csv / policy_table.csv / convergence.csv
plus the resolved config into the output directory.
"""

from __future__ import annotations

import csv
import importlib.resources
import os

import numpy as np

from .baselines import lyapunov_decide, myopic_decide
from .cdf import assign_entities, parse_cdf
from .centralized import centralized_solve
from .config import validate_config
from .constraints import assemble_constraints
from .coordinator import Coordinator, write_diagnostics_csv
from .entities import DemandProcess
from .sim import (CentralizedStrategy, LyapunovStrategy, MumdpStrategy,
                  MyopicStrategy, ProposedStrategy, cost_report,
                  estimate_lmp, run_episode)
from .system import build_system, run_coordination


PRESETS = {
    # deterministic golden-file scenario on the 3-bus toy
    "micro": """
[case]
file = toy3
default_capacity = 200
n_aggregators = 2
n_generators = 1
[entities]
hours_per_day = 4
peak_start = 2
peak_end = 3
storage_capacity = 10
storage_levels = 3
demand_levels = 2
action_grid = 0 25 50
production_grid = 0 40 80 120
penalty = 200
gen_coeff = 0.02
line_degradation = false
[coordination]
delta = 0.9
iterations = 40
min_iterations = 10
[simulation]
schemes = proposed myopic
horizon = 24
n_seeds = 2
""",
    # storage sweep, IEEE 14 bus (Fig. 4 analogue at desk scale)
    "fig4-desk": """
[case]
file = ieee14
default_capacity = 200
n_aggregators = 2
n_generators = 1
[entities]
hours_per_day = 6
peak_start = 4
peak_end = 5
peak_base = 50
off_base = 25
peak_range = 5
off_range = 5
demand_levels = 3
storage_levels = 0
action_grid = 0 20 40
production_grid = 0 30 60 90 120
penalty = 500
gen_coeff = 0.02
ramp_coeff = 0.01
line_degradation = false
[coordination]
delta = 0.99
iterations = 300
[simulation]
schemes = centralized proposed lyapunov myopic
horizon = 720
n_seeds = 20
storage_sweep = 5 15 25 35 45
""",
    # renewable uncertainty sweep (Fig. 7 analogue)
    "fig7-desk": """
[case]
file = ieee14
default_capacity = 200
n_aggregators = 1
n_generators = 1
[entities]
hours_per_day = 6
peak_start = 4
peak_end = 5
peak_range = 5
off_range = 5
demand_levels = 3
storage_levels = 0
action_grid = 0 10 20 30 40
production_grid = 0 5 10 15 20 25 30 35 40 45 50
capacity_grid = 50
penalty = 500
n_renewable = 1
line_degradation = false
[coordination]
delta = 0.99
iterations = 300
[simulation]
schemes = proposed
horizon = 720
n_seeds = 10
storage_sweep = 25 50
uncertainty_sweep = 0 5 10 15 20
""",
    # 18-state strategy table (Table VII analogue): 3 demand x 3 storage
    # levels x 2 sun states, single aggregator, one renewable generator
    "table7": """
[case]
file = toy3
default_capacity = 400
n_aggregators = 1
n_generators = 1
[entities]
hours_per_day = 1
peak_start = 0
peak_end = 0
peak_base = 20
peak_range = 10
demand_levels = 3
storage_capacity = 40
storage_levels = 3
action_grid = 5 20 35
production_grid = 0 10 20 30 40 50
capacity_grid = 10 50
penalty = 100
n_renewable = 1
line_degradation = false
[coordination]
delta = 0.99
iterations = 400
price_resolution = 0.25
drift_variant = storage-only
[simulation]
schemes = proposed mumdp lyapunov myopic
horizon = 240
n_seeds = 5
""",
    # conjectured-price vs LMP comparison on IEEE 14 (section V.B analogue)
    "prices-desk": """
[case]
file = ieee14
default_capacity = 200
n_aggregators = 2
n_generators = 1
[entities]
hours_per_day = 6
peak_start = 4
peak_end = 5
peak_range = 5
off_range = 5
demand_levels = 3
storage_capacity = 25
storage_levels = 0
action_grid = 0 5 10 15 20 25 30 35 40
production_grid = 0 40 88 130
penalty = 500
gen_coeff = 0.02
ramp_coeff = 0.001
line_degradation = false
[coordination]
delta = 0.99
iterations = 600
min_iterations = 600
[simulation]
schemes = proposed
horizon = 240
n_seeds = 20
""",
}


def preset_config(name):
    return validate_config(PRESETS[name])


def load_case(cfg):
    """Resolve the case name to a bundled file or filesystem path."""
    bundled = importlib.resources.files("fdsm") / "data" / f"{cfg.case_file}.cdf"
    if bundled.is_file():
        text = bundled.read_text()
    else:
        with open(cfg.case_file) as fh:
            text = fh.read()
    model = parse_cdf(text, default_capacity=cfg.default_capacity)
    return assign_entities(model,
                           n_aggregators=cfg.n_aggregators or None,
                           n_generators=cfg.n_generators or None)


def build_scenario(cfg, grid=None, storage=None, uncertainty=None):
    """SystemModel for one sweep point."""
    if grid is None:
        grid = load_case(cfg)
    constraints = assemble_constraints(grid)
    demand = DemandProcess(hours_per_day=cfg.hours_per_day,
                           peak_window=(cfg.peak_start, cfg.peak_end),
                           peak_base=cfg.peak_base, off_base=cfg.off_base,
                           peak_range=cfg.peak_range, off_range=cfg.off_range)
    cap = cfg.storage_capacity if storage is None else storage
    levels = cfg.storage_levels
    if levels == 0:
        levels = max(int(round(cap / 5.0)) + 1, 2)   # 5 MW storage grid
    capacity_grid = cfg.capacity_grid
    if uncertainty is not None:
        base = float(np.mean(cfg.capacity_grid))
        capacity_grid = np.unique(np.linspace(base - uncertainty,
                                              base + uncertainty, 3))
    return build_system(
        grid, constraints, demand,
        n_aggregators=grid.n_aggregators,
        storage_capacity=cap, storage_levels=levels,
        demand_levels=cfg.demand_levels,
        action_grid=np.asarray(cfg.action_grid, dtype=float),
        penalty=cfg.penalty, overage_coeff=cfg.overage_coeff,
        n_renewable=cfg.n_renewable,
        production_grid=np.asarray(cfg.production_grid, dtype=float),
        capacity_grid=np.asarray(capacity_grid, dtype=float),
        gen_coeff=cfg.gen_coeff, ramp_coeff=cfg.ramp_coeff,
        line_degradation=cfg.line_degradation, delta=cfg.delta)


def train_coordinator(system, cfg, shared=False, record=None):
    coord = Coordinator(system.constraints, system.agg_mdps, system.gen_mdps,
                        cfg.delta, solve_tol=cfg.solve_tol,
                        price_resolution=cfg.price_resolution,
                        shared_multiplier=shared)
    run_coordination(system, coord, cfg.iterations, seed=cfg.first_seed,
                     eps=cfg.eps, min_iterations=cfg.min_iterations,
                     record=record)
    return coord


def make_strategies(system, cfg, schemes=None, record=None):
    """Train whatever the scheme list needs; returns {kind: strategy}."""
    schemes = cfg.schemes if schemes is None else schemes
    out = {}
    if "proposed" in schemes:
        out["proposed"] = ProposedStrategy(
            train_coordinator(system, cfg, record=record))
    if "mumdp" in schemes:
        out["mumdp"] = MumdpStrategy(
            train_coordinator(system, cfg, shared=True))
    if "centralized" in schemes:
        policy, _ = centralized_solve(system, state_limit=cfg.state_limit,
                                      work_limit=cfg.work_limit)
        out["centralized"] = CentralizedStrategy(policy)
    if "myopic" in schemes:
        out["myopic"] = None    # stateful; built fresh per episode
    if "lyapunov" in schemes:
        out["lyapunov"] = None
    return out


def fresh_strategy(kind, trained, cfg):
    if kind == "myopic":
        return MyopicStrategy()
    if kind == "lyapunov":
        return LyapunovStrategy(variant=cfg.drift_variant)
    return trained[kind]


def sweep_points(cfg):
    storages = cfg.storage_sweep or [cfg.storage_capacity]
    if cfg.uncertainty_sweep:
        return [(s, u) for s in storages for u in cfg.uncertainty_sweep]
    return [(s, None) for s in storages]


def run_experiment(cfg, out_dir=None, write_figures=None):
    """Execute the configured experiment; returns the list of cost rows."""
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved.ini"), "w") as fh:
        fh.write(cfg.dump())

    grid = load_case(cfg)
    cost_rows, price_rows, policy_rows, diagnostics = [], [], [], []
    for storage, uncertainty in sweep_points(cfg):
        system = build_scenario(cfg, grid, storage=storage,
                                uncertainty=uncertainty)
        record = []
        trained = make_strategies(system, cfg, record=record)
        for d in record:
            diagnostics.append((storage, uncertainty, d))
        for kind in cfg.schemes:
            for seed in cfg.seeds():
                strat = fresh_strategy(kind, trained, cfg)
                trace = run_episode(system, strat, cfg.horizon, seed=seed)
                rep = cost_report(trace, system)
                cost_rows.append({
                    "scheme": kind, "storage_mw": storage,
                    "uncertainty_mw": "" if uncertainty is None else uncertainty,
                    "seed": seed,
                    "normalized_cost": rep.normalized_cost,
                    "discounted_cost": rep.discounted_cost,
                    "undiscounted_total": rep.undiscounted_total,
                    "mean_price": float(np.mean(rep.mean_prices)),
                    "safeguard_rate": rep.safeguard_rate,
                    "infeasible_rate": rep.infeasible_rate,
                    "per_agg_cost": " ".join(
                        f"{c:.6g}" for c in rep.per_aggregator)})
                if kind == "proposed":
                    lmp = estimate_lmp(trace, system)
                    for i in range(system.n_aggregators):
                        conj = float(rep.mean_prices[i])
                        price_rows.append({
                            "seed": seed, "storage_mw": storage,
                            "aggregator": i,
                            "conjectured_price": conj,
                            "expected_lmp": float(lmp[i]),
                            "rel_gap": (conj - lmp[i]) / lmp[i]
                            if lmp[i] > 0 else float("nan")})
        policy_rows.extend(policy_table_rows(system, cfg, trained, storage))

    _write_csv(os.path.join(out_dir, "costs.csv"), cost_rows)
    _write_csv(os.path.join(out_dir, "prices.csv"), price_rows)
    _write_csv(os.path.join(out_dir, "policy_table.csv"), policy_rows)
    write_diagnostics_sweep(os.path.join(out_dir, "convergence.csv"),
                            diagnostics)
    print(summary_table(cost_rows))
    if write_figures if write_figures is not None else cfg.figures:
        from .report import render_figures
        render_figures(out_dir)
    return cost_rows


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.8g}" if isinstance(v, float) else v)
                        for k, v in r.items()})


def write_diagnostics_sweep(path, diagnostics):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["storage_mw", "uncertainty_mw", "k", "s0", "lambda",
                    "agg_prices", "gen_prices", "f_hat", "value_shift"])
        for storage, uncertainty, d in diagnostics:
            w.writerow([
                storage, "" if uncertainty is None else uncertainty,
                d.iteration, repr(d.key),
                " ".join(f"{x:.6g}" for x in d.lam),
                " ".join(f"{x:.6g}" for x in d.agg_prices),
                " ".join(f"{x:.6g}" for x in d.gen_prices),
                " ".join(f"{x:.6g}" for x in d.f_hat),
                f"{d.value_shift:.6g}"])


# ---------------------------------------------------------------------------
# quantized strategy tables

ACTION_LABELS = ("small", "medium", "large")


def action_label(spec, action_idx):
    n = len(spec.action_grid)
    band = min(action_idx * len(ACTION_LABELS) // max(n, 1),
               len(ACTION_LABELS) - 1)
    return ACTION_LABELS[band]


def _iso_states_by_sun(system):
    """Representative ISO state per renewable capacity level ('sun' state)."""
    rens = [g for g, sp in enumerate(system.gen_specs)
            if sp.kind == "renewable"]
    if not rens:
        return [(0, None)]
    g = rens[0]
    n = len(system.gen_specs[g].capacity_grid)
    states = []
    for lvl in range(n):
        comps = tuple(lvl if gg == g else 0
                      for gg in range(system.n_generators))
        states.append((lvl, (comps, -1)))
    return states


def baseline_table_price(system, cfg, kind, seed=0):
    """Representative scalar price for a baseline scheme: the mean marginal
    dispatch cost over one episode."""
    strat = fresh_strategy(kind, {}, cfg)
    trace = run_episode(system, strat, min(cfg.horizon, 240), seed=seed)
    return float(np.mean([p[0] for p in trace.agg_prices]))


def policy_table_rows(system, cfg, trained, storage, aggregator=0, hour=0):
    """Quantized (demand, storage, sun) -> action table per scheme."""
    spec = system.agg_specs[aggregator]
    rows = []
    sun_states = _iso_states_by_sun(system)
    base_prices = {}
    for kind in cfg.schemes:
        for sun, s0 in sun_states:
            for di in range(len(spec.demand_grid)):
                for ei in range(len(spec.storage_grid)):
                    if kind in ("proposed", "mumdp"):
                        coord = trained[kind].coordinator
                        key_state = s0 if s0 is not None else 0
                        agg_p, _ = coord.prices_for(key_state)
                        _, pol = coord.solve_aggregator(aggregator,
                                                        agg_p[aggregator])
                        si = system.agg_state_index(aggregator,
                                                    (hour, di, ei))
                        ai = int(pol[si])
                    elif kind == "centralized":
                        continue
                    else:
                        if kind not in base_prices:
                            base_prices[kind] = baseline_table_price(
                                system, cfg, kind)
                        p = base_prices[kind]
                        d = spec.demand_grid[di]
                        e = spec.storage_grid[ei]
                        if kind == "myopic":
                            ai = myopic_decide(spec, d, e, p)
                        else:
                            ai = lyapunov_decide(spec, d, e, p,
                                                 cfg.drift_variant)
                    rows.append({
                        "scheme": kind, "storage_mw": storage,
                        "demand_level": di, "storage_level": ei,
                        "sun_level": sun,
                        "action_mw": float(spec.action_grid[ai]),
                        "label": action_label(spec, ai)})
    return rows


def summary_table(cost_rows):
    """Mean normalized cost per (scheme, sweep point) as printable text."""
    groups = {}
    for r in cost_rows:
        key = (r["scheme"], r["storage_mw"], r["uncertainty_mw"])
        groups.setdefault(key, []).append(r["normalized_cost"])
    lines = [f"{'scheme':<12} {'storage':>8} {'uncert':>7} "
             f"{'mean cost':>12} {'runs':>5}"]
    for (scheme, st, un), vals in sorted(groups.items(),
                                         key=lambda kv: (str(kv[0]))):
        lines.append(f"{scheme:<12} {st!s:>8} {un!s:>7} "
                     f"{np.mean(vals):>12.4f} {len(vals):>5}")
    return "\n".join(lines)

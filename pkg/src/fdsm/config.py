"""Experiment configuration: flat INI text (section / key = value) with every
field defaulted to the baseline simulation setup.  Unknown keys are rejected
so a typo cannot silently fall back to a default, and each violation is
reported with its section.key path.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .baselines import (DRIFT_STORAGE_ONLY, DRIFT_WITH_DEMAND, STRATEGY_KINDS)


class ConfigError(ValueError):
    """Carries the full list of field-level problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _floats(s):
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s):
    return [int(x) for x in s.replace(",", " ").split()]


def _words(s):
    return s.replace(",", " ").split()


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (parser, default-as-text)
SCHEMA = {
    "case": {
        "file": (str, "ieee14"),
        "default_capacity": (float, "100.0"),
        "n_aggregators": (int, "0"),        # 0 = every non-generator load bus
        "n_generators": (int, "0"),         # 0 = every generator bus
    },
    "entities": {
        "storage_capacity": (float, "25.0"),
        "storage_levels": (int, "3"),
        "demand_levels": (int, "3"),
        "action_grid": (_floats, "0 20 40 60"),
        "penalty": (float, "500.0"),
        "overage_coeff": (float, "2.0"),
        "n_renewable": (int, "0"),
        "production_grid": (_floats, "0 30 60 90 120"),
        "capacity_grid": (_floats, "90 100 110"),
        "gen_coeff": (float, "0.5"),
        "ramp_coeff": (float, "0.1"),
        "hours_per_day": (int, "24"),
        "peak_start": (int, "17"),
        "peak_end": (int, "22"),
        "peak_base": (float, "50.0"),
        "off_base": (float, "25.0"),
        "peak_range": (float, "5.0"),
        "off_range": (float, "2.0"),
        "line_degradation": (_bool, "true"),
    },
    "coordination": {
        "delta": (float, "0.99"),
        "eps": (float, "1e-4"),
        "iterations": (int, "500"),
        "min_iterations": (int, "50"),
        "price_resolution": (float, "0.01"),
        "solve_tol": (float, "1e-7"),
        "drift_variant": (str, DRIFT_WITH_DEMAND),
    },
    "simulation": {
        "schemes": (_words, "proposed myopic lyapunov mumdp"),
        "horizon": (int, "1440"),
        "n_seeds": (int, "10"),
        "first_seed": (int, "0"),
        "storage_sweep": (_floats, ""),      # empty = single storage_capacity
        "uncertainty_sweep": (_floats, ""),  # renewable capacity deviations
    },
    "centralized": {
        "state_limit": (int, "100000"),
        "work_limit": (int, "40000000"),
    },
    "output": {
        "dir": (str, "out"),
        "figures": (_bool, "true"),
    },
}


@dataclass
class ExperimentConfig:
    case_file: str
    default_capacity: float
    n_aggregators: int
    n_generators: int
    storage_capacity: float
    storage_levels: int
    demand_levels: int
    action_grid: list
    penalty: float
    overage_coeff: float
    n_renewable: int
    production_grid: list
    capacity_grid: list
    gen_coeff: float
    ramp_coeff: float
    hours_per_day: int
    peak_start: int
    peak_end: int
    peak_base: float
    off_base: float
    peak_range: float
    off_range: float
    line_degradation: bool
    delta: float
    eps: float
    iterations: int
    min_iterations: int
    price_resolution: float
    solve_tol: float
    drift_variant: str
    schemes: list
    horizon: int
    n_seeds: int
    first_seed: int
    storage_sweep: list
    uncertainty_sweep: list
    state_limit: int
    work_limit: int
    out_dir: str
    figures: bool

    def seeds(self):
        return list(range(self.first_seed, self.first_seed + self.n_seeds))

    def dump(self):
        """Resolved config as INI text (stable ordering, reparseable)."""
        lines = []
        by_section = _section_map()
        for section in SCHEMA:
            lines.append(f"[{section}]")
            for key in SCHEMA[section]:
                val = getattr(self, by_section[(section, key)])
                if isinstance(val, (list, tuple, np.ndarray)):
                    val = " ".join(str(x) for x in val)
                elif isinstance(val, bool):
                    val = "true" if val else "false"
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)


def _section_map():
    """(section, key) -> dataclass field name."""
    special = {("case", "file"): "case_file", ("output", "dir"): "out_dir"}
    out = {}
    for section, keys in SCHEMA.items():
        for key in keys:
            out[(section, key)] = special.get((section, key), key)
    return out


def validate_config(text=""):
    """Parse INI text into an ExperimentConfig; raises ConfigError listing
    every violation.  Empty text yields the full-default config."""
    cp = configparser.ConfigParser()
    errors = []
    try:
        cp.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc

    values = {}
    by_section = _section_map()
    for section in cp.sections():
        if section not in SCHEMA:
            errors.append(f"{section}: unknown section")
            continue
        for key in cp[section]:
            if key not in SCHEMA[section]:
                errors.append(f"{section}.{key}: unknown key")
                continue
            parser, _ = SCHEMA[section][key]
            try:
                values[(section, key)] = parser(cp[section][key])
            except (ValueError, TypeError) as exc:
                errors.append(f"{section}.{key}: {exc}")
    kwargs = {}
    for section, keys in SCHEMA.items():
        for key, (parser, default) in keys.items():
            kwargs[by_section[(section, key)]] = values.get(
                (section, key), parser(default))

    cfg = ExperimentConfig(**kwargs)
    errors.extend(check_config(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def check_config(cfg):
    """Cross-field checks; returns a list of violation messages."""
    errs = []
    if not 0.0 <= cfg.delta < 1.0:
        errs.append("coordination.delta: discount must be >= 0 and < 1")
    if cfg.horizon < 1:
        errs.append("simulation.horizon: must be >= 1")
    if cfg.n_seeds < 1:
        errs.append("simulation.n_seeds: must be >= 1")
    if cfg.storage_capacity < 0:
        errs.append("entities.storage_capacity: must be >= 0")
    if any(s < 0 for s in cfg.storage_sweep):
        errs.append("simulation.storage_sweep: entries must be >= 0")
    if any(u < 0 for u in cfg.uncertainty_sweep):
        errs.append("simulation.uncertainty_sweep: entries must be >= 0")
    if cfg.penalty < 0:
        errs.append("entities.penalty: must be >= 0")
    if cfg.storage_levels < 0:
        errs.append("entities.storage_levels: must be >= 0 (0 = 5 MW grid)")
    if cfg.demand_levels < 1:
        errs.append("entities.demand_levels: must be >= 1")
    if not cfg.action_grid:
        errs.append("entities.action_grid: must be nonempty")
    elif sorted(cfg.action_grid) != list(cfg.action_grid):
        errs.append("entities.action_grid: must be sorted ascending")
    if not cfg.production_grid:
        errs.append("entities.production_grid: must be nonempty")
    if cfg.hours_per_day < 1:
        errs.append("entities.hours_per_day: must be >= 1")
    if not 0 <= cfg.peak_start <= cfg.peak_end:
        errs.append("entities.peak_start/peak_end: need 0 <= start <= end")
    unknown = [s for s in cfg.schemes if s not in STRATEGY_KINDS]
    if unknown:
        errs.append(f"simulation.schemes: unknown scheme(s) {unknown}; "
                    f"valid: {list(STRATEGY_KINDS)}")
    if cfg.drift_variant not in (DRIFT_WITH_DEMAND, DRIFT_STORAGE_ONLY):
        errs.append("coordination.drift_variant: must be "
                    f"'{DRIFT_WITH_DEMAND}' or '{DRIFT_STORAGE_ONLY}'")
    if cfg.eps <= 0 or cfg.solve_tol <= 0 or cfg.price_resolution <= 0:
        errs.append("coordination.eps/solve_tol/price_resolution: "
                    "must be > 0")
    if cfg.n_renewable < 0:
        errs.append("entities.n_renewable: must be >= 0")
    if cfg.state_limit < 1 or cfg.work_limit < 1:
        errs.append("centralized.state_limit/work_limit: must be >= 1")
    return errs

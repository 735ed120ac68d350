"""Shared fixtures: bundled case files and small assembled systems."""

import importlib.resources

import numpy as np
import pytest

from fdsm.cdf import assign_entities, parse_cdf
from fdsm.constraints import assemble_constraints
from fdsm.entities import DemandProcess
from fdsm.system import build_system


def bundled_case(name):
    return (importlib.resources.files("fdsm") / "data" / f"{name}.cdf").read_text()


@pytest.fixture(scope="session")
def toy3_text():
    return bundled_case("toy3")


@pytest.fixture(scope="session")
def ieee14_text():
    return bundled_case("ieee14")


@pytest.fixture(scope="session")
def toy3(toy3_text):
    return parse_cdf(toy3_text)


@pytest.fixture(scope="session")
def ieee14(ieee14_text):
    return parse_cdf(ieee14_text)


@pytest.fixture(scope="session")
def toy3_mapped(toy3):
    return assign_entities(toy3, n_aggregators=2, n_generators=1)


@pytest.fixture(scope="session")
def ieee14_mapped(ieee14):
    return assign_entities(ieee14)


def small_system(grid_mapped, *, hours_per_day=2, peak_window=(1, 1),
                 peak_base=20.0, off_base=10.0, peak_range=4.0, off_range=4.0,
                 demand_levels=2, storage_capacity=10.0, storage_levels=2,
                 action_grid=(0.0, 10.0, 20.0, 30.0), penalty=100.0,
                 n_renewable=0, production_grid=(0.0, 20.0, 40.0, 60.0),
                 capacity_grid=(40.0, 60.0), gen_coeff=0.05, ramp_coeff=0.0,
                 line_degradation=False, delta=0.9):
    """A deliberately tiny scenario for fast solver tests."""
    demand = DemandProcess(hours_per_day=hours_per_day,
                           peak_window=peak_window, peak_base=peak_base,
                           off_base=off_base, peak_range=peak_range,
                           off_range=off_range)
    constraints = assemble_constraints(grid_mapped)
    return build_system(
        grid_mapped, constraints, demand,
        storage_capacity=storage_capacity, storage_levels=storage_levels,
        demand_levels=demand_levels,
        action_grid=np.asarray(action_grid, dtype=float), penalty=penalty,
        n_renewable=n_renewable,
        production_grid=np.asarray(production_grid, dtype=float),
        capacity_grid=np.asarray(capacity_grid, dtype=float),
        gen_coeff=gen_coeff, ramp_coeff=ramp_coeff,
        line_degradation=line_degradation, delta=delta)

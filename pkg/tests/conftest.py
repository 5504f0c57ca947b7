"""Shared fixtures: packaged objectives and cached case-study runs."""

from __future__ import annotations

import numpy as np
import pytest

from fxtflows import cli, network, problems
from fxtflows.core import quadratic_objective


@pytest.fixture(scope="session")
def packaged_objectives():
    """Representative objectives with full certificates, for property sweeps."""
    circle = network.cycle_graph(4)
    return {
        "identity2": quadratic_objective(np.eye(2)),
        "singular2": quadratic_objective(np.array([[1.0, -1.0], [-1.0, 1.0]])),
        "shifted": quadratic_objective(np.eye(2), np.array([-1.0, 0.0])),
        "random5": problems.random_quadratic(5, 0.5, 4.0, seed=11),
        "consensus4": network.consensus_objective(circle),
        "logistic": problems.logistic_objective(
            *problems._case1_data(seed=5, n_samples=80), reg=1.0
        ),
    }


@pytest.fixture(scope="session")
def case1_bundle():
    inst = problems.build_case1(seed=0)
    return inst, cli.run_case(inst)


@pytest.fixture(scope="session")
def case2_bundle():
    inst = problems.build_case2(seed=0)
    return inst, cli.run_case(inst)


@pytest.fixture(scope="session")
def case3_bundle():
    inst = problems.build_case3(seed=0)
    return inst, cli.run_case(inst)


@pytest.fixture(scope="session")
def case4_bundle():
    inst = problems.build_case4()
    return inst, cli.run_case(inst)

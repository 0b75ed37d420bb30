from __future__ import annotations

import numpy as np
import pytest

from peravg.cli import shipped_config
from peravg.fields import VectorField
from peravg.geometry import HopfBundle, TrivialBundle
from peravg.vfdsl import load_config

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def omega_trivial(P):
    return 1.0 + 0.25 * P[:, 1] ** 2


def omega_hopf(P):
    return 1.0 + 0.25 * (P[:, 0] ** 2 + P[:, 1] ** 2 - P[:, 2] ** 2 - P[:, 3] ** 2)


@pytest.fixture
def trivial():
    return TrivialBundle(1, omega_trivial)


@pytest.fixture
def hopf():
    return HopfBundle(omega_hopf)


def x1_trivial(model):
    return VectorField(model, lambda P: np.stack(
        [0.5 * np.cos(P[:, 0]) * P[:, 1],
         np.sin(P[:, 0]) + P[:, 1] + np.cos(2 * P[:, 0]) * P[:, 1] ** 2], axis=1), name="X1")


def x1_hopf(model):
    return VectorField(model, lambda P: np.stack(
        [P[:, 2] + 0.3 * P[:, 0] * P[:, 3], P[:, 3] + 0.2 * P[:, 1] ** 2,
         -P[:, 0] + 0.2 * np.sin(P[:, 1]), -P[:, 1] + 0.1 * P[:, 2]], axis=1), name="X1")


@pytest.fixture(scope="session")
def shipped():
    """The shipped configurations, loaded once."""
    return {n: load_config(shipped_config(n)) for n in ("one_frequency", "hopf", "adiabatic")}


@pytest.fixture(scope="session")
def one_frequency_run(shipped):
    """System, constants and default sweep of the one-frequency config."""
    from peravg.harness import System, verify_theorem

    cfg = shipped["one_frequency"]
    system = System.from_config(cfg)
    K = system.constants()
    return system, K, verify_theorem(cfg, K, system=system)

"""Shared helpers: seeded random states and trajectories.

Tests that need randomness draw from numpy Generators with explicit seeds
so every run sees the same numbers; nothing here touches global RNG state.
"""

import sys

import numpy as np
import pytest

from statecast.tfim import TimeSeries, build_tfim_hamiltonian


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance verdict lines where they survive capture."""
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None) if mod else None
    if verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in verdicts:
            terminalreporter.write_line(line)


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_series(
    rng: np.random.Generator, count: int, dim: int, dt: float = 0.1
) -> TimeSeries:
    states = np.stack([random_state(rng, dim) for _ in range(count)])
    return TimeSeries(states=states, dt=dt, burn_in=0, origin="test")


@pytest.fixture(scope="session")
def chain4():
    """The 4-site chain at the couplings used throughout (J = 0.5, h = 5)."""
    return build_tfim_hamiltonian(4, 0.5, 5.0)

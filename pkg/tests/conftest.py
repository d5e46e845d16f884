"""Shared fixtures: the reference congestion instance at desk scales."""

import numpy as np
import pytest

from congestion_mfg import (
    CouplingSpec,
    FixedPointOptions,
    GridSpec,
    ModelParams,
    solve_mfg,
)


def reference_params(horizon=1.0):
    return ModelParams(nu=0.5, beta=2.0, alpha=1.0, mu=1.0, horizon=horizon)


def cosine_density(grid, amplitude=0.5):
    coords = grid.coords()
    wave = np.ones(grid.shape)
    for x in coords:
        wave = wave * np.cos(2.0 * np.pi * x)
    return 1.0 + amplitude * wave


@pytest.fixture(scope="session")
def ref32():
    """Converged reference instance on the 32 x 32 space-time grid."""
    grid = GridSpec(dim=1, n=32, nt=32, horizon=1.0)
    sol = solve_mfg(
        grid,
        reference_params(),
        CouplingSpec(),
        FixedPointOptions(),
        m0=cosine_density(grid),
    )
    assert sol.converged
    return sol


@pytest.fixture(scope="session")
def ref64():
    """Converged reference instance on the 64 x 64 grid (regression fixture)."""
    grid = GridSpec(dim=1, n=64, nt=64, horizon=1.0)
    sol = solve_mfg(
        grid,
        reference_params(),
        CouplingSpec(),
        FixedPointOptions(),
        m0=cosine_density(grid),
    )
    assert sol.converged
    return sol

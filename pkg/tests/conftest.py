import math
import os

import numpy as np
import pytest

from plme_lab import evolve
from plme_lab.noise import NoiseModel
from plme_lab.plme import DriveProfile, plme4_generator

# half the scenario default: removes the O(dt^2) trajectory-step bias from the
# extracted rates at the shortest correlation time (convergence-tested)
ENSEMBLE_DT = 2.0 * math.pi / 400.0
ENSEMBLE_T_MAX = 15.0
ENSEMBLE_N_TRAJ = 20_000
THREADS = min(8, os.cpu_count() or 1)


def _ensemble(model: NoiseModel, seed: int) -> evolve.EnsembleResult:
    grid = evolve.default_output_grid(ENSEMBLE_T_MAX, ENSEMBLE_DT)
    cfg = evolve.EnsembleConfig(n_traj=ENSEMBLE_N_TRAJ, dt=ENSEMBLE_DT, seed=seed,
                                grid=grid, n_batches=20, threads=THREADS)
    return evolve.exact_ensemble(model, DriveProfile.constant(1.0), cfg)


@pytest.fixture(scope="session")
def ou_ensembles():
    """20000-trajectory ensembles for exponentially correlated noise, sigma = 0.05."""
    return {tc: _ensemble(NoiseModel.ornstein_uhlenbeck(0.05, tc), seed)
            for tc, seed in ((10.0, 73001), (1.0, 73002), (0.2, 73003))}


@pytest.fixture(scope="session")
def onef_ensemble():
    """20000-trajectory ensemble for 1/f noise, sigma = 0.01, omega_l = 1e-3."""
    return _ensemble(NoiseModel.one_over_f(0.01, 1e-3, 1e3), 73004)


@pytest.fixture(scope="session")
def plme4_gen_sigma05():
    """4th-order generator for quasistatic noise at sigma = 0.05, up to t = 25."""
    return plme4_generator(NoiseModel.quasistatic(0.05), DriveProfile.constant(1.0),
                           25.0, grid_points=313, nodes=24)

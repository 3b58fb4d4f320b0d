"""Shared fixtures: the desk-scale experiment matrix, computed once per session.

The coherent max-min runs dominate the suite's wall time (dense conic
subproblems over lifted 9x9 downlink matrices), so every cell of the matrix
is run exactly once here and the tests only read the cached results. All
cells share the same per-setup artifacts, which is also what makes every
comparison between cells a paired one.
"""

import time

import pytest

from cellfree_wpt.channel import NetworkConfig
from cellfree_wpt.energy import eh_model_presets
from cellfree_wpt.experiments_cli import setup_artifacts
from cellfree_wpt.maxmin_optimizer import algorithm1, fpc_baseline

DESK_SETUPS = 20
DESK_SEED = 0

# (estimator, scheme, rectifier): the M1 cells cover the scheme and estimator
# comparisons, the extra M2 cell the rectifier comparison
MMF_CELLS = (
    ("lmmse", "coherent", "M1"),
    ("lmmse", "noncoherent", "M1"),
    ("ls", "coherent", "M1"),
    ("ls", "noncoherent", "M1"),
    ("lmmse", "noncoherent", "M2"),
)
FPC_CELLS = (
    ("lmmse", "coherent", "M1"),
    ("lmmse", "noncoherent", "M1"),
    ("ls", "coherent", "M1"),
    ("ls", "noncoherent", "M1"),
)


@pytest.fixture(scope="session")
def desk_cfg():
    return NetworkConfig()


@pytest.fixture(scope="session")
def desk_artifacts(desk_cfg):
    """(estimator, setup) -> (coeffs, inputs, norms), shared by every cell."""
    arts = {}
    for estimator in ("lmmse", "ls"):
        for s in range(DESK_SETUPS):
            arts[estimator, s] = setup_artifacts(desk_cfg, DESK_SEED, s,
                                                 estimator)
    return arts


@pytest.fixture(scope="session")
def desk_matrix(desk_cfg, desk_artifacts):
    """All optimizer runs of the acceptance matrix with per-run wall times.

    Keyed by (estimator, scheme, rectifier, mode); each value is a list of
    DESK_SETUPS dicts with the full optimizer result and its runtime.
    """
    presets = eh_model_presets()
    cells = {}
    for estimator, scheme, eh in MMF_CELLS:
        runs = []
        for s in range(DESK_SETUPS):
            coeffs, inputs, norms = desk_artifacts[estimator, s]
            t0 = time.perf_counter()
            res = algorithm1(coeffs, inputs, norms, presets[eh], desk_cfg,
                             scheme=scheme)
            runs.append({"setup": s, "result": res,
                         "seconds": time.perf_counter() - t0})
        cells[estimator, scheme, eh, "mmf"] = runs
    for estimator, scheme, eh in FPC_CELLS:
        runs = []
        for s in range(DESK_SETUPS):
            coeffs, inputs, norms = desk_artifacts[estimator, s]
            res = fpc_baseline(coeffs, inputs, norms, presets[eh], desk_cfg,
                               scheme=scheme)
            runs.append({"setup": s, "result": res, "seconds": 0.0})
        cells[estimator, scheme, eh, "fpc"] = runs
    return cells

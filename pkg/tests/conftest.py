import os
from pathlib import Path

import numpy as np
import pytest

from spectral_noise import io as sio
from spectral_noise import quantum_floquet as qf
from spectral_noise.model import ModelParams

REFERENCE_S = (0.0, 2.5, 10.0, 100.0)
ACCEPTANCE = {}


def small_params(**kw):
    """E_b = 10 double well: quick to propagate, still ~10 doublets."""
    return ModelParams(E_b=10.0, **kw)


def small_grid(p, n=256):
    return qf.build_grid(p, 3 * p.E_b, n)


_PROPAGATORS = {}


def reference_propagator(S: float) -> qf.UnitaryPropagator:
    """Default-grid propagator (1024 points, 4096 slices) for the reference
    parameters; kept for the session and optionally cached on disk via
    SPECTRAL_NOISE_CACHE."""
    if S in _PROPAGATORS:
        return _PROPAGATORS[S]
    p = ModelParams(S=S)
    cache = os.environ.get("SPECTRAL_NOISE_CACHE")
    path = Path(cache) / f"prop_S{S:g}.bin" if cache else None
    if path is not None and path.exists():
        U = sio.read_propagator(path)
    else:
        grid = qf.build_grid(p)
        U = qf.propagate_period(p, grid, 4096)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            sio.write_propagator(path, U)
    _PROPAGATORS[S] = U
    return U


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])

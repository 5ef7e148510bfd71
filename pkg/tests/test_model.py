import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_noise import quantum_floquet as qf
from spectral_noise.model import (GridTooSmallError, HarmonicParams, ModelParams, force,
                                  potential, static_hamiltonian, turning_point)

REF = ModelParams()


def test_potential_vanishes_at_origin():
    for t in (0.0, 1.3, -7.0):
        assert potential(0.0, t, REF.replace(S=0.0)) == 0.0
        assert potential(0.0, t, REF.replace(S=10.0)) == 0.0


def test_potential_minimum_depth():
    q = math.sqrt(800)
    assert potential(q, 0.0, REF) == pytest.approx(-100.0, abs=1e-12)
    # independent check: numerical minimisation of the static potential
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(lambda x: REF.static_potential(x), bounds=(1, 60), method="bounded",
                          options={"xatol": 1e-10})
    assert res.x == pytest.approx(math.sqrt(800), rel=1e-6)
    assert res.fun == pytest.approx(-100.0, abs=1e-9)


def test_potential_direct_arithmetic():
    p = ModelParams(S=2.5, phi=math.pi / 3)
    expected = -0.25 + 1.5625e-4 + 2.5 * math.cos(math.pi / 3)
    assert potential(1.0, 0.0, p) == pytest.approx(expected, rel=1e-14)
    assert potential(1.0, 0.0, p) == pytest.approx(1.00016, abs=1e-5)


def test_force_zeros():
    assert force(0.0, 0.3, REF) == 0.0
    assert force(REF.q_well, 0.0, REF) == pytest.approx(0.0, abs=1e-12)
    assert force(-REF.q_well, 2.0, REF) == pytest.approx(0.0, abs=1e-12)


def test_force_matches_central_differences(rng):
    p = ModelParams(S=2.5)
    q = rng.uniform(-60, 60, 1000)
    t = rng.uniform(0, 3 * p.period, 1000)
    h = 1e-5
    fd = -(potential(q + h, t, p) - potential(q - h, t, p)) / (2 * h)
    f = force(q, t, p)
    scale = np.maximum(np.abs(f), 1.0)
    assert np.max(np.abs(fd - f) / scale) < 1e-6


@settings(max_examples=200, deadline=None)
@given(q=st.floats(-80, 80), t=st.floats(-50, 50), S=st.floats(0, 100))
def test_generalized_parity(q, t, S):
    p = ModelParams(S=S, phi=0.0)
    a = potential(q, t, p)
    b = potential(-q, t + math.pi / p.Omega, p)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(q=st.floats(-60, 60), t=st.floats(0, 20))
def test_force_derivative_consistent(q, t):
    p = ModelParams(S=10.0)
    h = 1e-4
    fd = (force(q + h, t, p) - force(q - h, t, p)) / (2 * h)
    assert p.force_derivative(q, t) == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_params_validation():
    for bad in ({"m": 0}, {"omega0": -1}, {"Omega": 0}, {"E_b": -5}, {"S": -0.1},
                {"hbar_eff": 0}, {"E_b": float("nan")}):
        with pytest.raises(ValueError):
            ModelParams(**bad)
    p = ModelParams()
    assert p.period == pytest.approx(2 * math.pi / 0.95)
    assert math.isfinite(p.period) and p.period > 0


def test_params_roundtrip_dict():
    p = ModelParams(S=2.5, Omega=0.9)
    assert ModelParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        ModelParams.from_dict({"bogus": 1})


def test_turning_point():
    qt = turning_point(REF, 300.0)
    assert REF.static_potential(qt) == pytest.approx(300.0, rel=1e-12)
    assert qt == pytest.approx(math.sqrt(2400), rel=1e-12)


@pytest.fixture(scope="module")
def ref_hamiltonian():
    grid = qf.build_grid(REF)
    H = static_hamiltonian(REF, grid)
    return grid, H, np.linalg.eigvalsh(H)


def test_static_hamiltonian_hermitian(ref_hamiltonian):
    _, H, _ = ref_hamiltonian
    assert np.abs(H - H.conj().T).max() < 1e-12


def test_static_ground_state(ref_hamiltonian):
    _, _, E = ref_hamiltonian
    # harmonic estimate -E_b + hbar*omega/2
    assert E[0] == pytest.approx(-99.5, abs=0.1)


def test_low_levels_form_doublets(ref_hamiltonian):
    _, _, E = ref_hamiltonian
    low = E[:40]
    splitting = low[1::2] - low[0::2]
    gaps = low[2::2] - low[1:-1:2]
    assert np.all(splitting < 1e-3 * REF.hbar_eff * REF.omega0)
    assert np.all(gaps > 0.5 * REF.hbar_eff * REF.omega0)
    # roughly E_b doublets below the barrier top
    n_below = np.sum(E < 0)
    assert 0.6 * REF.E_b <= n_below / 2 <= 1.4 * REF.E_b


def test_static_spectrum_converges_under_grid_doubling(ref_hamiltonian):
    grid, _, E = ref_hamiltonian
    fine = qf.Grid(grid.q_min, grid.q_max, 2 * grid.n_points)
    E2 = np.linalg.eigvalsh(static_hamiltonian(REF, fine))
    assert np.abs(E2[:100] - E[:100]).max() < 1e-8


def test_static_hamiltonian_grid_too_small():
    grid = qf.Grid(-20, 20, 256)
    with pytest.raises(GridTooSmallError):
        static_hamiltonian(REF, grid, e_max=300.0)
    coarse = qf.Grid(-62, 62, 64)
    with pytest.raises(GridTooSmallError, match="n_points"):
        static_hamiltonian(REF, coarse, e_max=300.0)


def test_harmonic_hook_interface():
    h = HarmonicParams(omega0=2.0)
    assert h.period == pytest.approx(math.pi)
    q = np.linspace(-3, 3, 7)
    assert np.allclose(h.force(q, 0.0), -4.0 * q)
    assert np.allclose(h.potential(q, 1.0), 2.0 * q * q)

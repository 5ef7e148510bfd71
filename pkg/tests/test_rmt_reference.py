import math

import numpy as np
import pytest
from scipy import stats

from spectral_noise import rmt_reference as rmt
from spectral_noise import spectral_stats as st


def _spacings(spec, central=0.8):
    levels = rmt.sample_levels(spec)
    if spec.kind in ("goe", "gue"):
        unf = st.unfold_ensemble(levels, 7, central)
    elif spec.kind in ("cue", "coe"):
        unf = [st.unfold(l, period=2 * np.pi) for l in levels]
    else:
        unf = [st.unfold(l) for l in levels]
    return np.concatenate([np.diff(u.levels) for u in unf])


def test_poisson_spacings_exponential():
    s = _spacings(rmt.EnsembleSpec("poisson", 1000, 20, seed=1))
    assert stats.kstest(s, "expon").statistic < 0.05


def _wigner_surmise_cdf(s):
    return 1 - np.exp(-np.pi * s**2 / 4)


def test_goe_level_repulsion():
    s = _spacings(rmt.EnsembleSpec("goe", 400, 30, seed=2))
    frac_small = np.mean(s < 0.1)
    # Poisson would give 1 - exp(-0.1) ~ 0.095
    assert (1 - math.exp(-0.1)) / frac_small > 3
    # and the bulk agrees with the Wigner surmise
    ks = stats.kstest(s, _wigner_surmise_cdf).statistic
    assert ks < 0.05


def test_cue_density_flat():
    levels = rmt.sample_levels(rmt.EnsembleSpec("cue", 200, 100, seed=3))
    h, _ = np.histogram(np.concatenate(levels), bins=10, range=(-np.pi, np.pi))
    assert np.abs(h / h.mean() - 1).max() < 0.02


def test_semicircle_edge():
    lev = rmt.sample_one(rmt.EnsembleSpec("goe", 500, seed=4), 0)
    R = rmt.semicircle_radius(500)
    assert abs(lev.max() / R - 1) < 0.05 and abs(lev.min() / R + 1) < 0.05


def test_dense_and_tridiagonal_agree():
    a = rmt.sample_levels(rmt.EnsembleSpec("goe", 200, 40, seed=5))
    b = rmt.sample_levels(rmt.EnsembleSpec("goe", 200, 40, seed=6, method="tridiagonal"))
    assert stats.ks_2samp(np.concatenate(a), np.concatenate(b), method="asymp").pvalue > 0.01
    g1 = rmt.sample_levels(rmt.EnsembleSpec("gue", 200, 40, seed=5))
    g2 = rmt.sample_levels(rmt.EnsembleSpec("gue", 200, 40, seed=6, method="tridiagonal"))
    assert stats.ks_2samp(np.concatenate(g1), np.concatenate(g2), method="asymp").pvalue > 0.01


def test_matrices_have_symmetry():
    rng = np.random.default_rng(0)
    H = rmt.sample_matrix("goe", 50, rng)
    assert np.array_equal(H, H.T)
    H = rmt.sample_matrix("gue", 50, rng)
    assert np.allclose(H, H.conj().T)
    U = rmt.sample_matrix("cue", 50, rng)
    assert np.allclose(U.conj().T @ U, np.eye(50), atol=1e-12)
    C = rmt.sample_matrix("coe", 50, rng)
    assert np.allclose(C, C.T) and np.allclose(C.conj().T @ C, np.eye(50), atol=1e-12)


def test_reproducible_and_independent_streams():
    spec = rmt.EnsembleSpec("goe", 64, 5, seed=42)
    a = rmt.sample_levels(spec)
    b = rmt.sample_levels(spec)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    # each realization can be regenerated on its own
    assert np.array_equal(rmt.sample_one(spec, 3), a[3])
    assert not np.array_equal(a[0], a[1])
    spawned = np.random.SeedSequence(42).spawn(5)[3]
    r = np.random.Generator(np.random.PCG64(spawned)).standard_normal(3)
    assert np.array_equal(r, rmt.realization_rng(42, 3).standard_normal(3))


def test_spec_validation():
    with pytest.raises(ValueError, match="theory_pk"):
        rmt.EnsembleSpec("gse", 100)
    for bad in ({"kind": "xyz", "dim": 100}, {"kind": "goe", "dim": 8},
                {"kind": "goe", "dim": 100, "realizations": 0},
                {"kind": "goe", "dim": 100, "seed": -1},
                {"kind": "goe", "dim": 100, "method": "lanczos"}):
        with pytest.raises(ValueError):
            rmt.EnsembleSpec(**bad)


def test_theory_pk_values():
    assert rmt.theory_pk("goe", 1000, 10) == pytest.approx(1000 / (20 * math.pi**2))
    assert rmt.theory_pk(1, 1000, 10) == pytest.approx(5.0661, abs=1e-4)
    assert rmt.theory_pk("poisson", 1000, 10) == pytest.approx(253.30, abs=0.01)
    assert rmt.theory_pk(2, 1000, 10) == pytest.approx(rmt.theory_pk(1, 1000, 10) / 2)
    assert rmt.theory_pk("beta4", 1000, 10) == pytest.approx(rmt.theory_pk(1, 1000, 10) / 4)
    k = np.arange(1, 50)
    assert np.allclose(rmt.theory_pk(1, 1000, k) * k, rmt.theory_pk(1, 1000, 1))


def test_theory_pk_errors():
    for k in (0, 1000):
        with pytest.raises(ValueError):
            rmt.theory_pk(1, 1000, k)
    with pytest.raises(ValueError):
        rmt.theory_pk(3, 1000, 5)


def test_finite_theory_reduces_to_limit():
    k = np.arange(1, 20)
    D = 10_000
    for kind in ("poisson", 1, 2):
        assert np.allclose(rmt.theory_pk_finite(kind, D, k) / rmt.theory_pk(kind, D, k), 1,
                           rtol=0.05)


def test_form_factor_theory_limits():
    tau = np.array([0.0, 0.5, 1.0, 3.0])
    assert np.allclose(rmt.form_factor_theory("poisson", tau), 1)
    assert np.allclose(rmt.form_factor_theory(2, tau), [0, 0.5, 1, 1])
    goe = rmt.form_factor_theory(1, tau)
    assert goe[0] == 0 and goe[-1] == pytest.approx(1, abs=0.02)
    assert goe[1] == pytest.approx(1 - 0.5 * math.log(2))


def test_cue_form_factor_is_ramp():
    levels = rmt.sample_levels(rmt.EnsembleSpec("cue", 100, 300, seed=7))
    K = np.mean([st.form_factor(st.unfold(l, period=2 * np.pi), 150).values
                 for l in levels], axis=0)
    tau = np.arange(151) / 100
    m = (tau > 0.1) & (tau < 1.5)
    # unsmoothed: relative scatter ~ 1/sqrt(300)
    assert np.abs(K[m] - rmt.form_factor_theory(2, tau[m])).mean() < 0.05

"""Acceptance criteria at their stated tolerances.

Every test prints one PASS/FAIL line and stores it for the terminal summary.
The Floquet criteria use the reference propagators (1024 points, 4096
slices); set SPECTRAL_NOISE_CACHE to a directory to reuse them across runs.
"""
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE, REFERENCE_S, reference_propagator
from spectral_noise import phase_space as ps
from spectral_noise import quantum_floquet as qf
from spectral_noise import rmt_reference as rmt
from spectral_noise import spectral_stats as st
from spectral_noise.model import ModelParams, static_hamiltonian

pytestmark = pytest.mark.slow

TARGET_ALPHA = dict(zip(REFERENCE_S, (1.99, 1.71, 1.29, 1.13)))


def report(n, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {name} | {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


# ------------------------------------------------------------------ ensembles

@pytest.fixture(scope="module")
def poisson_deltas():
    spec = rmt.EnsembleSpec("poisson", 1000, 2000, seed=101)
    return [st.delta_series(st.unfold(l)) for l in rmt.sample_levels(spec)]


@pytest.fixture(scope="module")
def goe_unfolded():
    spec = rmt.EnsembleSpec("goe", 1000, 1000, seed=202, method="tridiagonal")
    return st.unfold_ensemble(rmt.sample_levels(spec), 7, 0.8)


@pytest.fixture(scope="module")
def goe_power(goe_unfolded):
    return st.power_spectrum_delta([st.delta_series(u) for u in goe_unfolded])


@pytest.fixture(scope="module")
def poisson_power(poisson_deltas):
    return st.power_spectrum_delta(poisson_deltas)


def test_c1_rmt_alpha(poisson_power, goe_power):
    a_p = st.fit_alpha(poisson_power, 1, 50).alpha
    a_g = st.fit_alpha(goe_power, 1, 50).alpha
    ok = 1.9 <= a_p <= 2.1 and 0.9 <= a_g <= 1.1
    report(1, "RMT alpha recovery", ok,
           f"Poisson alpha={a_p:.3f} (n={poisson_power.n_averaged}, D=1000), "
           f"GOE alpha={a_g:.3f} (n={goe_power.n_averaged}, N=1000, k 1-50)")


def test_c2_theory_curves(poisson_power, goe_power):
    Dg = goe_power.window_len
    kg = goe_power.k[goe_power.k <= 50]
    rg = goe_power.values[:len(kg)] / rmt.theory_pk(1, Dg, kg) - 1
    Dp = poisson_power.window_len
    kp = poisson_power.k[poisson_power.k <= Dp // 20]
    rp = poisson_power.values[:len(kp)] / rmt.theory_pk("poisson", Dp, kp) - 1
    bad_g = kg[np.abs(rg) > 0.15]
    bad_p = kp[np.abs(rp) > 0.10]
    ok = len(bad_g) == 0 and len(bad_p) == 0
    report(2, "theory-curve match", ok,
           f"GOE max|dev|={np.abs(rg).max():.3f} (15%), bins out: {bad_g.tolist()}; "
           f"Poisson max|dev|={np.abs(rp).max():.3f} (10%), bins out: {bad_p.tolist()}")


def test_c3_power_formfactor_identity(poisson_deltas, goe_unfolded):
    rng_unf = [st.unfold(d.levels()) for d in poisson_deltas[:200]]
    worst = {}
    for name, unf in (("Poisson", rng_unf), ("GOE", goe_unfolded[:200])):
        D = unf[0].count
        ls = range(math.ceil(0.05 * D), int(0.5 * D) + 1)
        rep = st.check_power_formfactor_identity(unf, ls)
        worst[name] = (float(np.abs(rep.ratio - 1).max()), rep.n_averaged)
    ok = all(w < 0.15 for w, _ in worst.values())
    report(3, "power/form-factor identity", ok,
           "; ".join(f"{k} max|ratio-1|={w:.3f} (n={n})" for k, (w, n) in worst.items())
           + ", tau 0.05-0.5, tol 0.15")


# ------------------------------------------------------------------ Floquet

def _alpha_at(S):
    p = ModelParams(S=S)
    U = reference_propagator(S)
    spec = qf.quasienergies(U, p)
    try:
        kept = qf.select_bound_states(U, spec)
    except qf.TooFewStatesError as exc:
        return None, str(exc)
    d = st.delta_series(st.unfold_quasienergies(kept))
    pw = st.power_spectrum_delta(d, min(256, len(d)))
    fit = st.fit_alpha(pw)
    return fit.alpha, f"D_H={kept.D_H}"


def test_c4_floquet_sweep():
    res = {S: _alpha_at(S) for S in REFERENCE_S}
    alphas = [res[S][0] for S in REFERENCE_S]
    parts = []
    for S in REFERENCE_S:
        a, note = res[S]
        parts.append(f"S={S:g}: " + (f"alpha={a:.3f} {note}" if a is not None
                                     else f"no alpha ({note})"))
    complete = all(a is not None for a in alphas)
    ok = (complete
          and 1.85 <= alphas[0] <= 2.1
          and all(b < a for a, b in zip(alphas, alphas[1:]))
          and all(abs(res[S][0] - TARGET_ALPHA[S]) <= 0.2 for S in REFERENCE_S))
    report(4, "Floquet sweep", ok, "; ".join(parts))


def test_c5_trace_identity():
    ratios = {}
    for S in REFERENCE_S[:3]:
        U = reference_propagator(S)
        F = ps.wigner_propagator_diagonal(U, "grid", (256, 256))
        ratios[S] = ps.check_trace_identity(F, U)
    # diagnostic only: retained states on the default window
    p = ModelParams(S=0.0)
    U0 = reference_propagator(0.0)
    kept = qf.select_bound_states(U0, qf.quasienergies(U0, p))
    Fr = ps.wigner_propagator_diagonal(U0, None, (256, 256), spectrum=kept, params=p)
    diag = ps.check_trace_identity(Fr, U0, kept)
    ok = all(abs(r - 1) <= 0.02 for r in ratios.values())
    report(5, "trace identity", ok,
           ", ".join(f"S={S:g} ratio={r:.6f}" for S, r in ratios.items())
           + f" (grid window, 2%); retained S=0 default window ratio={diag:.4f}")


def test_c6_wigner_kernel_gaussian_packet():
    p = ModelParams(S=0.0)
    U = reference_propagator(0.0)
    g = U.grid
    E, Z = np.linalg.eigh(static_hamiltonian(p, g))
    x = g.q
    psi0 = np.exp(-((x - p.q_well) ** 2) / 2 + 0.5j * x).astype(complex)
    psi0 /= np.linalg.norm(psi0)
    psiT = Z @ (np.exp(-1j * E * p.period / p.hbar_eff) * (Z.conj().T @ psi0))
    W = ps.propagate_wigner(ps.wigner_transform(psi0, g), U)
    Wref = ps.wigner_transform(psiT, g)
    err = np.linalg.norm(W - Wref) / np.linalg.norm(Wref)
    report(6, "Wigner kernel vs Schroedinger", err < 1e-3,
           f"relative L2 error={err:.2e} (tol 1e-3), n={g.n_points}")


def test_c7_classical_layer():
    p0 = ModelParams(S=0.0)
    seeds = ps.section_seeds(p0, 40)
    dets = []
    for S in REFERENCE_S[:3]:
        M = ps.monodromy(p0.replace(S=S), seeds)
        dets.append(np.abs(np.linalg.det(M) - 1).max())
    det_err = max(dets)
    inner = seeds[p0.energy(seeds[:, 0], seeds[:, 1]) < 2 * p0.E_b]
    q1, p1 = ps.stroboscopic_map(p0, inner[:, 0], inner[:, 1], 1)
    drift = np.abs(p0.energy(q1[0], p1[0]) - p0.energy(inner[:, 0], inner[:, 1])).max()
    frac = {}
    for S in REFERENCE_S[:3]:
        p = p0.replace(S=S)
        sec = ps.poincare_section(p, seeds, 200)
        frac[S] = ps.shell_fraction(p, sec, 0.05)
    ok = (det_err <= 1e-6 and drift < 1e-8 * p0.E_b
          and frac[0.0] >= 0.9 and 0.1 <= frac[2.5] <= 0.9 and frac[10.0] <= 0.1)
    report(7, "classical layer", ok,
           f"max|det-1|={det_err:.1e}, S=0 drift/E_b={drift / p0.E_b:.1e}, "
           "shell fractions " + ", ".join(f"S={S:g}: {f:.3f}" for S, f in frac.items()))


# ------------------------------------------------------------------ closure

def test_c8_deviation_closure():
    tau = np.linspace(0.01, 2.0, 400)
    cl = 1 / (4 * np.pi**2 * tau**2)
    errs, pure = [], []
    for D in (100.0, 1000.0, 1e15):
        corr = 1 / (4 * np.pi**2 * D * tau**2)
        for beta in (1, 2, 4):
            branch = 1 / (2 * np.pi**2 * beta * tau)
            r = st.normalized_deviation(D * (2 / beta) * tau * cl, cl, D, tau).values
            errs.append(np.abs((r - (branch - corr)) / branch).max())
            if D == 1e15:
                pure.append(np.abs(r / branch - 1).max())
        r = st.normalized_deviation(D * cl, cl, D, tau).values
        errs.append(np.abs((r - (cl - corr)) / cl).max())
        if D == 1e15:
            pure.append(np.abs(r / cl - 1).max())
    worst, pure = float(np.max(errs)), float(np.max(pure))
    ok = worst < 1e-12 and pure < 1e-12
    report(8, "deviation closure", ok,
           f"max rel err incl. -1/(4 pi^2 D tau^2) term={worst:.1e} (D=100, 1e3, 1e15), "
           f"D=1e15 pure-branch max rel err={pure:.1e}")

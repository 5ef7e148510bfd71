"""End-to-end runs driven by a RunConfig.

Every run writes into its own directory:

    summary.json       headline numbers (alpha, D_H, ...) plus the seed
    manifest.ini       the config echo, re-runnable as a config file
    *.csv              data files (17 significant digits)
    *.bin              binary containers (see ``spectral_noise.io``)
"""
from __future__ import annotations

import contextlib
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import io as sio
from . import phase_space as ps
from . import quantum_floquet as qf
from . import rmt_reference as rmt
from . import spectral_stats as st
from .config import RunConfig

__all__ = ["NumericalFailure", "run", "sweep", "floquet_spectrum", "sweep_configs"]


class NumericalFailure(RuntimeError):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except NumericalFailure:
        raise
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(name, str(exc)) from exc


def floquet_spectrum(cfg: RunConfig, Omega: float | None = None, workers=None):
    """Propagator, full quasispectrum and retained quasispectrum."""
    p = cfg.model if Omega is None else cfg.model.replace(Omega=Omega)
    g = cfg.grid
    with _stage("grid"):
        grid = qf.build_grid(p, g.e_max, g.n_points, g.q_margin, g.p_margin)
    with _stage("propagate"):
        U = qf.propagate_period(p, grid, g.slices, g.order, workers=workers)
    with _stage("quasienergies"):
        spec = qf.quasienergies(U, p)
    s = cfg.selection
    with _stage("select"):
        kept = qf.select_bound_states(U, spec, s.edge_fraction, s.threshold, s.min_states)
    return p, U, spec, kept


def _fit_range(cfg, window_len, kmax):
    k_hi = cfg.fit.k_hi or max(window_len // 8, cfg.fit.k_lo + 7)
    return cfg.fit.k_lo, min(k_hi, kmax)


def _run_floquet_alpha(cfg, out, workers):
    deltas = []
    D_H = []
    first = None
    for dlt in cfg.averaging.omega_deltas:
        Om = cfg.model.Omega * (1 + dlt)
        p, U, spec, kept = floquet_spectrum(cfg, Om, workers)
        if first is None:
            first = kept
            sio.write_column(out / "quasienergies.csv", kept.energies)
            sio.write_spectrum(out / "quasienergies.bin", kept)
        with _stage("unfold"):
            deltas.append(st.delta_series(st.unfold_quasienergies(kept)))
        D_H.append(kept.D_H)
    with _stage("power_spectrum"):
        D_w = cfg.averaging.window_len or min(len(d) for d in deltas)
        D_w = min(D_w, min(len(d) for d in deltas))
        pspec = st.power_spectrum_delta(deltas, D_w, cfg.averaging.overlap)
    with _stage("fit"):
        fit = st.fit_alpha(pspec, *_fit_range(cfg, pspec.window_len, int(pspec.k[-1])))
    d0 = deltas[0]
    sio.write_columns(out / "delta.csv", ("q", "delta"), np.arange(1, len(d0) + 1), d0.values)
    sio.write_columns(out / "power_spectrum.csv", ("k", "P"), pspec.k, pspec.values)
    return {"alpha": fit.alpha, "k_range": list(fit.k_range), "residual": fit.residual_rms,
            "log_intercept": fit.log_intercept, "D_H": D_H[0], "D_H_all": D_H,
            "window_len": pspec.window_len, "n_averaged": pspec.n_averaged,
            "S": cfg.model.S}


def _ensemble_unfolded(cfg):
    e = cfg.ensemble
    spec = rmt.EnsembleSpec(e.kind, e.dim, e.realizations, cfg.seed, e.method)
    with _stage("sample"):
        levels = rmt.sample_levels(spec)
    with _stage("unfold"):
        if e.kind in ("goe", "gue"):
            unf = st.unfold_ensemble(levels, e.order, e.central)
        elif e.kind in ("cue", "coe"):
            unf = [st.unfold(l, "linear", period=2 * np.pi) for l in levels]
        else:
            unf = [st.unfold(l, "linear") for l in levels]
    return levels, unf


def _run_rmt_alpha(cfg, out, workers):
    levels, unf = _ensemble_unfolded(cfg)
    sio.write_column(out / "levels.csv", levels[0])
    with _stage("power_spectrum"):
        deltas = [st.delta_series(u) for u in unf]
        D_w = cfg.averaging.window_len or min(len(d) for d in deltas)
        D_w = min(D_w, min(len(d) for d in deltas))
        pspec = st.power_spectrum_delta(deltas, D_w, cfg.averaging.overlap)
    with _stage("fit"):
        fit = st.fit_alpha(pspec, *_fit_range(cfg, pspec.window_len, int(pspec.k[-1])))
    kind = cfg.ensemble.kind
    th = rmt.theory_pk(kind if kind == "poisson" else rmt._BETA[kind], pspec.window_len, pspec.k)
    sio.write_columns(out / "power_spectrum.csv", ("k", "P", "theory"), pspec.k, pspec.values, th)
    return {"alpha": fit.alpha, "k_range": list(fit.k_range), "residual": fit.residual_rms,
            "log_intercept": fit.log_intercept, "D_H": unf[0].count,
            "window_len": pspec.window_len, "n_averaged": pspec.n_averaged,
            "kind": kind, "realizations": cfg.ensemble.realizations}


def _run_formfactor(cfg, out, workers):
    f = cfg.formfactor
    if f.source == "floquet":
        _, U, _, kept = floquet_spectrum(cfg, workers=workers)
        unf = [st.unfold_quasienergies(kept)]
    else:
        _, unf = _ensemble_unfolded(cfg)
    D = unf[0].count
    l_max = f.l_max or 2 * D
    with _stage("form_factor"):
        Ks = [st.form_factor(u, l_max, f.smooth or None) for u in unf]
        K = np.mean([k.values for k in Ks], axis=0)
        ls = np.arange(max(1, int(np.ceil(f.tau_min * D))), int(f.tau_max * D) + 1)
        rep = st.check_power_formfactor_identity(unf, ls)
    sio.write_columns(out / "form_factor.csv", ("tau", "K"), Ks[0].tau, K)
    sio.write_columns(out / "identity.csv", ("tau", "ratio", "Pn", "K"),
                      rep.tau, rep.ratio, rep.power, rep.form_factor)
    return {"D_H": D, "l_max": l_max, "n_averaged": rep.n_averaged,
            "identity_ratio_min": float(rep.ratio.min()),
            "identity_ratio_max": float(rep.ratio.max()),
            "averaging_sufficient": rep.sufficient}


def _run_phasespace(cfg, out, workers):
    ph = cfg.phasespace
    p = cfg.model
    res = tuple(ph.resolution)
    summary = {"S": p.S}
    window = ph.window
    if "wigner" in ph.fields:
        g = cfg.grid
        with _stage("grid"):
            grid = qf.build_grid(p, g.e_max, g.n_points, g.q_margin, g.p_margin)
        with _stage("propagate"):
            U = qf.propagate_period(p, grid, g.slices, g.order, workers=workers)
        kept = None
        if ph.retained:
            with _stage("select"):
                spec = qf.quasienergies(U, p)
                s = cfg.selection
                kept = qf.select_bound_states(U, spec, s.edge_fraction, s.threshold, s.min_states)
        with _stage("wigner_diagonal"):
            wwin = None if window == "default" else window
            fld = ps.wigner_propagator_diagonal(U, wwin, res, spectrum=kept, params=p)
            ratio = ps.check_trace_identity(fld, U, kept)
        sio.write_field(out / "wigner_diagonal.bin", fld)
        sio.write_field_csv(out / "wigner_diagonal.csv", fld)
        summary.update(trace_ratio=ratio, trace_U=abs(U.trace()) ** 2 if kept is None
                       else float(abs(kept.eigenvalues.sum()) ** 2))
    if "liouville" in ph.fields:
        lwin = None if window in ("default", "grid") else window
        with _stage("liouville_diagonal"):
            fld = ps.liouville_diagonal_estimate(p, p.period, lwin, res, ph.epsilon or None)
        sio.write_field(out / "liouville_diagonal.bin", fld)
        sio.write_field_csv(out / "liouville_diagonal.csv", fld)
        summary["liouville_integral"] = fld.integral()
    return summary


_PIPES = {"floquet_alpha": _run_floquet_alpha, "rmt_alpha": _run_rmt_alpha,
          "formfactor": _run_formfactor, "phasespace": _run_phasespace}


def _versions():
    from . import __version__
    return {"spectral_noise": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(path, cfg: RunConfig, wall: float):
    head = [f"# seed: {cfg.seed}"]
    head += [f"# {k}: {v}" for k, v in _versions().items()]
    head.append(f"# wall_time_s: {wall:.3f}")
    Path(path).write_text("\n".join(head) + "\n" + cfg.to_ini())


def run(cfg: RunConfig, out: str | Path | None = None, workers: int | None = None) -> dict:
    """Execute ``cfg.pipeline``; returns the summary written to summary.json.

    Raises NumericalFailure (carrying the stage name) on numerical problems.
    """
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary = _PIPES[cfg.pipeline](cfg, out, workers)
    summary.update(pipeline=cfg.pipeline, seed=cfg.seed, parameters=cfg.model.to_dict())
    sio.write_json(out / "summary.json", summary)
    write_manifest(out / "manifest.ini", cfg, time.perf_counter() - t0)
    return summary


def sweep_configs(cfg: RunConfig, S_values=None) -> list:
    S_values = cfg.sweep_S if S_values is None else S_values
    return [cfg.with_model(S=float(S)) for S in S_values]


def _sweep_one(args):
    cfg, out, workers = args
    try:
        s = run(cfg, out, workers)
        return {"S": cfg.model.S, "alpha": s.get("alpha", float("nan")),
                "D_H": s.get("D_H", 0), "residual": s.get("residual", float("nan")),
                "status": "ok"}
    except NumericalFailure as exc:
        return {"S": cfg.model.S, "alpha": float("nan"), "D_H": 0,
                "residual": float("nan"), "status": f"failed at {exc.stage}: {exc}"}


def sweep(configs, out: str | Path, threads: int = 1, workers=None) -> list:
    """Run configs independently; failures are recorded and the sweep goes on.

    Writes sweep.csv (S, alpha, D_H, residual) and sweep_status.txt.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("empty sweep")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(c, out / f"run_{i:03d}_S{c.model.S:g}", workers) for i, c in enumerate(configs)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    sio.write_columns(out / "sweep.csv", ("S", "alpha", "D_H", "residual"),
                      [r["S"] for r in rows], [r["alpha"] for r in rows],
                      [r["D_H"] for r in rows], [r["residual"] for r in rows])
    (out / "sweep_status.txt").write_text(
        "".join(f"S={r['S']:g}\t{r['status']}\n" for r in rows))
    return rows

"""Run configuration: an INI file parsed with configparser.

Schema (all sections optional except [run]; defaults shown)::

    [run]
    pipeline = floquet_alpha      ; floquet_alpha | rmt_alpha | formfactor | phasespace
    seed = 0                      ; unsigned 64-bit
    out = results

    [model]                       ; ModelParams fields
    m = 1.0
    omega0 = 1.0
    Omega = 0.95
    E_b = 100.0
    S = 0.0
    phi = 1.0471975511965976
    hbar_eff = 1.0

    [grid]
    n_points = 1024
    e_max = 300.0                 ; default 3 E_b
    slices = 4096
    order = 2                     ; 2, 4 or 6
    q_margin = 1.25
    p_margin = 1.05

    [selection]
    edge_fraction = 0.1
    threshold = 1e-6
    min_states = 64

    [ensemble]
    kind = goe                    ; goe | gue | cue | coe | poisson
    dim = 1000
    realizations = 100
    method = dense                ; dense | tridiagonal
    order = 7                     ; Gaussian ensembles: unfolding polynomial
    central = 0.8

    [averaging]
    window_len = 256              ; 0 = whole series
    overlap = 0.5
    omega_deltas = 0              ; relative offsets of Omega, e.g. -0.005, 0, 0.005

    [fit]
    k_lo = 1
    k_hi = 0                      ; 0 = window_len / 8

    [formfactor]
    source = ensemble             ; ensemble | floquet
    l_max = 0                     ; 0 = 2 D_H
    smooth = 0.05
    tau_min = 0.05
    tau_max = 0.5

    [phasespace]
    resolution = 256, 256
    window = default              ; default | grid | q0, q1, p0, p1
    fields = wigner, liouville
    epsilon = 0                   ; 0 = sqrt(hbar_eff)
    retained = false              ; restrict U to the retained Floquet states

    [sweep]
    S = 0, 2.5, 10, 100
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace

from .model import ModelParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "PIPELINES"]

PIPELINES = ("floquet_alpha", "rmt_alpha", "formfactor", "phasespace")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists field-level messages."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class GridSettings:
    n_points: int = 1024
    e_max: float | None = None
    slices: int = 4096
    order: int = 2
    q_margin: float = 1.25
    p_margin: float = 1.05


@dataclass(frozen=True)
class SelectionSettings:
    edge_fraction: float = 0.1
    threshold: float = 1e-6
    min_states: int = 64


@dataclass(frozen=True)
class EnsembleSettings:
    kind: str = "goe"
    dim: int = 1000
    realizations: int = 100
    method: str = "dense"
    order: int = 7
    central: float = 0.8


@dataclass(frozen=True)
class AveragingSettings:
    window_len: int = 256
    overlap: float = 0.5
    omega_deltas: tuple = (0.0,)


@dataclass(frozen=True)
class FitSettings:
    k_lo: int = 1
    k_hi: int = 0


@dataclass(frozen=True)
class FormFactorSettings:
    source: str = "ensemble"
    l_max: int = 0
    smooth: float = 0.05
    tau_min: float = 0.05
    tau_max: float = 0.5


@dataclass(frozen=True)
class PhaseSpaceSettings:
    resolution: tuple = (256, 256)
    window: object = "default"
    fields: tuple = ("wigner", "liouville")
    epsilon: float = 0.0
    retained: bool = False


@dataclass(frozen=True)
class RunConfig:
    pipeline: str = "floquet_alpha"
    seed: int = 0
    out: str = "results"
    model: ModelParams = field(default_factory=ModelParams)
    grid: GridSettings = field(default_factory=GridSettings)
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    ensemble: EnsembleSettings = field(default_factory=EnsembleSettings)
    averaging: AveragingSettings = field(default_factory=AveragingSettings)
    fit: FitSettings = field(default_factory=FitSettings)
    formfactor: FormFactorSettings = field(default_factory=FormFactorSettings)
    phasespace: PhaseSpaceSettings = field(default_factory=PhaseSpaceSettings)
    sweep_S: tuple = (0.0, 2.5, 10.0, 100.0)

    def replace(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def with_model(self, **kw) -> "RunConfig":
        return replace(self, model=self.model.replace(**kw))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["run"] = {"pipeline": self.pipeline, "seed": str(self.seed), "out": self.out}
        cp["model"] = {k: repr(float(v)) for k, v in self.model.to_dict().items()}
        g = {f.name: _fmt(getattr(self.grid, f.name)) for f in fields(self.grid)}
        if self.grid.e_max is None:
            del g["e_max"]
        cp["grid"] = g
        for name in ("selection", "ensemble", "averaging", "fit", "formfactor", "phasespace"):
            obj = getattr(self, name)
            cp[name] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)}
        if self.sweep_S:
            cp["sweep"] = {"S": _fmt(self.sweep_S)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _conv(kind, raw, where, problems):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            x = float(raw)
            if not math.isfinite(x):
                raise ValueError("not finite")
            return x
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("not a boolean")
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "ints":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind == "words":
            return tuple(x.strip().lower() for x in raw.split(",") if x.strip())
        return raw.strip()
    except ValueError as exc:
        problems.append(f"{where}: cannot parse {raw!r} ({exc})")
        return None


_SCHEMA = {
    "run": {"pipeline": str, "seed": int, "out": str},
    "model": {f.name: float for f in fields(ModelParams)},
    "grid": {"n_points": int, "e_max": float, "slices": int, "order": int,
             "q_margin": float, "p_margin": float},
    "selection": {"edge_fraction": float, "threshold": float, "min_states": int},
    "ensemble": {"kind": str, "dim": int, "realizations": int, "method": str,
                 "order": int, "central": float},
    "averaging": {"window_len": int, "overlap": float, "omega_deltas": "floats"},
    "fit": {"k_lo": int, "k_hi": int},
    "formfactor": {"source": str, "l_max": int, "smooth": float, "tau_min": float,
                   "tau_max": float},
    "phasespace": {"resolution": "ints", "window": str, "fields": "words",
                   "epsilon": float, "retained": bool},
    "sweep": {"S": "floats"},
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate INI text; raises ConfigError listing every problem."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    problems = []
    vals = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            problems.append(f"[{sec}]: unknown section")
            continue
        vals[sec] = {}
        for key, raw in cp[sec].items():
            if key not in _SCHEMA[sec]:
                problems.append(f"[{sec}] {key}: unknown field")
                continue
            v = _conv(_SCHEMA[sec][key], raw, f"[{sec}] {key}", problems)
            if v is not None:
                vals[sec][key] = v
    if "run" not in vals and "run" not in cp.sections():
        problems.append("[run]: section missing")

    def build(cls, sec, where=None):
        try:
            return cls(**vals.get(sec, {}))
        except (TypeError, ValueError) as exc:
            problems.append(f"[{where or sec}]: {exc}")
            return cls()

    model = build(ModelParams, "model")
    grid = build(GridSettings, "grid")
    sel = build(SelectionSettings, "selection")
    ens = build(EnsembleSettings, "ensemble")
    avg = build(AveragingSettings, "averaging")
    fit = build(FitSettings, "fit")
    ff = build(FormFactorSettings, "formfactor")
    ps = dict(vals.get("phasespace", {}))
    if "window" in ps and ps["window"] not in ("default", "grid"):
        try:
            w = tuple(float(x) for x in ps["window"].split(","))
            if len(w) != 4 or not (w[0] < w[1] and w[2] < w[3]):
                raise ValueError
            ps["window"] = ((w[0], w[1]), (w[2], w[3]))
        except ValueError:
            problems.append("[phasespace] window: expected default, grid or q0, q1, p0, p1")
            ps.pop("window")
    phs = build(PhaseSpaceSettings, "phasespace")
    run = vals.get("run", {})
    cfg = RunConfig(pipeline=run.get("pipeline", "floquet_alpha"), seed=run.get("seed", 0),
                    out=run.get("out", "results"), model=model, grid=grid, selection=sel,
                    ensemble=ens, averaging=avg, fit=fit, formfactor=ff, phasespace=phs,
                    sweep_S=vals.get("sweep", {}).get("S", RunConfig.sweep_S))
    problems += validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: RunConfig) -> list:
    """Field-level consistency checks beyond type conversion."""
    p = []
    if cfg.pipeline not in PIPELINES:
        p.append(f"[run] pipeline: {cfg.pipeline!r} not one of {PIPELINES}")
    if not 0 <= cfg.seed < 2**64:
        p.append("[run] seed: must be an unsigned 64-bit integer")
    g = cfg.grid
    if g.n_points < 2 or g.n_points & (g.n_points - 1):
        p.append("[grid] n_points: must be a power of two")
    if g.slices < 256:
        p.append("[grid] slices: must be >= 256")
    if g.order not in (2, 4, 6):
        p.append("[grid] order: must be 2, 4 or 6")
    if g.e_max is not None and g.e_max <= 0:
        p.append("[grid] e_max: must be > 0")
    s = cfg.selection
    if not 0 < s.edge_fraction < 0.5:
        p.append("[selection] edge_fraction: must lie in (0, 0.5)")
    if not 0 < s.threshold < 1:
        p.append("[selection] threshold: must lie in (0, 1)")
    e = cfg.ensemble
    if e.kind not in ("goe", "gue", "cue", "coe", "poisson"):
        p.append(f"[ensemble] kind: {e.kind!r} not supported")
    if e.dim < 16:
        p.append("[ensemble] dim: must be >= 16")
    if e.realizations < 1:
        p.append("[ensemble] realizations: must be >= 1")
    if e.method not in ("dense", "tridiagonal"):
        p.append("[ensemble] method: must be dense or tridiagonal")
    if not 0 < e.central <= 1:
        p.append("[ensemble] central: must lie in (0, 1]")
    a = cfg.averaging
    if a.window_len < 0 or a.window_len == 1:
        p.append("[averaging] window_len: must be 0 or >= 2")
    if not 0 <= a.overlap <= 0.9:
        p.append("[averaging] overlap: must lie in [0, 0.9]")
    if not a.omega_deltas or any(abs(d) >= 0.5 for d in a.omega_deltas):
        p.append("[averaging] omega_deltas: need at least one value, each |delta| < 0.5")
    f = cfg.fit
    if f.k_lo < 1 or (f.k_hi and f.k_hi < f.k_lo + 7):
        p.append("[fit] k range: need k_lo >= 1 and at least 8 points")
    ff = cfg.formfactor
    if ff.source not in ("ensemble", "floquet"):
        p.append("[formfactor] source: must be ensemble or floquet")
    if not 0 < ff.tau_min < ff.tau_max:
        p.append("[formfactor] tau range: need 0 < tau_min < tau_max")
    ph = cfg.phasespace
    if len(ph.resolution) != 2 or min(ph.resolution) < 2:
        p.append("[phasespace] resolution: need two counts >= 2")
    bad = set(ph.fields) - {"wigner", "liouville"}
    if bad:
        p.append(f"[phasespace] fields: unknown {sorted(bad)}")
    if ph.epsilon < 0:
        p.append("[phasespace] epsilon: must be >= 0")
    if any(x < 0 for x in cfg.sweep_S):
        p.append("[sweep] S: values must be >= 0")
    return p


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    return parse_config(text)

"""File formats.

Binary containers are little-endian throughout:

propagator (``.bin``)::

    8 bytes   magic b"SNPROP01"
    uint64    rows, cols, slices, order
    float64   period, q_min, q_max, hbar
    float64   rows*cols*2 values: (re, im) pairs, row-major

quasienergy spectrum::

    8 bytes   magic b"SNQSPEC1"
    uint64    count
    float64   Omega, hbar
    float64   count energies

phase-space raster::

    8 bytes   magic b"SNFIELD1"
    uint64    n_q, n_p, kind (0 wigner_diagonal, 1 liouville_diagonal, 2 wigner)
    float64   q_first, q_last, p_first, p_last, time
    float64   n_q*n_p values, row-major (q index slowest)

Axis values are cell centres; the axes are uniform between the stored
first and last entries.  Text outputs write floats with 17 significant
digits so they round-trip exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .phase_space import PhaseSpaceField
from .quantum_floquet import Grid, QuasiSpectrum, UnitaryPropagator

__all__ = [
    "FLOAT_FMT",
    "write_propagator",
    "read_propagator",
    "write_spectrum",
    "read_spectrum",
    "write_field",
    "read_field",
    "write_column",
    "write_columns",
    "read_columns",
    "write_field_csv",
    "write_json",
]

FLOAT_FMT = "%.17g"
_KINDS = ("wigner_diagonal", "liouville_diagonal", "wigner")
_U8 = np.dtype("<u8")
_F8 = np.dtype("<f8")


def _header(f, magic, ints, floats):
    f.write(magic)
    f.write(np.asarray(ints, dtype=_U8).tobytes())
    f.write(np.asarray(floats, dtype=_F8).tobytes())


def _read_header(buf, magic, n_int, n_float):
    if buf[:8] != magic:
        raise ValueError(f"bad magic {buf[:8]!r}, expected {magic!r}")
    off = 8
    ints = np.frombuffer(buf, _U8, n_int, off)
    off += 8 * n_int
    floats = np.frombuffer(buf, _F8, n_float, off)
    off += 8 * n_float
    return ints.astype(int), floats.astype(float), off


def write_propagator(path, U: UnitaryPropagator):
    M = np.ascontiguousarray(U.matrix, dtype=np.complex128)
    g = U.grid
    with open(path, "wb") as f:
        _header(f, b"SNPROP01", [M.shape[0], M.shape[1], U.slices, U.order],
                [U.period, g.q_min, g.q_max, g.hbar])
        f.write(M.view(np.float64).astype(_F8).tobytes())


def read_propagator(path) -> UnitaryPropagator:
    buf = Path(path).read_bytes()
    (r, c, slices, order), (T, q0, q1, hb), off = _read_header(buf, b"SNPROP01", 4, 4)
    vals = np.frombuffer(buf, _F8, 2 * r * c, off).astype(float)
    M = vals.view(np.complex128).reshape(r, c)
    return UnitaryPropagator(M, T, slices, Grid(q0, q1, r, hb), order)


def write_spectrum(path, spec: QuasiSpectrum):
    with open(path, "wb") as f:
        _header(f, b"SNQSPEC1", [spec.D_H], [spec.Omega, spec.hbar])
        f.write(np.asarray(spec.energies, dtype=_F8).tobytes())


def read_spectrum(path) -> QuasiSpectrum:
    buf = Path(path).read_bytes()
    (n,), (Om, hb), off = _read_header(buf, b"SNQSPEC1", 1, 2)
    return QuasiSpectrum(np.frombuffer(buf, _F8, n, off).astype(float), Om, hb)


def write_field(path, fld: PhaseSpaceField):
    with open(path, "wb") as f:
        _header(f, b"SNFIELD1", [len(fld.q_axis), len(fld.p_axis), _KINDS.index(fld.kind)],
                [fld.q_axis[0], fld.q_axis[-1], fld.p_axis[0], fld.p_axis[-1], fld.time])
        f.write(np.ascontiguousarray(fld.values, dtype=_F8).tobytes())


def read_field(path) -> PhaseSpaceField:
    buf = Path(path).read_bytes()
    (nq, npp, kind), (q0, q1, p0, p1, t), off = _read_header(buf, b"SNFIELD1", 3, 5)
    vals = np.frombuffer(buf, _F8, nq * npp, off).astype(float).reshape(nq, npp)
    return PhaseSpaceField(np.linspace(q0, q1, nq), np.linspace(p0, p1, npp), vals, t, _KINDS[kind])


def write_column(path, values):
    """One value per line, no header."""
    np.savetxt(path, np.asarray(values, dtype=float), fmt=FLOAT_FMT)


def write_columns(path, header, *cols):
    data = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    fmt = [("%d" if np.all(np.mod(c, 1) == 0) and name in ("k", "q", "l") else FLOAT_FMT)
           for name, c in zip(header, cols)]
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=",".join(header), comments="")


def read_columns(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_field_csv(path, fld: PhaseSpaceField):
    Q, P = np.meshgrid(fld.q_axis, fld.p_axis, indexing="ij")
    write_columns(path, ("q", "p", "value"), Q.ravel(), P.ravel(), fld.values.ravel())


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path, obj):
    # json writes floats with repr, which round-trips (17 significant digits at most)
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

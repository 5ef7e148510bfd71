"""Phase-space resolution of the return probability.

Classical side: a symplectic integrator for the driven flow, stroboscopic
(Poincare) sections, Monte-Carlo return probabilities and the regularised
diagonal of the Liouville propagator.

Quantum side: Wigner functions and the diagonal of the Wigner propagator of
a grid propagator U.  Everything quantum is evaluated on a grid refined by
band-limited interpolation (spacing dq/2, 2n points), where the offsets
x +- s/2 of the Weyl transform land on grid points.  With N = 2n momenta of
spacing dp/2 and the cell area (dq/2)(dp/2), the discrete identities

    sum_r W(r) area = Tr rho,    sum_r G(r) area = |Tr U|^2

hold to rounding error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum_floquet import Grid, UnitaryPropagator, yoshida_weights

__all__ = [
    "PhaseSpaceField",
    "Trajectory",
    "TrajectoryEnsemble",
    "SectionResult",
    "ReturnEstimate",
    "TrajectoryError",
    "default_window",
    "flow",
    "integrate_trajectory",
    "stroboscopic_map",
    "monodromy",
    "poincare_section",
    "shell_fraction",
    "section_seeds",
    "lyapunov_estimate",
    "classical_return_probability",
    "liouville_diagonal_estimate",
    "embedding",
    "fine_grid",
    "wigner_transform",
    "inverse_wigner",
    "propagate_wigner",
    "wigner_kernel_dense",
    "diagonal_propagator_fine",
    "wigner_propagator_diagonal",
    "check_trace_identity",
    "bin_field",
    "local_maxima",
]


class TrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PhaseSpaceField:
    """Real raster over (q, p); ``values[i, j]`` belongs to (q_axis[i], p_axis[j])."""

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    time: float
    kind: str

    def __post_init__(self):
        if self.kind not in ("wigner_diagonal", "liouville_diagonal", "wigner"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.values.shape != (len(self.q_axis), len(self.p_axis)):
            raise ValueError("values shape does not match the axes")
        for ax in (self.q_axis, self.p_axis):
            if len(ax) > 1 and not np.all(np.diff(ax) > 0):
                raise ValueError("axes must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def cell_area(self) -> float:
        return float((self.q_axis[1] - self.q_axis[0]) * (self.p_axis[1] - self.p_axis[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)


def default_window(params):
    """q in +-1.5 q_well, p in +-sqrt(2 m 2 E_b)."""
    qw = 1.5 * params.q_well
    pw = math.sqrt(4 * params.m * params.E_b)
    return (-qw, qw), (-pw, pw)


# ====================================================================== classical

def _check_dt(params, dt):
    if dt is None:
        return params.period / 1024
    if dt > params.period / 1024 * (1 + 1e-12):
        raise ValueError("dt must not exceed T/1024")
    return dt


def flow(params, q, p, t0, t1, dt, order=6, tangent=None):
    """Advance arrays (q, p) from t0 to t1 with composed leapfrog steps.

    Each leapfrog step is kick(h/2) drift(h) kick(h/2) in the extended phase
    space, with the clock advanced during the drift, so the force of the
    second kick is evaluated at the new time.  ``tangent`` is an optional
    pair (dq, dp) of arrays advanced by the linearised map.
    Returns (q, p) or (q, p, dq, dp).
    """
    q = np.array(q, dtype=float, copy=True)
    p = np.array(p, dtype=float, copy=True)
    span = t1 - t0
    nsteps = max(1, int(math.ceil(abs(span) / dt - 1e-9)))
    h = span / nsteps
    ws = yoshida_weights(order) * h
    m = params.m
    if tangent is not None:
        dq, dp = (np.array(a, dtype=float, copy=True) for a in tangent)
    t = t0
    for step in range(nsteps):
        for w in ws:
            p += 0.5 * w * params.force(q, t)
            if tangent is not None:
                dp += 0.5 * w * params.force_derivative(q, t) * dq
                dq += w * dp / m
            q += w * p / m
            t += w
            p += 0.5 * w * params.force(q, t)
            if tangent is not None:
                dp += 0.5 * w * params.force_derivative(q, t) * dq
        t = t0 + (step + 1) * h
    if tangent is not None:
        return q, p, dq, dp
    return q, p


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    initial_conditions: np.ndarray
    final_states: np.ndarray
    time: float
    integrator_step: float


def integrate_trajectory(params, r0, t_final, dt=None, t0=0.0, order=6,
                         n_samples: int = 2) -> Trajectory:
    """Integrate one orbit, sampled at ``n_samples`` equally spaced times."""
    dt = _check_dt(params, dt)
    ts = np.linspace(t0, t_final, max(2, n_samples))
    qs = np.empty(len(ts))
    ps = np.empty(len(ts))
    qs[0], ps[0] = r0
    q, p = float(r0[0]), float(r0[1])
    for i in range(1, len(ts)):
        q, p = flow(params, q, p, ts[i - 1], ts[i], dt, order)
        q, p = float(q), float(p)
        if not (math.isfinite(q) and math.isfinite(p)):
            raise TrajectoryError(f"trajectory blew up before t = {ts[i]:.6g}")
        qs[i], ps[i] = q, p
    return Trajectory(ts, qs, ps)


def stroboscopic_map(params, q, p, n_periods=1, dt=None, order=6, t0=0.0):
    """Positions after 1..n_periods periods; returns arrays (n_periods, n)."""
    dt = _check_dt(params, dt)
    T = params.period
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    Q = np.empty((n_periods, q.size))
    P = np.empty((n_periods, q.size))
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(n_periods):
            q, p = flow(params, q, p, t0 + l * T, t0 + (l + 1) * T, dt, order)
            bad = ~(np.isfinite(q) & np.isfinite(p))
            q[bad] = np.nan
            p[bad] = np.nan
            Q[l], P[l] = q, p
    return Q, P


def monodromy(params, r0, t=None, dt=None, order=6, t0=0.0):
    """Jacobian d(q, p)(t)/d(q, p)(t0) by tangent-map propagation.

    ``r0`` may be an array of shape (n, 2); the result then has shape
    (n, 2, 2).
    """
    dt = _check_dt(params, dt)
    t = params.period if t is None else t
    r0 = np.atleast_2d(np.asarray(r0, dtype=float))
    q0, p0 = r0[:, 0], r0[:, 1]
    n = len(q0)
    out = np.empty((n, 2, 2))
    for col, (a, b) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        _, _, dq, dp = flow(params, q0, p0, t0, t0 + t, dt, order,
                            tangent=(np.full(n, a), np.full(n, b)))
        out[:, 0, col] = dq
        out[:, 1, col] = dp
    return out


@dataclass(frozen=True, eq=False)
class SectionResult:
    """Stroboscopic points, shape (n_seeds, n_periods, 2); ``dropped`` flags
    seeds whose orbit blew up."""

    points: np.ndarray
    seeds: np.ndarray
    dropped: np.ndarray

    def valid_points(self):
        return self.points[~self.dropped]


def poincare_section(params, seeds, n_periods: int, dt=None, order=4, t0=0.0) -> SectionResult:
    """Stroboscopic section at t = t0 + l T, l = 1..n_periods."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    Q, P = stroboscopic_map(params, seeds[:, 0], seeds[:, 1], n_periods, dt, order, t0)
    pts = np.stack([Q.T, P.T], axis=-1)
    dropped = ~np.all(np.isfinite(pts), axis=(1, 2))
    return SectionResult(pts, seeds, dropped)


def shell_fraction(params, section: SectionResult, shell: float) -> float:
    """Fraction of seeds whose section points stay inside a static-energy
    shell of relative width ``shell`` (max H - min H < shell * E_b)."""
    pts = section.valid_points()
    if len(pts) == 0:
        return 0.0
    H = params.energy(pts[..., 0], pts[..., 1])
    H = np.concatenate([params.energy(section.seeds[~section.dropped, 0],
                                      section.seeds[~section.dropped, 1])[:, None], H], axis=1)
    spread = H.max(axis=1) - H.min(axis=1)
    return float(np.mean(spread < shell * params.E_b))


def section_seeds(params, n: int = 40, e_max: float | None = None, q_margin: float = 1.25):
    """Seeds on the p = 0 line, 0 < q <= q_margin * q_turn(e_max).

    The default reaches the box edge of the quantum grid (e_max = 3 E_b),
    so the line crosses both wells' low-energy region and the outer
    high-energy orbits.
    """
    from .model import turning_point
    e_max = 3 * params.E_b if e_max is None else e_max
    qmax = q_margin * turning_point(params, e_max)
    q = qmax * (np.arange(n) + 0.5) / n
    return np.c_[q, np.zeros(n)]


def lyapunov_estimate(params, seeds, n_periods: int = 60, dt=None, order=4) -> np.ndarray:
    """Finite-time largest Lyapunov exponent of the stroboscopic map, per seed
    (per unit time)."""
    dt = _check_dt(params, dt)
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    q, p = seeds[:, 0].copy(), seeds[:, 1].copy()
    n = len(q)
    dq, dp = np.ones(n), np.zeros(n)
    acc = np.zeros(n)
    T = params.period
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(n_periods):
            q, p, dq, dp = flow(params, q, p, l * T, (l + 1) * T, dt, order, tangent=(dq, dp))
            r = np.hypot(dq, dp)
            acc += np.log(r)
            dq, dp = dq / r, dp / r
    return acc / (n_periods * T)


@dataclass(frozen=True)
class ReturnEstimate:
    value: float
    stderr: float
    n_returns: int
    n_samples: int
    window_area: float
    low_statistics: bool


def classical_return_probability(params, t, n_samples=10_000, epsilon=1.0, window=None,
                                 seed=0, dt=None, order=6, t0=0.0) -> ReturnEstimate:
    """Regularised trace of delta(r - Phi_t(r)) over the window W.

    Uniform samples r in W are mapped by the flow; the estimate is
    |W| * (fraction with |Phi_t(r) - r| < epsilon) / (pi epsilon^2).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 10^4")
    dt = _check_dt(params, dt)
    (q0, q1), (p0, p1) = window or default_window(params)
    rng = np.random.default_rng(seed)
    q = rng.uniform(q0, q1, n_samples)
    p = rng.uniform(p0, p1, n_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        qt, pt = flow(params, q, p, t0, t0 + t, dt, order)
    d2 = (qt - q) ** 2 + (pt - p) ** 2
    hits = int(np.sum(d2 < epsilon**2))
    area = (q1 - q0) * (p1 - p0)
    f = hits / n_samples
    norm = area / (math.pi * epsilon**2)
    return ReturnEstimate(f * norm, math.sqrt(f * (1 - f) / n_samples) * norm,
                          hits, n_samples, area, hits < 10)


def _axes(window, resolution):
    (q0, q1), (p0, p1) = window
    nq, npp = resolution
    qa = q0 + (np.arange(nq) + 0.5) * (q1 - q0) / nq
    pa = p0 + (np.arange(npp) + 0.5) * (p1 - p0) / npp
    return qa, pa


def liouville_diagonal_estimate(params, t, window=None, resolution=(256, 256), epsilon=None,
                                dt=None, order=6, t0=0.0) -> PhaseSpaceField:
    """exp(-|Phi_t(r) - r|^2 / 2 eps^2) / (2 pi eps^2) at every cell centre r.

    ``epsilon`` defaults to sqrt(hbar_eff).
    """
    dt = _check_dt(params, dt)
    eps = math.sqrt(params.hbar_eff) if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be > 0")
    window = window or default_window(params)
    qa, pa = _axes(window, resolution)
    Q, P = np.meshgrid(qa, pa, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        qt, pt = flow(params, Q.ravel(), P.ravel(), t0, t0 + t, dt, order)
    d2 = (qt - Q.ravel()) ** 2 + (pt - P.ravel()) ** 2
    vals = np.exp(-np.nan_to_num(d2, nan=np.inf) / (2 * eps**2)) / (2 * math.pi * eps**2)
    return PhaseSpaceField(qa, pa, vals.reshape(Q.shape), float(t), "liouville_diagonal")


# ====================================================================== quantum

def embedding(n: int) -> np.ndarray:
    """Isometry V (2n x n) from the grid to the twice finer grid.

    Band-limited (trigonometric) interpolation: the n Fourier coefficients
    are zero-padded to 2n, with the Nyquist bin kept on the negative side.
    Fine point 2j coincides with coarse point j.
    """
    F = np.fft.fft(np.eye(n), axis=0, norm="ortho")
    Fp = np.zeros((2 * n, n), dtype=complex)
    h = n // 2
    Fp[:h] = F[:h]
    Fp[2 * n - h:] = F[h:]
    return np.fft.ifft(Fp, axis=0, norm="ortho")


@dataclass(frozen=True)
class FineGrid:
    x: np.ndarray  # 2n positions, spacing dq/2
    p: np.ndarray  # 2n momenta, spacing dp/2, FFT order
    area: float    # (dq/2)(dp/2)


def fine_grid(grid: Grid) -> FineGrid:
    n = grid.n_points
    h = grid.dq / 2
    x = grid.q[0] + h * np.arange(2 * n)
    N = 2 * n
    p = np.fft.fftfreq(N) * N * (grid.dp / 2)
    return FineGrid(x, p, h * grid.dp / 2)


def _antidiag_index(N):
    """Row/column indices (c+s, c-s) for c = 0..N-1, s in fftfreq order."""
    c = np.arange(N)[:, None]
    s = (np.fft.fftfreq(N) * N).astype(int)[None, :]
    a, b = c + s, c - s
    valid = (a >= 0) & (a < N) & (b >= 0) & (b < N)
    return np.where(valid, a, 0), np.where(valid, b, 0), valid


def wigner_transform(rho: np.ndarray, grid: Grid, V: np.ndarray | None = None) -> np.ndarray:
    """W[c, k] on the fine grid for a coarse density matrix ``rho``.

    A pure state may be passed as a 1-D array.  Momentum index k follows FFT
    order (see ``fine_grid``).
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    V = embedding(grid.n_points) if V is None else V
    rf = V @ rho @ V.conj().T
    N = rf.shape[0]
    a, b, valid = _antidiag_index(N)
    A = np.where(valid, rf[a, b], 0)
    return np.fft.fft(A, axis=1).real / (math.pi * grid.hbar)


def inverse_wigner(W: np.ndarray, grid: Grid, V: np.ndarray | None = None) -> np.ndarray:
    """Coarse density matrix from a fine-grid Wigner function."""
    V = embedding(grid.n_points) if V is None else V
    N = W.shape[0]
    A = np.fft.ifft(W, axis=1) * math.pi * grid.hbar
    a, b, valid = _antidiag_index(N)
    rf = np.zeros((N, N), dtype=complex)
    rf[a[valid], b[valid]] = A[valid]
    return 2 * V.conj().T @ rf @ V


def propagate_wigner(W: np.ndarray, U: UnitaryPropagator | np.ndarray, grid: Grid | None = None,
                     V=None) -> np.ndarray:
    """Apply the Wigner propagator of U in factorised form W -> rho -> U rho U^+ -> W."""
    if isinstance(U, UnitaryPropagator):
        grid = U.grid if grid is None else grid
        U = U.matrix
    V = embedding(grid.n_points) if V is None else V
    rho = inverse_wigner(W, grid, V)
    return wigner_transform(U @ rho @ U.conj().T, grid, V)


def wigner_kernel_dense(U: np.ndarray, grid: Grid) -> np.ndarray:
    """Full Wigner propagator L[(c,k), (c',k')] with W_t = L @ W_0 * area.

    Only for small grids: the matrix has (2n)^4 entries.
    """
    n = grid.n_points
    N = 2 * n
    V = embedding(n)
    Kf = V @ U @ V.conj().T
    a, b, valid = _antidiag_index(N)
    fg = fine_grid(grid)
    # kernel acting on the anti-diagonal entries of the fine density matrix
    # rho'_in[c'+s', c'-s'] = (pi hbar/N) sum_k' e^{2 pi i k' s'/N} W(c', k')
    cols = []
    s = (np.fft.fftfreq(N) * N).astype(int)
    for c2 in range(N):
        for k2 in range(N):
            rf = np.zeros((N, N), dtype=complex)
            ph = np.exp(2j * np.pi * k2 * s / N) * math.pi * grid.hbar / N
            m = valid[c2]
            rf[a[c2, m], b[c2, m]] = ph[m]
            out = 2 * Kf @ rf @ Kf.conj().T
            A = np.where(valid, out[a, b], 0)
            cols.append((np.fft.fft(A, axis=1) / (math.pi * grid.hbar)).ravel())
    L = np.array(cols).T
    return L / fg.area


def diagonal_propagator_fine(K: np.ndarray, grid: Grid, chunk: int = 128) -> np.ndarray:
    """G[c, k] = (2/(pi hbar)) sum_d exp(-2 pi i k d/N) D_c[d] on the fine grid,

    D_c[d] = sum_s K'[c+s, c+s-d] conj(K'[c-s, c-s+d]),  K' = V K V^+.

    For fixed d, D_c[d] is the linear convolution of f(a) = K'[a, a-d] with
    g(b) = conj(K'[b, b+d]) evaluated at a + b = 2c.  Offsets d are folded
    modulo N before the final FFT.
    """
    n = grid.n_points
    N = 2 * n
    V = embedding(n)
    Kf = V @ K @ V.conj().T
    M = 2 * N  # linear convolution length
    Dfold = np.zeros((N, N), dtype=complex)
    ds_all = np.arange(-(N - 1), N)
    idx = np.arange(N)
    for i in range(0, len(ds_all), chunk):
        ds = ds_all[i:i + chunk]
        cf = idx[None, :] - ds[:, None]
        vf = (cf >= 0) & (cf < N)
        f = np.where(vf, Kf[idx[None, :], np.clip(cf, 0, N - 1)], 0)
        cg = idx[None, :] + ds[:, None]
        vg = (cg >= 0) & (cg < N)
        g = np.where(vg, Kf[idx[None, :], np.clip(cg, 0, N - 1)].conj(), 0)
        conv = np.fft.ifft(np.fft.fft(f, M, axis=1) * np.fft.fft(g, M, axis=1), axis=1)
        Dc = conv[:, 0:2 * N:2]  # a + b = 2c
        np.add.at(Dfold.T, ds % N, Dc)
    G = np.fft.fft(Dfold, axis=1).real * 2 / (math.pi * grid.hbar)
    return G


def bin_field(G: np.ndarray, grid: Grid, window, resolution) -> tuple:
    """Integrate a fine-grid field over window cells; returns (q_axis,
    p_axis, values) with values = cell integral / cell area."""
    fg = fine_grid(grid)
    (q0, q1), (p0, p1) = window
    nq, npp = resolution
    X, P = np.meshgrid(fg.x, fg.p, indexing="ij")
    H, qe, pe = np.histogram2d(X.ravel(), P.ravel(), bins=[nq, npp],
                               range=[[q0, q1], [p0, p1]], weights=(G * fg.area).ravel())
    cell = (qe[1] - qe[0]) * (pe[1] - pe[0])
    return 0.5 * (qe[1:] + qe[:-1]), 0.5 * (pe[1:] + pe[:-1]), H / cell


def _grid_support(grid: Grid):
    fg = fine_grid(grid)
    h = grid.dq / 2
    dp = grid.dp / 2
    return ((fg.x[0] - h / 2, fg.x[-1] + h / 2),
            (fg.p.min() - dp / 2, fg.p.max() + dp / 2))


def wigner_propagator_diagonal(U: UnitaryPropagator, window=None, resolution=(256, 256),
                               spectrum=None, params=None, chunk: int = 128) -> PhaseSpaceField:
    """Diagonal G_W(r, T; r, 0) of the Wigner propagator of U binned to a
    raster.

    ``spectrum`` (a QuasiSpectrum with vectors) restricts U to the retained
    Floquet states.  ``window="grid"`` covers the whole grid support; the
    default is ``default_window(params)`` when params are given.
    """
    grid = U.grid
    K = U.matrix
    if spectrum is not None:
        Z = spectrum.vectors
        K = (Z * spectrum.eigenvalues) @ Z.conj().T
    sup = _grid_support(grid)
    if window is None:
        window = default_window(params) if params is not None else "grid"
    if isinstance(window, str):
        if window != "grid":
            raise ValueError(f"unknown window {window!r}")
        window = sup
    (q0, q1), (p0, p1) = window
    tol = 1e-9 * max(abs(sup[0][1]), abs(sup[1][1]))
    if q0 < sup[0][0] - tol or q1 > sup[0][1] + tol or p0 < sup[1][0] - tol or p1 > sup[1][1] + tol:
        raise ValueError(f"window {window} exceeds the grid support {sup}")
    G = diagonal_propagator_fine(K, grid, chunk)
    qa, pa, vals = bin_field(G, grid, window, resolution)
    return PhaseSpaceField(qa, pa, vals, float(U.period), "wigner_diagonal")


def check_trace_identity(field: PhaseSpaceField, U: UnitaryPropagator, spectrum=None) -> float:
    """(cell sum x cell area) / |Tr U|^2, the trace taken over ``spectrum``
    when given."""
    if spectrum is not None:
        tr = spectrum.eigenvalues.sum()
    else:
        tr = np.trace(U.matrix if isinstance(U, UnitaryPropagator) else U)
    return field.integral() / float(abs(tr) ** 2)


def local_maxima(values: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """Indices (i, j) of strict 8-neighbour local maxima above ``threshold``."""
    v = np.asarray(values)
    pad = np.pad(v, 1, mode="constant", constant_values=-np.inf)
    core = pad[1:-1, 1:-1]
    is_max = core > threshold
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_max &= core > pad[1 + di:pad.shape[0] - 1 + di, 1 + dj:pad.shape[1] - 1 + dj]
    return np.argwhere(is_max)

"""One-period Floquet operator on a position grid and its quasienergies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .model import ModelParams, turning_point

__all__ = [
    "Grid",
    "UnitaryPropagator",
    "QuasiSpectrum",
    "build_grid",
    "minimum_points",
    "propagate_period",
    "quasienergies",
    "select_bound_states",
    "yoshida_weights",
    "FloquetError",
    "UnitarityError",
    "TooFewStatesError",
]


class FloquetError(RuntimeError):
    pass


class UnitarityError(FloquetError):
    pass


class TooFewStatesError(FloquetError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid q_j = q_min + (j + 1/2) dq, j = 0..n-1.

    Momenta follow FFT ordering, p = 2 pi hbar fftfreq(n, dq).
    """

    q_min: float
    q_max: float
    n_points: int
    hbar: float = 1.0

    def __post_init__(self):
        n = int(self.n_points)
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.q_max > self.q_min:
            raise ValueError("q_max must exceed q_min")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_points

    @property
    def dp(self) -> float:
        return 2 * math.pi * self.hbar / (self.n_points * self.dq)

    @property
    def p_max(self) -> float:
        return math.pi * self.hbar / self.dq

    @property
    def q(self) -> np.ndarray:
        return self.q_min + (np.arange(self.n_points) + 0.5) * self.dq

    @property
    def p(self) -> np.ndarray:
        return 2 * math.pi * self.hbar * np.fft.fftfreq(self.n_points, self.dq)

    @property
    def length(self) -> float:
        return self.q_max - self.q_min


@dataclass(frozen=True, eq=False)
class UnitaryPropagator:
    matrix: np.ndarray
    period: float
    slices: int
    grid: Grid
    order: int = 2

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def unitarity_error(self) -> float:
        U = self.matrix
        return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())

    def trace(self, l: int = 1) -> complex:
        if l == 1:
            return complex(np.trace(self.matrix))
        return complex(np.trace(np.linalg.matrix_power(self.matrix, l)))


@dataclass(frozen=True, eq=False)
class QuasiSpectrum:
    """Sorted quasienergies in (-hbar Omega/2, hbar Omega/2].

    ``vectors`` (optional) holds the matching orthonormal Floquet states as
    columns, and ``edge_weight`` their probability near the grid boundary.
    """

    energies: np.ndarray
    Omega: float
    hbar: float = 1.0
    vectors: np.ndarray | None = field(default=None, repr=False)
    edge_weight: np.ndarray | None = field(default=None, repr=False)

    @property
    def D_H(self) -> int:
        return len(self.energies)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def heisenberg_time(self) -> float:
        return self.D_H * self.period

    @property
    def zone_width(self) -> float:
        return self.hbar * self.Omega

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(-1j * self.energies * self.period / self.hbar)


def minimum_points(p: ModelParams, e_max: float, q_margin=1.25, p_margin=1.05) -> int:
    """Smallest power of two meeting both coverage requirements."""
    L = q_margin * turning_point(p, e_max)
    p_need = p_margin * math.sqrt(2 * p.m * e_max)
    n_min = 2 * L * p_need / (math.pi * p.hbar_eff)
    return 1 << max(1, math.ceil(math.log2(max(n_min, 2))))


def build_grid(p: ModelParams, e_max: float | None = None, n_points: int = 1024,
               q_margin: float = 1.25, p_margin: float = 1.05) -> Grid:
    """Symmetric grid holding the classical region at ``e_max`` (default 3 E_b).

    The box half-width is ``q_margin`` times the outer turning point, and
    the Nyquist momentum must exceed sqrt(2 m e_max) by ``p_margin``.
    """
    if e_max is None:
        e_max = 3 * p.E_b
    if not e_max > 0:
        raise ValueError(f"e_max must be > 0, got {e_max}")
    L = q_margin * turning_point(p, e_max)
    grid = Grid(-L, L, int(n_points), p.hbar_eff)
    if grid.p_max < p_margin * math.sqrt(2 * p.m * e_max):
        raise ValueError(
            f"n_points={n_points} too small for e_max={e_max:g}: "
            f"need n_points >= {minimum_points(p, e_max, q_margin, p_margin)}"
        )
    return grid


def yoshida_weights(order: int) -> np.ndarray:
    """Step fractions of the symmetric triple-jump compositions."""
    if order == 2:
        return np.array([1.0])
    if order == 4:
        c = 2 ** (1 / 3)
        w1 = 1 / (2 - c)
        return np.array([w1, -c * w1, w1])
    if order == 6:
        w1, w2, w3 = -1.17767998417887, 0.235573213359357, 0.784513610477560
        w0 = 1 - 2 * (w1 + w2 + w3)
        return np.array([w3, w2, w1, w0, w1, w2, w3])
    raise ValueError(f"order must be 2, 4 or 6, got {order}")


def _substeps(T, slices, order):
    """(step, midpoint time) of every Strang factor over one period."""
    w = yoshida_weights(order)
    dt = T / slices
    hs = np.tile(w * dt, slices)
    ends = np.cumsum(hs)
    mids = ends - hs / 2
    return hs, mids


def propagate_period(p: ModelParams, grid: Grid, slices: int = 4096, order: int = 2,
                     t0: float = 0.0, check: bool = True, workers: int | None = None,
                     min_slices: int = 256) -> UnitaryPropagator:
    """U(t0 + T, t0) by symmetric split-operator steps.

    Each step is exp(-i V(t_j) h/2) exp(-i T h) exp(-i V(t_j) h/2) with the
    potential frozen at the step midpoint t_j, which keeps every factor
    symmetric so that ``order`` 4 and 6 compositions raise the accuracy.
    Wavefunctions are stored as rows so the FFTs run over contiguous memory.
    """
    if slices < min_slices:
        raise ValueError(f"slices must be >= {min_slices}, got {slices}")
    n = grid.n_points
    hb = p.hbar_eff
    q, pk = grid.q, grid.p
    T = p.period
    hs, mids = _substeps(T, slices, order)
    kin = pk * pk / (2 * p.m)
    vs = p.static_potential(q)

    psi = np.eye(n, dtype=complex)
    prev = 0.0 * q
    for h, tm in zip(hs, mids):
        half = (vs + q * p.drive(t0 + tm)) * (h / 2)
        psi *= np.exp(-1j * (prev + half) / hb)
        psi = sfft.fft(psi, axis=1, overwrite_x=True, workers=workers)
        psi *= np.exp(-1j * kin * h / hb)
        psi = sfft.ifft(psi, axis=1, overwrite_x=True, workers=workers)
        prev = half
    psi *= np.exp(-1j * prev / hb)
    U = UnitaryPropagator(np.ascontiguousarray(psi.T), T, slices, grid, order)
    if check:
        err = U.unitarity_error()
        if err > 1e-10:
            raise UnitarityError(f"unitarity violated: max|U'U - I| = {err:.3g}")
    return U


def _zone_phase(lam):
    """-arg(lam) mapped to (-pi, pi]."""
    ph = -np.angle(lam)
    ph[ph <= -np.pi] = np.pi
    return ph


def quasienergies(U: UnitaryPropagator | np.ndarray, p: ModelParams,
                  vectors: bool = True) -> QuasiSpectrum:
    """Quasienergies E = -(hbar/T) arg(lambda) in (-hbar Omega/2, hbar Omega/2].

    The complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are an orthonormal eigenbasis even inside nearly degenerate
    tunnelling doublets, where a general eigensolver returns skewed vectors.
    """
    M = U.matrix if isinstance(U, UnitaryPropagator) else np.asarray(U)
    try:
        Tm, Z = sla.schur(M, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FloquetError(f"eigendecomposition failed: {exc}") from exc
    lam = np.diag(Tm)
    dev = np.abs(np.abs(lam) - 1).max()
    if dev > 1e-8:
        raise UnitarityError(f"eigenvalue modulus deviates from 1 by {dev:.3g}")
    half = p.hbar_eff * p.Omega / 2
    # rounding can push the zone edge one ulp outside
    E = np.clip(half / np.pi * _zone_phase(lam), np.nextafter(-half, 0), half)
    idx = np.argsort(E, kind="stable")
    ew = None
    if isinstance(U, UnitaryPropagator):
        ew = _edge_weight(Z, U.grid, 0.1)[idx]
    return QuasiSpectrum(E[idx], p.Omega, p.hbar_eff, Z[:, idx] if vectors else None, ew)


def _edge_weight(Z, grid: Grid, edge_fraction: float):
    q = grid.q
    centre = 0.5 * (grid.q_min + grid.q_max)
    half = 0.5 * grid.length
    edge = np.abs(q - centre) > (1 - 2 * edge_fraction) * half
    return (np.abs(Z[edge]) ** 2).sum(axis=0)


def select_bound_states(U: UnitaryPropagator, spectrum: QuasiSpectrum,
                        edge_fraction: float = 0.1, threshold: float = 1e-6,
                        min_states: int = 64) -> QuasiSpectrum:
    """Keep Floquet states with less than ``threshold`` probability in the
    outer ``edge_fraction`` of the box on either side."""
    if not 0 < edge_fraction < 0.5:
        raise ValueError("edge_fraction must lie in (0, 0.5)")
    if spectrum.vectors is None:
        raise ValueError("spectrum carries no eigenvectors")
    w = _edge_weight(spectrum.vectors, U.grid, edge_fraction)
    keep = w < threshold
    count = int(keep.sum())
    if count < min_states:
        raise TooFewStatesError(
            f"only {count} states below edge weight {threshold:g} "
            f"(need {min_states}); enlarge the grid"
        )
    return QuasiSpectrum(spectrum.energies[keep], spectrum.Omega, spectrum.hbar,
                         spectrum.vectors[:, keep], w[keep])

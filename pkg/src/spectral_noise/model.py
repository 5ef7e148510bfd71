"""Driven quartic double well.

    H(q, p, t) = p^2/2m - m w^2 q^2/4 + m^2 w^4 q^4/(64 E_b) + S q cos(W t + phi)

The minima sit at q^2 = 8 E_b/(m w^2) with depth -E_b and local
frequency w, so with hbar = w = 1 there are roughly E_b tunnelling doublets
below the barrier top at zero energy.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.linalg as sla

__all__ = [
    "ModelParams",
    "HarmonicParams",
    "potential",
    "force",
    "static_hamiltonian",
    "turning_point",
    "GridTooSmallError",
]


class GridTooSmallError(ValueError):
    """Raised when a grid cannot represent the requested energy range."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the driven double well.

    Defaults are the dimensionless values used throughout the package
    (m = hbar = omega0 = 1, Omega = 0.95, E_b = 100, phi = pi/3).
    """

    m: float = 1.0
    omega0: float = 1.0
    Omega: float = 0.95
    E_b: float = 100.0
    S: float = 0.0
    phi: float = math.pi / 3
    hbar_eff: float = 1.0

    def __post_init__(self):
        for name in ("m", "omega0", "Omega", "E_b", "hbar_eff"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not (np.isfinite(self.S) and self.S >= 0):
            raise ValueError(f"S must be finite and >= 0, got {self.S!r}")
        if not np.isfinite(self.phi):
            raise ValueError("phi must be finite")

    # derived quantities
    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def q_well(self) -> float:
        """Position of the right-hand minimum."""
        return math.sqrt(8 * self.E_b / (self.m * self.omega0**2))

    @property
    def _a(self):
        return self.m * self.omega0**2 / 4

    @property
    def _b(self):
        return self.m**2 * self.omega0**4 / (64 * self.E_b)

    # evaluations (vectorised over q and t)
    def static_potential(self, q):
        q = np.asarray(q, dtype=float)
        q2 = q * q
        return -self._a * q2 + self._b * q2 * q2

    def drive(self, t):
        return self.S * np.cos(self.Omega * np.asarray(t, dtype=float) + self.phi)

    def potential(self, q, t):
        return self.static_potential(q) + np.asarray(q, dtype=float) * self.drive(t)

    def force(self, q, t):
        q = np.asarray(q, dtype=float)
        return 2 * self._a * q - 4 * self._b * q**3 - self.drive(t)

    def force_derivative(self, q, t=0.0):
        """d(force)/dq, used for tangent-map propagation."""
        q = np.asarray(q, dtype=float)
        return 2 * self._a - 12 * self._b * q * q + 0 * np.asarray(t)

    def energy(self, q, p):
        """Static (undriven) Hamiltonian."""
        return np.asarray(p) ** 2 / (2 * self.m) + self.static_potential(q)

    def replace(self, **kw) -> "ModelParams":
        d = asdict(self)
        d.update(kw)
        return type(self)(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown model field(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class HarmonicParams:
    """Harmonic oscillator with the ModelParams interface (test hook).

    The drive is kept so that forced oscillators can be exercised too, but it
    defaults to zero.  ``Omega`` only sets the period used by stroboscopic
    routines and defaults to the oscillator frequency.
    """

    m: float = 1.0
    omega0: float = 1.0
    Omega: float | None = None
    S: float = 0.0
    phi: float = 0.0
    hbar_eff: float = 1.0
    E_b: float = 1.0  # energy scale for relative tolerances

    def __post_init__(self):
        if self.Omega is None:
            object.__setattr__(self, "Omega", self.omega0)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def q_well(self) -> float:
        return math.sqrt(2 * self.E_b / (self.m * self.omega0**2))

    def static_potential(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * self.m * self.omega0**2 * q * q

    def drive(self, t):
        return self.S * np.cos(self.Omega * np.asarray(t, dtype=float) + self.phi)

    def potential(self, q, t):
        return self.static_potential(q) + np.asarray(q, dtype=float) * self.drive(t)

    def force(self, q, t):
        return -self.m * self.omega0**2 * np.asarray(q, dtype=float) - self.drive(t)

    def force_derivative(self, q, t=0.0):
        return -self.m * self.omega0**2 + 0 * np.asarray(q, dtype=float)

    def energy(self, q, p):
        return np.asarray(p) ** 2 / (2 * self.m) + self.static_potential(q)


def potential(q, t, p: ModelParams):
    """V(q, t) including the dipole drive S q cos(Omega t + phi)."""
    return p.potential(q, t)


def force(q, t, p: ModelParams):
    """-dV/dq."""
    return p.force(q, t)


def turning_point(p: ModelParams, energy: float) -> float:
    """Outermost |q| with V_static(q) = energy (energy > -E_b)."""
    if isinstance(p, HarmonicParams):
        return math.sqrt(2 * energy / (p.m * p.omega0**2))
    a, b = p._a, p._b
    # b x^2 - a x - energy = 0 with x = q^2
    disc = a * a + 4 * b * energy
    if disc < 0:
        raise ValueError("energy below the potential minimum")
    return math.sqrt((a + math.sqrt(disc)) / (2 * b))


def static_hamiltonian(p: ModelParams, grid, e_max: float | None = None) -> np.ndarray:
    """Fourier-grid Hamiltonian of the undriven model.

    The kinetic part is the circulant matrix F^-1 diag(p^2/2m) F, which is
    real symmetric because the FFT momentum set is closed under p -> -p up to
    the Nyquist bin.  If ``e_max`` is given the grid is checked to hold the
    classically allowed region at that energy.
    """
    if e_max is not None:
        qt = turning_point(p, e_max)
        pmax = math.sqrt(2 * p.m * (e_max - float(np.min(p.static_potential(grid.q)))))
        if qt > grid.q_max or -qt < grid.q_min:
            raise GridTooSmallError(
                f"turning point {qt:.4g} at E={e_max:g} lies outside the grid "
                f"[{grid.q_min:.4g}, {grid.q_max:.4g}]"
            )
        if pmax > grid.p_max:
            raise GridTooSmallError(
                f"momentum {pmax:.4g} at E={e_max:g} exceeds grid limit {grid.p_max:.4g}; "
                "increase n_points"
            )
    kin = np.fft.ifft(grid.p**2 / (2 * p.m)).real
    H = sla.circulant(kin)
    H[np.diag_indices_from(H)] += p.static_potential(grid.q)
    return H

"""Reference level sequences (Gaussian, circular and Poisson ensembles) and
the closed-form delta_q power laws.

Random streams: realization ``i`` of a spec with root ``seed`` draws from
``PCG64(SeedSequence(seed, spawn_key=(i,)))``, which is what
``SeedSequence(seed).spawn(n)[i]`` yields.  Any subset of realizations can
therefore be regenerated independently and in parallel.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "EnsembleSpec",
    "KINDS",
    "realization_rng",
    "sample_matrix",
    "sample_one",
    "sample_levels",
    "theory_pk",
    "theory_pk_finite",
    "form_factor_theory",
    "semicircle_radius",
]

KINDS = ("goe", "gue", "cue", "coe", "poisson")
_BETA = {"goe": 1, "coe": 1, "gue": 2, "cue": 2}


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble description.

    ``method`` selects how GOE/GUE spectra are drawn: ``dense`` diagonalises
    the full matrix, ``tridiagonal`` uses the equivalent Dumitriu-Edelman
    tridiagonal model (same eigenvalue law, O(N^2) cost).
    """

    kind: str
    dim: int
    realizations: int = 1
    seed: int = 0
    method: str = "dense"

    def __post_init__(self):
        if self.kind == "gse":
            raise ValueError("gse sampling is not available; use theory_pk with beta=4")
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; choose from {KINDS}")
        if int(self.dim) < 16:
            raise ValueError("dim must be >= 16")
        if int(self.realizations) < 1:
            raise ValueError("realizations must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.method not in ("dense", "tridiagonal"):
            raise ValueError(f"unknown sampling method {self.method!r}")

    @property
    def beta(self):
        return _BETA.get(self.kind)

    def to_dict(self):
        return asdict(self)


def semicircle_radius(dim: int) -> float:
    """Spectral edge of the Gaussian ensembles as normalised here."""
    return math.sqrt(2 * dim)


def realization_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(i),))))


def _haar_unitary(rng, n):
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def sample_matrix(kind: str, dim: int, rng: np.random.Generator) -> np.ndarray:
    """One random matrix.

    GOE: (A + A^T)/2 with standard normal A (off-diagonal variance 1/2,
    diagonal variance 1).  GUE: the Hermitian analogue with the same
    off-diagonal second moment.  Both have semicircle radius sqrt(2 N).
    CUE is Haar via QR with phase correction, COE is U^T U with U from CUE.
    """
    n = int(dim)
    if kind == "goe":
        A = rng.standard_normal((n, n))
        return (A + A.T) / 2
    if kind == "gue":
        A = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
        return (A + A.conj().T) / 2
    if kind == "cue":
        return _haar_unitary(rng, n)
    if kind == "coe":
        U = _haar_unitary(rng, n)
        return U.T @ U
    raise ValueError(f"no matrix model for {kind!r}")


def _tridiagonal(rng, n, beta):
    """Householder-reduced form of the Gaussian ensembles above.

    The sub-diagonal holds the norms of the remaining column, chi-distributed
    with beta*(n-1), ..., beta degrees of freedom and scaled to the matrix
    element variance.
    """
    dof = beta * np.arange(n - 1, 0, -1)
    if beta == 1:
        d = rng.standard_normal(n)
        e = np.sqrt(rng.chisquare(dof) / 2)
    else:
        d = rng.standard_normal(n) / math.sqrt(2)
        e = np.sqrt(rng.chisquare(dof) / 4)
    return sla.eigvalsh_tridiagonal(d, e)


def sample_one(spec: EnsembleSpec, i: int) -> np.ndarray:
    """Sorted levels of realization ``i`` (eigenphases in (-pi, pi] for
    circular ensembles, uniforms on [0, dim) for Poisson)."""
    rng = realization_rng(spec.seed, i)
    n = int(spec.dim)
    kind = spec.kind
    if kind == "poisson":
        return np.sort(rng.uniform(0.0, n, n))
    if kind in ("goe", "gue"):
        if spec.method == "tridiagonal":
            return _tridiagonal(rng, n, _BETA[kind])
        return np.linalg.eigvalsh(sample_matrix(kind, n, rng))
    U = sample_matrix(kind, n, rng)
    return np.sort(np.angle(np.linalg.eigvals(U)))


def sample_levels(spec: EnsembleSpec) -> list:
    return [sample_one(spec, i) for i in range(int(spec.realizations))]


def _parse_kind(kind):
    if isinstance(kind, str):
        k = kind.lower()
        if k == "poisson":
            return "poisson"
        if k in _BETA:
            return _BETA[k]
        if k.startswith("beta"):
            k = k[4:].strip("()=")
        return int(k)
    return int(kind)


def theory_pk(kind, D_H: int, k):
    """<P_k^delta>: D_H/(2 beta pi^2 k) for beta = 1, 2, 4 and
    D_H^2/(4 pi^2 k^2) for independent levels.

    ``kind`` is ``"poisson"``, an integer beta, ``"beta2"`` or an ensemble name.
    """
    b = _parse_kind(kind)
    k = np.asarray(k, dtype=float)
    if np.any(k < 1) or np.any(k >= D_H):
        raise ValueError("k must satisfy 1 <= k < D_H")
    if b == "poisson":
        out = D_H**2 / (4 * np.pi**2 * k**2)
    elif b in (1, 2, 4):
        out = D_H / (2 * b * np.pi**2 * k)
    else:
        raise ValueError(f"unsupported kind {kind!r}")
    return out if out.ndim else float(out)


def form_factor_theory(kind, tau):
    """Connected-plus-diagonal form factor K(tau) of the limiting ensembles."""
    b = _parse_kind(kind)
    t = np.abs(np.asarray(tau, dtype=float))
    if b == "poisson":
        return np.ones_like(t)
    if b == 1:
        return np.where(t <= 1, 2 * t - t * np.log1p(2 * t),
                        2 - t * np.log((2 * t + 1) / np.maximum(2 * t - 1, 1e-300)))
    if b == 2:
        return np.minimum(t, 1.0)
    if b == 4:
        tt = np.minimum(t, 2.0)
        small = tt / 2 - tt / 4 * np.log(np.abs(1 - tt))
        return np.where(t < 2, small, 1.0)
    raise ValueError(f"unsupported kind {kind!r}")


def theory_pk_finite(kind, D: int, k):
    """Finite-D expression for <P_k^delta> of a closed delta series of
    length D.

    Independent levels give the Brownian-bridge result 1/(4 sin^2(pi k/D)).
    For the Wigner-Dyson classes the form factor enters at k/D and at its
    image 1 - k/D, together with the -1/12 offset.
    """
    k = np.asarray(k, dtype=float)
    b = _parse_kind(kind)
    bridge = 1 / (4 * np.sin(np.pi * k / D) ** 2)
    if b == "poisson":
        return bridge
    K1 = form_factor_theory(b, k / D)
    K2 = form_factor_theory(b, 1 - k / D)
    c = D**2 / (4 * np.pi**2)
    return c * (K1 - 1) / k**2 + c * (K2 - 1) / (D - k) ** 2 + bridge - 1 / 12

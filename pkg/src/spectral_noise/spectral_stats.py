"""Level-fluctuation time series: unfolding, delta_q, power spectra, alpha
fits, the form factor and the return probability."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "UnfoldedSpectrum",
    "DeltaSeries",
    "PowerSpectrum",
    "AlphaFit",
    "FormFactor",
    "IdentityReport",
    "DeviationResult",
    "unfold",
    "unfold_quasienergies",
    "fit_staircase",
    "unfold_ensemble",
    "delta_series",
    "periodogram",
    "power_spectrum_delta",
    "fit_alpha",
    "form_factor",
    "return_probability_qm",
    "staircase_power",
    "check_power_formfactor_identity",
    "delta_staircase_offset",
    "normalized_deviation",
]


@dataclass(frozen=True, eq=False)
class UnfoldedSpectrum:
    """Unfolded levels with unit mean spacing.

    ``period`` is set for levels living on a circle of circumference
    ``period`` (= count, unfolded quasienergies); the wrap-around spacing
    then belongs to the spacing set.
    """

    levels: np.ndarray
    period: float | None = None

    @property
    def count(self) -> int:
        return len(self.levels)

    @property
    def spacings(self) -> np.ndarray:
        s = np.diff(self.levels)
        if self.period is not None:
            s = np.append(s, self.levels[0] + self.period - self.levels[-1])
        return s

    @property
    def mean_spacing(self) -> float:
        return float(self.spacings.mean())


@dataclass(frozen=True, eq=False)
class DeltaSeries:
    """delta_q = eps_{q+1} - eps_1 - q for q = 1..count-1."""

    values: np.ndarray
    period: float | None = None

    def __len__(self):
        return len(self.values)

    def levels(self) -> np.ndarray:
        """Levels relative to the first one (eps_q - eps_1, q = 1..count)."""
        q = np.arange(len(self.values) + 1, dtype=float)
        return q + np.concatenate([[0.0], self.values])


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    k: np.ndarray
    values: np.ndarray
    n_averaged: int
    window_len: int


@dataclass(frozen=True)
class AlphaFit:
    alpha: float
    log_intercept: float
    k_range: tuple
    residual_rms: float


@dataclass(frozen=True, eq=False)
class FormFactor:
    tau: np.ndarray
    values: np.ndarray
    D_H: int


@dataclass(frozen=True, eq=False)
class IdentityReport:
    tau: np.ndarray
    ratio: np.ndarray
    power: np.ndarray
    form_factor: np.ndarray
    n_averaged: int
    sufficient: bool


@dataclass(frozen=True, eq=False)
class DeviationResult:
    tau: np.ndarray
    values: np.ndarray
    omitted: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


# ---------------------------------------------------------------- unfolding

def _check_levels(raw, min_count=16):
    E = np.asarray(raw, dtype=float)
    if E.ndim != 1 or len(E) < min_count:
        raise ValueError(f"need at least {min_count} levels, got {E.size}")
    if not np.all(np.diff(E) > 0):
        raise ValueError("levels must be strictly increasing")
    return E


def _normalize(eps):
    """Affine map fixing the first level and giving unit mean spacing."""
    span = eps[-1] - eps[0]
    if not span > 0:
        raise ValueError("unfolded staircase is not increasing")
    return (eps - eps[0]) * (len(eps) - 1) / span


def unfold(raw, method: str = "linear", order: int = 7, period: float | None = None,
           staircase: Callable | None = None) -> UnfoldedSpectrum:
    """Map levels to unit mean spacing.

    ``linear``: affine rescaling.  Without ``period`` the span maps to
    count-1.  With ``period`` (levels on a circle, e.g. quasienergies with
    period hbar*Omega) spacings are scaled by count/period so the circle
    has circumference count.

    ``polynomial``: fit N(E) of degree ``order`` to the staircase
    i -> E_i, or use the supplied smooth ``staircase`` (e.g. an ensemble
    average), then normalise to unit mean spacing.
    """
    E = _check_levels(raw)
    n = len(E)
    if method == "linear":
        if period is not None:
            if not period > E[-1] - E[0]:
                raise ValueError("period must exceed the level span")
            return UnfoldedSpectrum((E - E[0]) * n / period, float(n))
        return UnfoldedSpectrum(_normalize(E))
    if method == "polynomial":
        if staircase is None:
            staircase = fit_staircase([E], order)
        eps = np.asarray(staircase(E), dtype=float)
        if not np.all(np.diff(eps) > 0):
            raise ValueError("polynomial unfolding is not monotonic on these levels")
        return UnfoldedSpectrum(_normalize(eps))
    raise ValueError(f"unknown unfolding method {method!r}")


def unfold_quasienergies(spec) -> UnfoldedSpectrum:
    """Circular linear unfolding of a QuasiSpectrum."""
    return unfold(spec.energies, "linear", period=spec.zone_width)


def fit_staircase(spectra: Sequence, order: int = 7) -> Polynomial:
    """Least-squares polynomial N(E) for the staircase averaged over spectra.

    All spectra must hold the same number of levels; the pooled staircase
    counts levels per realization, so its fit is the ensemble-mean N(E).
    """
    spectra = [np.asarray(s, dtype=float) for s in spectra]
    R = len(spectra)
    pool = np.sort(np.concatenate(spectra))
    counts = np.arange(1, len(pool) + 1) / R
    if len(np.unique(pool)) <= order:
        raise ValueError("polynomial fit is degenerate (too few distinct levels)")
    with np.errstate(all="raise"):
        try:
            return Polynomial.fit(pool, counts - 0.5, order)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise ValueError(f"polynomial fit is degenerate: {exc}") from exc


def unfold_ensemble(spectra: Sequence, order: int = 7, central: float = 0.8) -> list:
    """Unfold each spectrum with the ensemble-averaged staircase.

    Only the central fraction of every (sorted) spectrum is kept, which
    discards the low-density edges of Gaussian ensembles.
    """
    spectra = [np.sort(np.asarray(s, dtype=float)) for s in spectra]
    n = len(spectra[0])
    if any(len(s) != n for s in spectra):
        raise ValueError("all spectra must have the same length")
    cut = int(round(n * (1 - central) / 2))
    core = [s[cut:n - cut] for s in spectra]
    N = fit_staircase(core, order)
    return [unfold(s, "polynomial", staircase=N) for s in core]


def delta_series(u: UnfoldedSpectrum) -> DeltaSeries:
    eps = np.asarray(u.levels, dtype=float)
    if len(eps) < 2:
        raise ValueError("need at least two levels")
    q = np.arange(1, len(eps))
    return DeltaSeries(eps[1:] - eps[0] - q, u.period)


# ---------------------------------------------------------------- power spectra

def periodogram(x) -> np.ndarray:
    """|sum_q x_q exp(-2 pi i k q/D)|^2 / D for k = 0..D-1.

    With this normalisation sum_k P_k = sum_q x_q^2.
    """
    x = np.asarray(x)
    return np.abs(np.fft.fft(x)) ** 2 / len(x)


def _windows(d: DeltaSeries, D_w: int, step: int):
    """delta series of consecutive windows of D_w + 1 levels.

    Each window is re-referenced to its first level and rescaled to unit
    mean spacing, so it is itself a closed (bridge) delta series of length
    D_w.  Circular series wrap around.
    """
    lev = d.levels()
    n_lev = len(lev)
    if d.period is not None:
        lev = np.concatenate([lev, lev + d.period])
        starts = range(0, n_lev, step)
    else:
        if D_w + 1 > n_lev:
            return []
        starts = range(0, n_lev - D_w, step)
    out = []
    q = np.arange(1, D_w + 1)
    for a in starts:
        w = lev[a:a + D_w + 1]
        w = (w - w[0]) * D_w / (w[-1] - w[0])
        out.append(w[1:] - q)
    return out


def power_spectrum_delta(d, window_len: int | None = None, overlap: float = 0.5,
                         ) -> PowerSpectrum:
    """Window- and ensemble-averaged power spectrum of delta_q.

    ``d`` is a DeltaSeries or a sequence of them.  Windows contain
    ``window_len`` + 1 consecutive levels (default: the whole series) and
    advance by window_len*(1 - overlap).  P_k = |FFT|^2/D_w for
    k = 1..D_w/2; spectra are summed and divided once at the end.
    """
    series = [d] if isinstance(d, DeltaSeries) else list(d)
    if not series:
        raise ValueError("no delta series given")
    if not 0 <= overlap <= 0.9:
        raise ValueError("overlap must lie in [0, 0.9]")
    if window_len is None:
        window_len = min(len(s) for s in series)
    D_w = int(window_len)
    if D_w < 2:
        raise ValueError("window_len must be >= 2")
    step = max(1, int(round(D_w * (1 - overlap))))
    kmax = D_w // 2
    acc = np.zeros(kmax)
    count = 0
    for s in series:
        if len(s) < D_w:
            continue
        if len(s) == D_w and s.period is None:
            wins = [s.values]
        else:
            wins = _windows(s, D_w, step)
        for w in wins:
            acc += periodogram(w)[1:kmax + 1]
            count += 1
    if count == 0:
        raise ValueError(f"no full window of length {D_w} in the input")
    return PowerSpectrum(np.arange(1, kmax + 1), acc / count, count, D_w)


def fit_alpha(ps: PowerSpectrum, k_lo: int = 1, k_hi: int | None = None) -> AlphaFit:
    """Least-squares line through (log k, log P_k); alpha = -slope."""
    if k_hi is None:
        k_hi = max(ps.window_len // 8, k_lo + 7)
    k = np.asarray(ps.k)
    if k_lo < 1 or k_hi > k.max():
        raise ValueError(f"fit range [{k_lo}, {k_hi}] outside available k")
    m = (k >= k_lo) & (k <= k_hi)
    if m.sum() < 8:
        raise ValueError("need at least 8 points in the fit range")
    P = np.asarray(ps.values)[m]
    if np.any(P <= 0):
        raise ValueError("non-positive power in fit range")
    x, y = np.log(k[m]), np.log(P)
    slope, icpt = np.polyfit(x, y, 1)
    res = y - (slope * x + icpt)
    return AlphaFit(float(-slope), float(icpt), (int(k_lo), int(k_hi)),
                    float(np.sqrt(np.mean(res**2))))


# ---------------------------------------------------------------- form factor

def _phases(spec):
    """Return (levels scaled so exp(2 pi i eps l/D) is the l-th trace phase, D)."""
    if hasattr(spec, "zone_width"):
        E = np.asarray(spec.energies)
        D = len(E)
        # E T/hbar = 2 pi E/(hbar Omega); sign is irrelevant for |.|^2
        return E * D / spec.zone_width, D
    if isinstance(spec, UnfoldedSpectrum):
        return np.asarray(spec.levels), spec.count
    lev = np.asarray(spec, dtype=float)
    return lev, len(lev)


def _trace_sums(eps, D, ls, chunk=256):
    out = np.empty(len(ls), dtype=complex)
    for i in range(0, len(ls), chunk):
        l = ls[i:i + chunk, None]
        out[i:i + chunk] = np.exp(2j * np.pi * l * eps[None, :] / D).sum(axis=1)
    return out


def form_factor(spec, l_max: int, smooth: float | None = None) -> FormFactor:
    """K(tau_l) = |sum_n exp(2 pi i eps_n l/D_H)|^2 / D_H, l = 0..l_max.

    Quasispectra are placed on the circle, so K equals |Tr U^l|^2/D_H.
    ``smooth`` averages K over a running tau window of that width.
    """
    eps, D = _phases(spec)
    if D < 2:
        raise ValueError("D_H must be >= 2")
    ls = np.arange(l_max + 1)
    h = max(1, int(round(smooth * D / 2))) if smooth else 0
    K = np.abs(_trace_sums(eps, D, np.arange(l_max + h + 1))) ** 2 / D
    if h:
        # K is even in l, so reflect at l = 0
        Kp = np.concatenate([K[1:h + 1][::-1], K])
        Ks = np.convolve(Kp, np.full(2 * h + 1, 1 / (2 * h + 1)), mode="valid")
        Ks[0] = K[0]
        K = Ks
    K = K[:l_max + 1]
    return FormFactor(ls / D, K, D)


def return_probability_qm(U, bound_projection, l: int) -> float:
    """|sum_{n retained} exp(-i E_n l T/hbar)|^2."""
    if l < 1:
        raise ValueError("l must be >= 1")
    E = np.asarray(bound_projection.energies)
    T = bound_projection.period if U is None else U.period
    return float(np.abs(np.exp(-1j * E * l * T / bound_projection.hbar).sum()) ** 2)


# ---------------------------------------------------------------- identities

def staircase_power(u: UnfoldedSpectrum, ls, oversample: int = 16) -> np.ndarray:
    """|int n~(eps) exp(2 pi i eps l/D) d eps|^2 / D on the window
    [eps_1 - 1/2, eps_1 - 1/2 + D] with D = count.

    n~ = N(eps) - (eps - a) - 1/2 is the fluctuating staircase; it is -1/2
    at both ends of the window so boundary terms vanish.  The integral uses
    the midpoint rule with ``oversample`` points per unit spacing.
    """
    eps = np.asarray(u.levels, dtype=float)
    D = len(eps)
    a = eps[0] - 0.5
    M = D * oversample
    x = a + (np.arange(M) + 0.5) / oversample
    ntil = np.searchsorted(eps, x, side="right") - (x - a) - 0.5
    F = np.fft.fft(ntil) / oversample  # F[j] ~ int n~ exp(-2 pi i j (x-a)/D)
    ls = np.asarray(ls, dtype=int)
    return np.abs(F[ls]) ** 2 / D


def check_power_formfactor_identity(spectra, l_range, oversample: int = 16,
                                    min_average: int = 20) -> IdentityReport:
    """Ratio <P^n(tau)> 4 pi^2 tau^2 / <K(tau)> over an ensemble.

    P^n is the power spectrum of the fluctuating staircase, obtained by a
    direct Fourier transform; K comes from the level phases.  Both are
    ensemble averaged before the ratio is taken.
    """
    if isinstance(spectra, UnfoldedSpectrum):
        spectra = [spectra]
    spectra = list(spectra)
    ls = np.asarray(list(l_range), dtype=int)
    D = spectra[0].count
    Pn = np.zeros(len(ls))
    K = np.zeros(len(ls))
    for u in spectra:
        if u.count != D:
            raise ValueError("all spectra must have the same length")
        Pn += staircase_power(u, ls, oversample)
        K += np.abs(_trace_sums(np.asarray(u.levels), D, ls)) ** 2 / D
    Pn /= len(spectra)
    K /= len(spectra)
    tau = ls / D
    ratio = Pn * 4 * np.pi**2 * tau**2 / K
    return IdentityReport(tau, ratio, Pn, K, len(spectra), len(spectra) >= min_average)


def delta_staircase_offset(spectra, ks) -> np.ndarray:
    """<P^n_k> - <P^delta_k> on the same data (about 1/12 for chaotic levels)."""
    spectra = list(spectra)
    ks = np.asarray(ks, dtype=int)
    acc = np.zeros(len(ks))
    for u in spectra:
        acc += staircase_power(u, ks) - periodogram(delta_series(u).values)[ks]
    return acc / len(spectra)


def normalized_deviation(qm, cl, D_H: float, tau) -> DeviationResult:
    """D_H^-1 (2 pi tau)^-2 (P_qm - P_cl)/P_cl; points with P_cl = 0 are
    omitted and their indices reported."""
    qm = np.asarray(qm, dtype=float)
    cl = np.asarray(cl, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if not (qm.shape == cl.shape == tau.shape):
        raise ValueError("qm, cl and tau must share one grid")
    bad = cl == 0
    good = ~bad
    t = tau[good]
    vals = (qm[good] - cl[good]) / cl[good] / (D_H * (2 * np.pi * t) ** 2)
    return DeviationResult(t, vals, np.flatnonzero(bad))

"""Asymptotics of oscillatory integrals with phase (time) * (radius)^k.

Amplitudes are radial polynomials with sampled time profiles,
a(t, r) = sum_l r^l b_l(t), which makes every r-derivative at r = 0 exact.
After a partial Fourier transform in t the integral collapses to half-line
power-weighted integrals of the transforms; the expansion coefficients c_j
and the brute-force evaluation differ only in where those integrals are
truncated, so the remainder order can be measured cleanly.

Conventions: F(f)(tau) = integral f(t) exp(-i t tau) dt, inverse carries
1/(2 pi).  The "plus" sign refers to the phase exp(+i lambda t r^k) and pairs
with integrals over tau < 0; "minus" flips both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, DomainError, ResolutionError, StructureError

_EDGE_FRACTION = 1e-6          # profile must have decayed to this at the grid edge
_NYQUIST_FRACTION = 1e-10      # aliasing detector threshold
_SUPPORT_FRACTION = 1e-4       # |transform| cut defining its working support


def _check_sign(sign: str) -> float:
    # evaluation side of the transforms: plus-phase integrates over tau < 0
    if sign == "plus":
        return -1.0
    if sign == "minus":
        return 1.0
    raise DomainError(f"sign must be 'plus' or 'minus', got {sign!r}")


class OscAmplitude:
    """Radial-polynomial amplitude with shared uniform time grid.

    Parameters
    ----------
    k : int
        Phase homogeneity degree, k > 2.
    r_terms : dict[int, array]
        Maps the radial exponent l to the samples of its time profile b_l.
        All profiles share the grid t0 + m*dt.
    t0, dt : float
        Grid origin and spacing.
    r_max : float
        Radial support bound used by the brute-force evaluation.
    """

    def __init__(self, k: int, r_terms: dict, t0: float, dt: float, r_max: float):
        if k <= 2:
            raise DomainError(f"phase degree must exceed 2, got k={k}")
        if dt <= 0.0 or r_max <= 0.0:
            raise DomainError("dt and r_max must be positive")
        if not r_terms:
            raise StructureError("amplitude needs at least one radial term")
        profiles = {}
        n = None
        for l, samples in r_terms.items():
            l = int(l)
            if l < 0:
                raise StructureError(f"radial exponent must be >= 0, got {l}")
            arr = np.asarray(samples, dtype=float)
            if arr.ndim != 1 or arr.size < 16:
                raise StructureError("time profiles must be 1-D with >= 16 samples")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise StructureError("time profiles must share one grid")
            peak = float(np.max(np.abs(arr)))
            if peak > 0.0:
                edge = max(abs(arr[0]), abs(arr[-1]))
                if edge > _EDGE_FRACTION * peak:
                    raise StructureError(
                        "profile has not decayed at the grid edge; enlarge the grid")
            profiles[l] = arr
        self.k = int(k)
        self.r_terms = profiles
        self.t0 = float(t0)
        self.dt = float(dt)
        self.r_max = float(r_max)
        self._fourier = None
        self._cj_cache: dict = {}

    @property
    def exponents(self):
        return sorted(self.r_terms)

    @property
    def times(self) -> np.ndarray:
        n = len(next(iter(self.r_terms.values())))
        return self.t0 + self.dt * np.arange(n)

    def fourier(self) -> "FourierData":
        if self._fourier is None:
            self._fourier = partial_fourier(self)
        return self._fourier


@dataclass
class FourierData:
    """Sampled partial Fourier transforms of the time profiles."""

    tau: np.ndarray                       # ascending frequency grid
    hats: dict                            # exponent -> complex samples
    nyquist: float
    _splines: dict = field(default_factory=dict, repr=False)
    _supports: dict = field(default_factory=dict, repr=False)

    def support(self, l: int) -> tuple:
        """(lo, hi) window outside which the transform is treated as zero."""
        if l not in self._supports:
            h = np.abs(self.hats[l])
            peak = float(h.max())
            if peak == 0.0:
                self._supports[l] = (0.0, 0.0)
            else:
                idx = np.nonzero(h >= _SUPPORT_FRACTION * peak)[0]
                lo = self.tau[idx[0]]
                hi = self.tau[idx[-1]]
                step = self.tau[1] - self.tau[0]
                pad = 0.1 * max(hi - lo, 1e-6) + 32.0 * step
                self._supports[l] = (max(lo - pad, self.tau[0]),
                                     min(hi + pad, self.tau[-1]))
        return self._supports[l]

    def spline(self, l: int):
        if l not in self._splines:
            lo, hi = self.support(l)
            mask = (self.tau >= lo) & (self.tau <= hi)
            if mask.sum() >= 4:
                self._splines[l] = CubicSpline(self.tau[mask], self.hats[l][mask])
            else:
                self._splines[l] = None
        return self._splines[l]

    def evaluate(self, l: int, taus) -> np.ndarray:
        """Cubic interpolation of the transform, zero outside its support."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        lo, hi = self.support(l)
        out = np.zeros(taus.shape, dtype=complex)
        spline = self.spline(l)
        if spline is not None:
            inside = (taus >= lo) & (taus <= hi)
            if inside.any():
                out[inside] = spline(taus[inside])
        return out


def partial_fourier(a: OscAmplitude) -> FourierData:
    """Discrete realization of b_l -> integral b_l(t) exp(-i t tau) dt.

    Raises :class:`ResolutionError` when the transform has not decayed to
    1e-10 of its peak near the Nyquist frequency, which would alias the
    half-line integrals downstream.
    """
    n = len(next(iter(a.r_terms.values())))
    tau = 2.0 * np.pi * np.fft.fftfreq(n, d=a.dt)
    order = np.argsort(tau)
    tau_sorted = tau[order]
    nyquist = np.pi / a.dt
    hats = {}
    for l, samples in a.r_terms.items():
        hat = a.dt * np.exp(-1j * tau * a.t0) * np.fft.fft(samples)
        hat = hat[order]
        peak = float(np.max(np.abs(hat)))
        if peak > 0.0:
            band = np.abs(tau_sorted) >= 0.95 * nyquist
            if float(np.max(np.abs(hat[band]))) > _NYQUIST_FRACTION * peak:
                raise ResolutionError(
                    f"profile for r^{l} has spectral energy at the Nyquist "
                    f"frequency; decrease dt")
        hats[l] = hat
    return FourierData(tau=tau_sorted, hats=hats, nyquist=nyquist)


def _halfline_power_integral(fd: FourierData, l: int, beta: float,
                             side: float, upper: float, tol: float) -> complex:
    """integral_0^upper u^(beta-1) hat_l(side * u) du, exact on the interpolant.

    The transform is a cubic spline between frequency samples; the
    power-weighted integral of each cubic piece has a closed form, so the
    endpoint singularity (beta < 1) costs nothing and the result is
    deterministic.  ``tol`` only gates the resolution guard.
    """
    lo, hi = fd.support(l)
    cap = abs(lo) if side < 0 else abs(hi)
    upper = min(upper, cap)
    if upper <= 0.0:
        return 0.0 + 0.0j
    spline = fd.spline(l)
    if spline is None:
        if float(np.max(np.abs(fd.hats[l]))) > 0.0:
            raise ConvergenceError(
                f"transform support for r^{l} is unresolved on the grid")
        return 0.0 + 0.0j

    ts = spline.x
    coef = spline.c                      # (4, nseg), highest power first
    if side < 0:
        seg = np.nonzero(ts[:-1] < 0.0)[0]
        u0 = np.maximum(-ts[seg + 1], 0.0)
        u1 = np.minimum(-ts[seg], upper)
        a = -ts[seg]                     # expansion point of (u - a)^m
        signs = np.array([1.0, -1.0, 1.0, -1.0])   # (-1)^m for m = 0..3
    else:
        seg = np.nonzero(ts[1:] > 0.0)[0]
        u0 = np.maximum(ts[seg], 0.0)
        u1 = np.minimum(ts[seg + 1], upper)
        a = ts[seg]
        signs = np.ones(4)
    keep = u1 > u0
    if not keep.any():
        return 0.0 + 0.0j
    seg, u0, u1, a = seg[keep], u0[keep], u1[keep], a[keep]

    total = 0.0 + 0.0j
    # integral u^(beta-1) (u-a)^m du expanded through binomials; exponents
    # beta + p are positive so the endpoint u = 0 is integrable
    for m in range(4):
        cm = coef[3 - m, seg] * signs[m]
        if not np.any(cm):
            continue
        acc = np.zeros(len(seg), dtype=complex)
        for p in range(m + 1):
            w = comb(m, p) * (-a) ** (m - p)
            e = beta + p
            acc += w * (u1 ** e - u0 ** e) / e
        total += np.sum(cm * acc)
    return total


def cj_coefficient(a: OscAmplitude, j: int, sign: str = "plus",
                   tol: float = 1e-10) -> complex:
    """Expansion coefficient c_j; zero when no radial term of exponent j exists.

    For the plus phase c_j = (1/k) * integral over tau < 0 of
    |tau|^((j+1-k)/k) * hat_b_j(tau); the minus phase integrates over
    tau > 0 instead.
    """
    if j < 0:
        raise DomainError("j must be non-negative")
    exps = a.exponents
    if j > exps[-1]:
        raise DomainError(
            f"no radial data beyond exponent {exps[-1]}; cannot form c_{j}")
    side = _check_sign(sign)
    key = (j, sign, tol)
    if key not in a._cj_cache:
        if j not in a.r_terms:
            a._cj_cache[key] = 0.0 + 0.0j
        else:
            beta = (j + 1) / a.k
            val = _halfline_power_integral(a.fourier(), j, beta, side,
                                           upper=np.inf, tol=tol)
            a._cj_cache[key] = val / a.k
    return a._cj_cache[key]


@dataclass(frozen=True)
class ExpansionResult:
    """Truncated expansion data: coefficients c_0..c_N and their powers."""

    coefficients: tuple
    lambda_powers: tuple
    truncation: int

    def __post_init__(self):
        if len(self.coefficients) != self.truncation + 1 or \
                len(self.lambda_powers) != self.truncation + 1:
            raise StructureError("expansion lengths disagree with truncation")

    def evaluate(self, lam: float) -> complex:
        return sum(c * lam ** p for c, p in
                   zip(self.coefficients, self.lambda_powers))


def expansion_coefficients(a: OscAmplitude, N: int, sign: str = "plus",
                           tol: float = 1e-10) -> ExpansionResult:
    if N < 0:
        raise DomainError("N must be >= 0")
    cs = []
    for j in range(N + 1):
        if j > a.exponents[-1]:
            cs.append(0.0 + 0.0j)
        else:
            cs.append(cj_coefficient(a, j, sign=sign, tol=tol))
    powers = tuple(-(j + 1) / a.k for j in range(N + 1))
    return ExpansionResult(coefficients=tuple(cs), lambda_powers=powers,
                           truncation=N)


def expansion_eval(a: OscAmplitude, lam: float, N: int, sign: str = "plus",
                   tol: float = 1e-10) -> complex:
    """Sum of the first N+1 expansion terms at the large parameter lam."""
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    return expansion_coefficients(a, N, sign=sign, tol=tol).evaluate(lam)


def brute_force(a: OscAmplitude, lam: float, sign: str = "plus",
                tol: float = 1e-10) -> complex:
    """Reduced non-oscillatory evaluation of the full double integral.

    The double integral collapses to integral_0^r_max of
    sum_l r^l hat_b_l(-/+ lam r^k) dr; substituting u = lam r^k then gives
    the same half-line integrals as the expansion coefficients but truncated
    at u = lam * r_max^k, which is what produces the asymptotic remainder.
    """
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    side = _check_sign(sign)
    fd = a.fourier()
    total = 0.0 + 0.0j
    for l in a.exponents:
        beta = (l + 1) / a.k
        val = _halfline_power_integral(fd, l, beta, side,
                                       upper=lam * a.r_max ** a.k, tol=tol)
        total += lam ** (-beta) * val / a.k
    return total


def brute_force_2d(a: OscAmplitude, lam: float, sign: str = "plus",
                   panel_nodes: int = 20) -> complex:
    """Independent tensor-quadrature cross-check, practical for lam <= ~1e2.

    Gauss-Legendre panels in r; at each node the time integral is the plain
    discrete transform of the samples (no FFT, no interpolation).  Nodes are
    clipped where lam r^k would exceed the alias-safe band.
    """
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    side = _check_sign(sign)
    fd = a.fourier()
    r_alias = (0.8 * fd.nyquist / lam) ** (1.0 / a.k)
    r_top = min(a.r_max, r_alias)
    u_top = lam * r_top ** a.k
    # the transforms live inside their support windows, so put most panels
    # below u_dense and only a couple beyond (where the integrand is ~0)
    extent = max(abs(fd.support(l)[0 if side < 0 else 1]) for l in a.exponents)
    u_dense = min(u_top, 1.5 * max(extent, 1e-6))
    u_edges = list(u_dense * (np.arange(9) / 8.0) ** 2)
    if u_top > u_dense:
        u_edges += [0.5 * (u_dense + u_top), u_top]
    u_edges = np.array(u_edges)
    r_edges = (u_edges / lam) ** (1.0 / a.k)
    x, w = np.polynomial.legendre.leggauss(panel_nodes)
    nodes, weights = [], []
    for lo, hi in zip(r_edges[:-1], r_edges[1:]):
        if hi <= lo:
            continue
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    r = np.concatenate(nodes)
    wr = np.concatenate(weights)
    taus = side * lam * r ** a.k

    t = a.times
    transforms = {l: _direct_transform(a.r_terms[l], t, a.dt, taus)
                  for l in a.exponents}
    total = 0.0 + 0.0j
    for l in a.exponents:
        total += np.sum(wr * r ** l * transforms[l])
    return total


def _direct_transform(samples: np.ndarray, t: np.ndarray, dt: float,
                      taus: np.ndarray, block: int = 4096) -> np.ndarray:
    """Plain discrete transform dt * sum_m b_m exp(-i t_m tau) at arbitrary tau.

    Splitting t_m = offset_b + j*dt and using the angle-addition identities
    turns the work into two real matrix products plus one small trig table,
    instead of len(t)*len(taus) transcendental calls.
    """
    n = len(t)
    taus = np.asarray(taus, dtype=float)
    nblk = -(-n // block)
    w = np.zeros((nblk, block))
    w.ravel()[:n] = samples
    theta = np.outer(dt * np.arange(block), taus)       # block-local phases
    ct, st = np.cos(theta), np.sin(theta)
    wc = w @ ct                                         # (nblk, ntau)
    ws = w @ st
    offs = t[0] + dt * block * np.arange(nblk)
    phi = np.outer(offs, taus)
    cp, sp = np.cos(phi), np.sin(phi)
    re = np.sum(cp * wc - sp * ws, axis=0)
    im = -np.sum(sp * wc + cp * ws, axis=0)
    return dt * (re + 1j * im)


# -- canned profiles -----------------------------------------------------------

def fejer_kernel(T: float, t: np.ndarray) -> np.ndarray:
    """The non-negative kernel whose transform is the triangle on [-T, T]."""
    return (T / (2.0 * np.pi)) * np.sinc(T * t / (2.0 * np.pi)) ** 2


def default_time_grid(T: float = 1.0, n_samples: int = 1 << 21):
    """(t0, dt, t) grid sized so the Fejer kernel passes the edge and alias checks."""
    dt = 0.05 / T
    m = np.arange(n_samples) - n_samples // 2
    return -dt * (n_samples // 2), dt, dt * m


def fejer_amplitude(k: int, exponents=(3, 4), T: float = 1.0,
                    r_max: float = 1.0, shift: float = 0.0,
                    n_samples: int = 1 << 21) -> OscAmplitude:
    """Amplitude with Fejer time profiles on the default grid."""
    t0, dt, t = default_time_grid(T, n_samples)
    profile = fejer_kernel(T, t - shift)
    return OscAmplitude(k, {l: profile for l in exponents}, t0, dt, r_max)

"""Eigenvalues of quantized model operators.

Two routes: closed-form spectra for powers of the harmonic oscillator
(the analytic oracle), and Hermite-basis quantization of general polynomial
symbols in one degree of freedom, where a polynomial becomes an exact
finite-band matrix apart from truncation.  Truncation is controlled by a
basis-doubling test; an eigenvalue counts as resolved only when doubling the
basis moves it by less than 1e-9 of the window half-width and its index
stays below 0.8 of the basis size.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, ceil

import numpy as np

from .errors import ConvergenceError, DomainError, StructureError
from .symbols import (MAXIMUM, MINIMUM, SymbolModel, isotropic_component,
                      make_symbol)

OSC_POWER = "osc_power"
POLY_SYMBOL = "poly_symbol"

N_MAX = 8192
TRUST_INDEX_FRACTION = 0.8
CONVERGENCE_FRACTION = 1e-9


@dataclass(frozen=True)
class OperatorModel:
    """A quantizable model: oscillator power or general polynomial symbol."""

    kind: str
    n: int
    power: int | None
    sign: float
    symbol: SymbolModel | None
    p1_shift: float = 0.0

    @classmethod
    def osc_power(cls, power: int, n: int = 1, sign: float = 1.0,
                  p1_shift: float = 0.0) -> "OperatorModel":
        if power < 2:
            raise DomainError("oscillator power must be >= 2")
        if n not in (1, 2):
            raise DomainError("n must be 1 or 2")
        if sign not in (1.0, -1.0, 1, -1):
            raise DomainError("sign must be +1 or -1")
        sym = make_symbol(n, 0.0, [isotropic_component(n, power, float(sign))],
                          p1_at_z0=p1_shift)
        return cls(kind=OSC_POWER, n=n, power=int(power), sign=float(sign),
                   symbol=sym, p1_shift=float(p1_shift))

    @classmethod
    def poly_symbol(cls, symbol: SymbolModel, p1_shift: float = 0.0) -> "OperatorModel":
        if symbol.n != 1:
            raise DomainError("quantization of general symbols is limited to n = 1")
        if symbol.p1_at_z0 != p1_shift:
            symbol = SymbolModel(n=symbol.n, E_c=symbol.E_c,
                                 components=symbol.components, k=symbol.k,
                                 extremum=symbol.extremum,
                                 p1_at_z0=float(p1_shift),
                                 max_degree=symbol.max_degree)
        return cls(kind=POLY_SYMBOL, n=symbol.n, power=None, sign=1.0,
                   symbol=symbol, p1_shift=float(p1_shift))


@dataclass(frozen=True)
class SpectrumResult:
    """Windowed eigenvalues at one value of h, with resolution metadata."""

    h: float
    eigenvalues: np.ndarray        # ascending
    multiplicities: np.ndarray     # parallel integer weights
    basis_N: int
    converged: bool
    window: tuple

    def __post_init__(self):
        if np.any(np.diff(self.eigenvalues) < 0):
            raise StructureError("eigenvalues must be sorted ascending")
        if len(self.eigenvalues) != len(self.multiplicities):
            raise StructureError("multiplicity array length mismatch")

    @property
    def count(self) -> int:
        return int(self.multiplicities.sum())


def closed_form_spectrum(model: OperatorModel, h: float, window) -> SpectrumResult:
    """Exact spectrum of sign * (harmonic oscillator)^power plus the h-shift.

    Level s >= 0 carries the eigenvalue sign*(h*(2s+n))^power + p1_shift*h
    with multiplicity C(s+n-1, n-1); only levels inside the window are kept.
    """
    if model.kind != OSC_POWER:
        raise DomainError("closed-form spectrum requires an oscillator-power model")
    if h <= 0.0:
        raise DomainError("h must be positive")
    lo, hi = float(window[0]), float(window[1])
    m, n, sign, c = model.power, model.n, model.sign, model.p1_shift
    empty = (np.array([]), np.array([], dtype=int))
    if lo > hi:
        vals, mults = empty
    else:
        # base values are increasing in s; bound s by the relevant window edge
        bound = (hi - c * h) if sign > 0 else (c * h - lo)
        if bound <= 0.0:
            vals, mults = empty
        else:
            s_max = int(np.floor((bound ** (1.0 / m) / h - n) / 2.0))
            if s_max < 0:
                vals, mults = empty
            else:
                s = np.arange(s_max + 1)
                vals = sign * (h * (2 * s + n)) ** m + c * h
                mults = np.array([comb(si + n - 1, n - 1) for si in s], dtype=int)
                keep = (vals >= lo) & (vals <= hi)
                vals, mults = vals[keep], mults[keep]
    order = np.argsort(vals)
    return SpectrumResult(h=float(h), eigenvalues=vals[order],
                          multiplicities=mults[order], basis_N=0,
                          converged=True, window=(lo, hi))


def ladder_matrices(basis_N: int, h: float):
    """Position and momentum matrices in the h-scaled oscillator eigenbasis.

    X is real symmetric with first off-diagonal sqrt(h(j+1)/2); P is purely
    imaginary Hermitian with P[j, j+1] = -i sqrt(h(j+1)/2).
    """
    if basis_N < 2:
        raise DomainError("basis_N must be >= 2")
    off = np.sqrt(h * np.arange(1, basis_N) / 2.0)
    X = np.diag(off, 1) + np.diag(off, -1)
    P = 1j * (np.diag(off, -1) - np.diag(off, 1))
    return X, P


def _mccoy_monomial(a: int, b: int, xpows: dict, ppows: dict):
    """Fully symmetrized (Weyl) ordering of x^a xi^b on the truncated basis."""
    out = None
    for s in range(a + 1):
        term = xpows[s] @ ppows[b] @ xpows[a - s] * comb(a, s)
        out = term if out is None else out + term
    out = out / (2.0 ** a)
    # Hermitian in exact arithmetic; enforce it per monomial so that
    # quantization is exactly linear in the symbol
    return 0.5 * (out + out.conj().T)


def _matrix_powers(mat, top: int) -> dict:
    from scipy.sparse import identity
    pows = {0: identity(mat.shape[0], dtype=mat.dtype, format="csr"), 1: mat}
    for e in range(2, top + 1):
        pows[e] = pows[e - 1] @ mat
    return pows


def weyl_quantize(symbol, basis_N: int, h: float) -> np.ndarray:
    """Matrix of the Weyl quantization of a polynomial symbol (n = 1).

    ``symbol`` is a SymbolModel or an iterable of (a, b, coeff) monomials
    x^a xi^b.  The ladder matrices are banded, so the symmetrized products
    are assembled sparsely and densified once at the end; the result is
    exactly Hermitian and real whenever the imaginary part vanishes.
    """
    from scipy.sparse import csr_matrix
    if isinstance(symbol, SymbolModel):
        if symbol.n != 1:
            raise DomainError("Hermite-basis quantization is limited to n = 1")
        monos = [(al[0], al[1], c)
                 for d, comp in sorted(symbol.components.items())
                 for al, c in comp.terms()]
    else:
        monos = [(int(a), int(b), float(c)) for a, b, c in symbol]
    if not monos:
        raise StructureError("no monomials to quantize")
    X, P = ladder_matrices(basis_N, h)
    max_a = max(m[0] for m in monos)
    max_b = max(m[1] for m in monos)
    xpows = _matrix_powers(csr_matrix(X.astype(complex)), max_a)
    ppows = _matrix_powers(csr_matrix(P), max_b)
    M = None
    for a, b, cmono in monos:
        term = cmono * _mccoy_monomial(a, b, xpows, ppows)
        M = term if M is None else M + term
    M = np.asarray(M.todense())
    scale = max(float(np.max(np.abs(M))), 1.0)
    if float(np.max(np.abs(M - M.conj().T))) > 1e-13 * scale:
        raise StructureError("quantized matrix is not self-adjoint")
    if float(np.max(np.abs(M.imag))) <= 1e-13 * scale:
        return np.ascontiguousarray(M.real)
    return M


def eigenvalues_sym(M: np.ndarray) -> np.ndarray:
    """Full ascending spectrum of a (possibly complex) self-adjoint matrix."""
    M = np.asarray(M)
    scale = max(float(np.max(np.abs(M))), 1.0)
    if float(np.max(np.abs(M - M.conj().T))) > 1e-12 * scale:
        raise StructureError("matrix is not self-adjoint")
    M = 0.5 * (M + M.conj().T)
    vals = np.linalg.eigvalsh(M)
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError("dense eigensolver returned non-finite values")
    return vals


def _quantized_trusted(model: OperatorModel, h: float, window, basis_N: int):
    """Trusted windowed eigenvalues at one basis size (Maximum via negation)."""
    sym = model.symbol
    negate = sym.extremum == MAXIMUM
    work = sym
    if negate:
        work = make_symbol(sym.n, sym.E_c,
                           [(-1.0) * c for c in sym.components.values()],
                           p1_at_z0=sym.p1_at_z0)
    vals = eigenvalues_sym(weyl_quantize(work, basis_N, h))
    trusted = vals[: int(TRUST_INDEX_FRACTION * basis_N)]
    vals = -trusted[::-1] if negate else trusted
    vals = vals + model.p1_shift * h
    lo, hi = window
    return vals[(vals >= lo) & (vals <= hi)]


def spectrum(model: OperatorModel, h: float, window=None, eps: float = 0.5,
             auto_N: bool = True, basis_N: int | None = None) -> SpectrumResult:
    """Windowed eigenvalues of the model operator at semiclassical scale h.

    Oscillator powers use the closed form.  Polynomial symbols are quantized
    in the Hermite basis starting from ceil(8 * eps^(2/k) / h) basis states,
    doubling until no trusted windowed eigenvalue moves by more than
    1e-9 * eps; failure to converge by N = 8192 raises ConvergenceError.
    """
    E_c = model.symbol.E_c
    if window is None:
        window = (E_c - eps, E_c + eps)
    else:
        window = (float(window[0]), float(window[1]))
        eps = 0.5 * (window[1] - window[0])
    if model.kind == OSC_POWER:
        return closed_form_spectrum(model, h, window)

    k = model.symbol.k
    if basis_N is not None and not auto_N:
        N = int(basis_N)
        vals = _quantized_trusted(model, h, window, N)
        return SpectrumResult(h=float(h), eigenvalues=vals,
                              multiplicities=np.ones(len(vals), dtype=int),
                              basis_N=N, converged=False, window=window)

    N = max(int(ceil(8.0 * eps ** (2.0 / k) / h)), 16)
    if basis_N is not None:
        N = max(N, int(basis_N))
    if 2 * N > N_MAX:
        raise ConvergenceError(
            f"required basis 2*{N} exceeds N_MAX={N_MAX} at h={h}")
    vals = _quantized_trusted(model, h, window, N)
    while True:
        if 2 * N > N_MAX:
            raise ConvergenceError(
                f"basis doubling exceeded N_MAX={N_MAX} without convergence at h={h}")
        vals2 = _quantized_trusted(model, h, window, 2 * N)
        if len(vals) == len(vals2) and (
                len(vals) == 0 or
                float(np.max(np.abs(vals - vals2))) <= CONVERGENCE_FRACTION * eps):
            return SpectrumResult(h=float(h), eigenvalues=vals2,
                                  multiplicities=np.ones(len(vals2), dtype=int),
                                  basis_N=2 * N, converged=True, window=window)
        N, vals = 2 * N, vals2


def oscillator_weyl_correction(power: int, h: float, base: np.ndarray) -> np.ndarray:
    """Spectrum shift of Op((x^2+xi^2)^power) relative to the power of Op(x^2+xi^2).

    The star-product of the oscillator symbol with itself picks up
    -h^2 (power 2) and -5 h^2 (x^2+xi^2) (power 3), so the quantized power
    model sits above the plain power of the oscillator spectrum by the
    negated amounts.  ``base`` holds the oscillator eigenvalues h(2j+1).
    """
    if power == 2:
        return base ** 2 + h ** 2
    if power == 3:
        return base ** 3 + 5.0 * h ** 2 * base
    raise DomainError("correction tabulated for powers 2 and 3 only")

"""Spectral sums at the critical energy and their predicted leading asymptotics.

``gamma_sum`` evaluates the windowed eigenvalue sum of a test function;
``lambda0_predict`` assembles the closed-form leading coefficient from the
singular half-line pairing and the sphere integral; ``run_trace`` sweeps an
h grid, forms the ratio of the two, and fits the power law.

The default test function is the Fejer pair (transform = triangle on
[-T, T]); its slowly decaying oscillatory tails are integrated with a
Fourier-weight rule so the pairing reaches ~1e-10 absolute accuracy.
A smooth compactly-supported-transform variant is available as ``bump_phi``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import (ConvergenceError, DomainError, HypothesisViolation,
                     StructureError)
from .jets import jet_eval_many
from .spectrum import (OSC_POWER, OperatorModel, SpectrumResult, spectrum)
from .symbols import MAXIMUM, MINIMUM, SymbolModel, sphere_integral


@dataclass(frozen=True)
class TestFunction:
    """A weight function with compactly supported transform.

    ``phi`` and ``phi_hat`` are vectorized callables; ``envelope`` bounds
    |phi| pointwise and is used to certify tail truncations.
    """

    kind: str
    T: float
    shift: float
    phi: callable
    phi_hat: callable
    envelope: callable

    def __call__(self, t):
        return self.phi(t)


def fejer_phi(T: float, shift: float = 0.0) -> TestFunction:
    """The Fejer pair: phi_hat is the triangle on [-T, T].

    phi(t) = (T / 2 pi) * (sin(T t / 2) / (T t / 2))^2 shifted by ``shift``;
    it is non-negative with phi(0) = T / (2 pi) and integral one.  The
    transform is continuous but not smooth at the support edge, which only
    affects error tails, not the leading power law.
    """
    if T <= 0.0:
        raise DomainError("support radius T must be positive")

    def phi(t):
        u = np.asarray(t, dtype=float) - shift
        return (T / (2.0 * np.pi)) * np.sinc(T * u / (2.0 * np.pi)) ** 2

    def phi_hat(tau):
        tau = np.asarray(tau, dtype=float)
        tri = np.maximum(1.0 - np.abs(tau) / T, 0.0)
        return tri * np.exp(-1j * shift * tau)

    def envelope(t):
        u = np.abs(np.asarray(t, dtype=float) - shift)
        cap = T / (2.0 * np.pi)
        with np.errstate(divide="ignore"):
            dec = np.where(u > 0.0, (2.0 / (np.pi * T)) / np.maximum(u, 1e-300) ** 2,
                           np.inf)
        return np.minimum(cap, dec)

    return TestFunction(kind="fejer", T=float(T), shift=float(shift),
                        phi=phi, phi_hat=phi_hat, envelope=envelope)


def bump_phi(T: float, quad_tol: float = 1e-10) -> TestFunction:
    """Smooth variant: phi_hat(tau) = exp(-1 / (1 - (tau/T)^2)) inside (-T, T).

    phi is the inverse transform, evaluated through a Gauss-Legendre nodal
    rule refined until successive doublings agree to ``quad_tol``, then
    cached on a uniform grid with cubic interpolation; beyond the cache the
    nodal rule is used directly.
    """
    if T <= 0.0:
        raise DomainError("support radius T must be positive")
    if quad_tol <= 0.0:
        raise DomainError("quad_tol must be positive")

    def hat_profile(tau):
        tau = np.asarray(tau, dtype=float)
        inside = np.abs(tau) < T
        out = np.zeros_like(tau)
        x = np.clip(tau[inside] / T, -1 + 1e-300, 1 - 1e-300)
        out[inside] = np.exp(-1.0 / (1.0 - x * x))
        return out

    # refine the nodal rule until phi samples stabilize
    t_probe = np.array([0.0, 1.0, 5.0, 25.0, 125.0, 400.0])
    n = 512
    prev = None
    while n <= (1 << 15):
        x, w = np.polynomial.legendre.leggauss(n)
        tau = 0.5 * T * (x + 1.0)
        wh = (0.5 * T) * w * hat_profile(tau)
        probe = (np.cos(np.outer(t_probe, tau)) @ wh) / np.pi
        if prev is not None and np.max(np.abs(probe - prev)) <= quad_tol:
            break
        prev = probe
        n *= 2
    else:
        raise ConvergenceError("bump transform quadrature did not stabilize")
    nodes_tau, nodes_w = tau, wh

    def phi_nodal(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(len(t))
        for start in range(0, len(t), 4096):
            sl = slice(start, start + 4096)
            out[sl] = (np.cos(np.outer(t[sl], nodes_tau)) @ nodes_w) / np.pi
        return out

    t_cache = 400.0
    grid = np.linspace(0.0, t_cache, 8001)
    from scipy.interpolate import CubicSpline
    cache = CubicSpline(grid, phi_nodal(grid))

    def phi(t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        u = np.abs(np.atleast_1d(t))
        out = np.empty(u.shape)
        near = u <= t_cache
        out[near] = cache(u[near])
        if (~near).any():
            out[~near] = phi_nodal(u[~near])
        return float(out[0]) if scalar else out

    def phi_hat(tau):
        return hat_profile(tau).astype(complex)

    # certified quartic-decay envelope fitted on the cached range
    far = grid >= 10.0
    c4 = 1.5 * float(np.max(np.abs(cache(grid[far])) * grid[far] ** 4))
    peak = float(np.max(np.abs(cache(grid))))

    def envelope(t):
        u = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            dec = np.where(u > 0.0, c4 / np.maximum(u, 1e-300) ** 4, np.inf)
        return np.minimum(peak, dec)

    return TestFunction(kind="bump", T=float(T), shift=0.0,
                        phi=phi, phi_hat=phi_hat, envelope=envelope)


# -- spectral sum ----------------------------------------------------------------

def gamma_sum(spec: SpectrumResult, E_c: float, h: float, tf, eps: float) -> float:
    """Sum of tf((eigenvalue - E_c) / h) over the window, with multiplicities."""
    if not spec.converged:
        raise DomainError("spectrum is not converged; refusing to sum")
    half = 0.5 * (spec.window[1] - spec.window[0])
    if eps > half + 1e-15:
        raise DomainError(f"requested eps={eps} exceeds resolved half-width {half}")
    lam = spec.eigenvalues
    keep = np.abs(lam - E_c) <= eps
    if not keep.any():
        return 0.0
    phi = tf.phi if isinstance(tf, TestFunction) else tf
    vals = phi((lam[keep] - E_c) / h)
    return float(np.dot(spec.multiplicities[keep], vals))


# -- singular half-line pairing -----------------------------------------------------

def _fejer_tail(T: float, delta: float, alpha: float, t_break: float,
                tol: float) -> float:
    """integral_{t_break}^inf (1 - cos(T(t+delta))) / (pi T (t+delta)^2) t^alpha dt.

    Fourier-weight quadrature handles the oscillatory part on the
    half-infinite interval; the monotone part is plain adaptive quadrature.
    """
    a = t_break + delta
    if a <= 0.0:
        raise DomainError("tail break point must exceed the shift")

    def smooth(s):
        return (s - delta) ** alpha / s ** 2

    part_a, err_a = quad(smooth, a, np.inf, epsabs=tol / 4, epsrel=1e-12,
                         limit=300)
    part_b, err_b = quad(smooth, a, np.inf, weight="cos", wvar=T,
                         epsabs=tol / 4, limit=300, maxp1=80)
    if err_a + err_b > tol:
        raise ConvergenceError("Fejer tail quadrature error above tolerance")
    return (part_a - part_b) / (np.pi * T)


def pairing(tf, p1: float, alpha: float, sign: str, tol: float = 1e-9) -> float:
    """integral_0^inf phi(+/- t + p1) t^alpha dt with alpha in (-1, 0].

    The substitution t = v^(1/(1+alpha)) removes the endpoint singularity
    exactly; the far tail is handled per test-function kind (Fourier-weight
    rule for the Fejer pair, certified envelope truncation otherwise).
    """
    if not -1.0 < alpha <= 0.0:
        raise DomainError(f"alpha must lie in (-1, 0], got {alpha}")
    if sign not in ("plus", "minus"):
        raise DomainError(f"sign must be 'plus' or 'minus', got {sign!r}")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    sgn = 1.0 if sign == "plus" else -1.0
    is_tf = isinstance(tf, TestFunction)
    phi = tf.phi if is_tf else tf

    onep = 1.0 + alpha
    if is_tf and tf.kind == "fejer":
        delta = sgn * (p1 - tf.shift)
        t_break = max(64.0 / tf.T, 8.0 * (1.0 + abs(delta)))
    else:
        delta = None
        t_break = 64.0

    def head_integrand(v):
        t = v ** (1.0 / onep)
        return float(np.atleast_1d(phi(sgn * t + p1))[0]) / onep

    head, err_h = quad(head_integrand, 0.0, t_break ** onep,
                       epsabs=tol / 2, epsrel=1e-12, limit=500)
    if err_h > tol:
        raise ConvergenceError("pairing head quadrature error above tolerance")

    if is_tf and tf.kind == "fejer":
        tail = _fejer_tail(tf.T, delta, alpha, t_break, tol)
    else:
        tail, err_t = quad(lambda t: float(np.atleast_1d(
            phi(sgn * t + p1))[0]) * t ** alpha,
            t_break, np.inf, epsabs=tol / 2, epsrel=1e-12, limit=300)
        if err_t > tol:
            raise ConvergenceError("pairing tail quadrature error above tolerance")
    return head + tail


def lambda0_predict(s: SymbolModel, tf, tol: float = 1e-9):
    """Leading coefficient and h-exponent of the critical-point contribution.

    Returns (Lambda0, exponent) with exponent = 2n/k - n and
    Lambda0 = (1/k) * pairing * (2 pi)^(-n) * sphere integral, where the
    pairing uses the right half-line for a minimum and the left one for a
    maximum, shifted by the subprincipal value.
    """
    n, k = s.n, s.k
    alpha = (2.0 * n - k) / k
    sign = "plus" if s.extremum == MINIMUM else "minus"
    pair = pairing(tf, s.p1_at_z0, alpha, sign, tol=tol)
    ik = sphere_integral(s, tol=min(tol, 1e-9))
    lam0 = pair * ik / (k * (2.0 * np.pi) ** n)
    exponent = 2.0 * n / k - n
    return lam0, exponent


# -- power-law fit -------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    excluded: tuple = ()


def fit_exponent(pairs) -> FitResult:
    """Ordinary least squares of log(gamma) on log(h); non-positive gammas
    are excluded and reported."""
    kept, excluded = [], []
    for h, g in pairs:
        if g > 0.0:
            kept.append((float(h), float(g)))
        else:
            excluded.append(float(h))
    if len(kept) < 2:
        raise DomainError("need at least two positive points to fit")
    x = np.log([h for h, _ in kept])
    y = np.log([g for _, g in kept])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]),
                     residual=rms, excluded=tuple(excluded))


# -- period protection ----------------------------------------------------------------

def period_protection_bound(model: OperatorModel, T: float) -> float:
    """Largest admissible window half-width for an oscillator-power model.

    Orbits of (|z|^2)^m at energy E close up after pi / (m E^((m-1)/m)), so
    requiring every period in the window to exceed T gives
    eps < (pi / (m T))^(m/(m-1)).
    """
    if model.kind != OSC_POWER:
        raise DomainError("closed-form period bound exists only for oscillator powers")
    m = model.power
    return (np.pi / (m * T)) ** (m / (m - 1.0))


def _numeric_period_guard(sym: SymbolModel, eps: float, T: float):
    """Probe for closed orbits with period <= T at the window-edge energy."""
    from scipy.integrate import solve_ivp
    from .symbols import hamiltonian_field

    field = hamiltonian_field(sym)
    p = sym.principal_minus_critical()
    want = eps if sym.extremum == MINIMUM else -eps
    for angle in np.linspace(0.0, np.pi, 5)[:-1]:
        theta = np.array([np.cos(angle), np.sin(angle)])
        r_hi = 1.0
        while jet_eval_many(p, (r_hi * theta)[None, :])[0] / want < 1.0:
            r_hi *= 2.0
            if r_hi > 1e6:
                raise ConvergenceError("could not locate the window-edge energy shell")
        r_lo = 0.0
        for _ in range(80):
            mid = 0.5 * (r_lo + r_hi)
            if jet_eval_many(p, (mid * theta)[None, :])[0] / want < 1.0:
                r_lo = mid
            else:
                r_hi = mid
        z0 = 0.5 * (r_lo + r_hi) * theta
        t_eval = np.linspace(0.0, 1.05 * T, 512)
        sol = solve_ivp(lambda _t, y: field.eval_many(y[None, :])[0],
                        (0.0, 1.05 * T), z0, t_eval=t_eval,
                        rtol=1e-10, atol=1e-12)
        if not sol.success:
            raise ConvergenceError("period probe integration failed")
        dist = np.linalg.norm(sol.y.T - z0, axis=1)
        r0 = np.linalg.norm(z0)
        late = t_eval > 0.15 * T
        if np.any(dist[late] < 0.05 * r0):
            raise HypothesisViolation(
                "period-protection",
                f"a closed orbit with period <= {1.05 * T:g} exists at |E| = {eps:g}; "
                "shrink eps or the test-function support")


def check_period_protection(model: OperatorModel, tf: TestFunction, eps: float):
    """Refuse configurations whose window admits closed orbits of period <= T."""
    if model.kind == OSC_POWER:
        bound = period_protection_bound(model, tf.T)
        if eps >= bound:
            raise HypothesisViolation(
                "period-protection",
                f"eps={eps:g} >= {bound:g} admits orbit periods inside the "
                f"test-function support (T={tf.T:g})")
    else:
        _numeric_period_guard(model.symbol, eps, tf.T)


# -- the sweep -------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRun:
    """One h sweep: empirical sums, prediction, ratios, and the power-law fit."""

    model: OperatorModel
    tf: TestFunction
    eps: float
    h_grid: tuple
    gamma: tuple
    lambda0: float
    exponent: float
    ratios: tuple
    basis_sizes: tuple
    converged: tuple
    fit: FitResult
    excluded: tuple = ()
    apparent_next_exponent: float | None = None

    def prediction(self, h: float) -> float:
        return self.lambda0 * h ** self.exponent


def default_h_grid(model: OperatorModel) -> np.ndarray:
    if model.kind == OSC_POWER:
        return np.geomspace(1e-2, 1e-5, 9)
    return np.geomspace(1e-1, 3e-3, 6)


def run_trace(model: OperatorModel, tf: TestFunction, eps: float, h_grid=None,
              workers: int | None = None, tol: float = 1e-9) -> TraceRun:
    """Evaluate the spectral sum across the h grid against the prediction.

    Per-h spectra are independent and run on a thread pool (the eigensolver
    releases the GIL); h values whose spectra fail to converge are excluded
    from the fit and reported in ``excluded``.
    """
    if h_grid is None:
        h_grid = default_h_grid(model)
    h_grid = np.asarray(h_grid, dtype=float)
    if np.any(np.diff(h_grid) >= 0.0):
        raise StructureError("h grid must be strictly decreasing")
    check_period_protection(model, tf, eps)

    sym = model.symbol
    lam0, exponent = lambda0_predict(sym, tf, tol=tol)
    E_c = sym.E_c

    def one(h):
        try:
            spec = spectrum(model, h, eps=eps)
        except ConvergenceError as exc:
            return ("failed", str(exc))
        return ("ok", spec, gamma_sum(spec, E_c, h, tf, eps))

    if workers is None:
        workers = int(os.environ.get("DEGENTRACE_THREADS", "0")) or os.cpu_count() or 1
    if workers > 1 and len(h_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, h_grid))
    else:
        results = [one(h) for h in h_grid]

    gammas, ratios, sizes, conv, excluded, fit_pairs = [], [], [], [], [], []
    for h, res in zip(h_grid, results):
        if res[0] == "failed":
            excluded.append((float(h), res[1]))
            gammas.append(float("nan"))
            ratios.append(float("nan"))
            sizes.append(0)
            conv.append(False)
            continue
        _, spec, g = res
        gammas.append(g)
        ratios.append(g / (lam0 * h ** exponent))
        sizes.append(spec.basis_N)
        conv.append(bool(spec.converged))
        fit_pairs.append((h, g))
    fit = fit_exponent(fit_pairs)

    apparent = None
    drift = [(h, abs(r - 1.0)) for h, r, c in zip(h_grid, ratios, conv)
             if c and np.isfinite(r) and abs(r - 1.0) > 1e-12]
    if len(drift) >= 3:
        x = np.log([h for h, _ in drift])
        y = np.log([d for _, d in drift])
        apparent = float(np.polyfit(x, y, 1)[0])

    return TraceRun(model=model, tf=tf, eps=float(eps),
                    h_grid=tuple(float(h) for h in h_grid),
                    gamma=tuple(gammas), lambda0=float(lam0),
                    exponent=float(exponent), ratios=tuple(ratios),
                    basis_sizes=tuple(sizes), converged=tuple(conv),
                    fit=fit, excluded=tuple(excluded),
                    apparent_next_exponent=apparent)

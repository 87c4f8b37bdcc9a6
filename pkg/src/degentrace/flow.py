"""Jets of the Hamiltonian flow at the critical point and the generating function.

Because the full Hessian vanishes at the critical point, the linearized flow
is the identity for all times.  That makes every degree of the flow's Taylor
expansion (and of the generating function's) reachable by quadrature of
polynomials in time, which we carry out exactly on a jet-valued polynomial
ring in t: no time stepping, no quadrature error.  The only numerical object
in this module is the ODE oracle used to cross-check the jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DomainError, InternalError
from .jets import (Jet, VectorJet, homogeneous_part, jet_compose, jet_diff,
                   jet_eval_many, jet_mul)
from .symbols import SymbolModel, hamiltonian_field


class TimeJet:
    """Jet-valued polynomial in time: sum_p t**p * coeff[p].

    Coefficients are plain jets sharing dim and order; arithmetic is the
    obvious polynomial arithmetic over the jet ring, and integration in t
    from 0 is exact monomial antidifferentiation.
    """

    __slots__ = ("dim", "order", "tcoeffs")

    def __init__(self, tcoeffs):
        coeffs = list(tcoeffs)
        if not coeffs:
            raise DomainError("TimeJet needs at least one t-coefficient")
        self.dim = coeffs[0].dim
        self.order = coeffs[0].order
        for c in coeffs:
            if c.dim != self.dim or c.order != self.order:
                raise DomainError("t-coefficients disagree on dim/order")
        while len(coeffs) > 1 and coeffs[-1].is_zero():
            coeffs.pop()
        self.tcoeffs = coeffs

    @classmethod
    def zero(cls, dim, order):
        return cls([Jet.zero(dim, order)])

    @classmethod
    def of(cls, jet, tpower=0):
        base = [Jet.zero(jet.dim, jet.order)] * tpower
        return cls(base + [jet])

    @property
    def t_degree(self):
        return len(self.tcoeffs) - 1

    def __add__(self, other):
        if isinstance(other, Jet):
            other = TimeJet.of(other)
        n = max(len(self.tcoeffs), len(other.tcoeffs))
        z = Jet.zero(self.dim, self.order)
        a = self.tcoeffs + [z] * (n - len(self.tcoeffs))
        b = other.tcoeffs + [z] * (n - len(other.tcoeffs))
        return TimeJet([x + y for x, y in zip(a, b)])

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return TimeJet([float(other) * c for c in self.tcoeffs])
        if isinstance(other, Jet):
            other = TimeJet.of(other)
        out = [Jet.zero(self.dim, self.order)
               for _ in range(len(self.tcoeffs) + len(other.tcoeffs) - 1)]
        for p, a in enumerate(self.tcoeffs):
            if a.is_zero():
                continue
            for q, b in enumerate(other.tcoeffs):
                if b.is_zero():
                    continue
                out[p + q] = out[p + q] + jet_mul(a, b)
        return TimeJet(out)

    __rmul__ = __mul__

    def integrate_t(self):
        """Antiderivative in t vanishing at t = 0."""
        out = [Jet.zero(self.dim, self.order)]
        out += [c * (1.0 / (p + 1)) for p, c in enumerate(self.tcoeffs)]
        return TimeJet(out)

    def diff_t(self):
        if len(self.tcoeffs) == 1:
            return TimeJet.zero(self.dim, self.order)
        return TimeJet([float(p) * c for p, c in enumerate(self.tcoeffs)][1:])

    def diff_z(self, i):
        return TimeJet([jet_diff(c, i) for c in self.tcoeffs])

    def homogeneous_part(self, d):
        return TimeJet([homogeneous_part(c, d) for c in self.tcoeffs])

    def t_coefficient(self, p):
        if p < len(self.tcoeffs):
            return self.tcoeffs[p]
        return Jet.zero(self.dim, self.order)

    def at(self, t):
        """Evaluate the t-polynomial, returning a plain Jet."""
        out = Jet.zero(self.dim, self.order)
        tp = 1.0
        for c in self.tcoeffs:
            out = out + tp * c
            tp *= t
        return out

    def max_abs(self):
        return max(c.max_abs() for c in self.tcoeffs)

    def is_zero(self):
        return all(c.is_zero() for c in self.tcoeffs)


def compose_time(f: Jet, args) -> TimeJet:
    """f composed with time-dependent arguments (zero constant term each)."""
    gs = [TimeJet.of(g) if isinstance(g, Jet) else g for g in args]
    if len(gs) != f.dim:
        raise DomainError(f"need {f.dim} inner arguments, got {len(gs)}")
    dim, order = gs[0].dim, gs[0].order
    for g in gs:
        if g.t_coefficient(0).parts[0][0] != 0.0 or any(
                c.parts[0][0] != 0.0 for c in g.tcoeffs):
            raise DomainError("inner argument has non-zero constant term")
    from .jets import monomials
    out = TimeJet.of(Jet.constant(float(f.parts[0][0]), dim, order))
    powers = [[TimeJet.of(Jet.constant(1.0, dim, order)), g] for g in gs]

    def power(i, e):
        while len(powers[i]) <= e:
            powers[i].append(powers[i][-1] * powers[i][1])
        return powers[i][e]

    for d in range(1, min(f.order, order) + 1):
        block = f.parts[d]
        if not block.any():
            continue
        for pos, alpha in enumerate(monomials(f.dim, d)):
            c = block[pos]
            if c == 0.0:
                continue
            term = None
            for i, e in enumerate(alpha):
                if e == 0:
                    continue
                term = power(i, e) if term is None else term * power(i, e)
            out = out + c * term
    return out


# -- flow jets ----------------------------------------------------------------

@dataclass(frozen=True)
class FlowJet:
    """Taylor expansion of the time-t flow map in the initial conditions."""

    t: float
    jet: VectorJet


def _flow_time_jets(s: SymbolModel, m: int) -> list:
    if m < 1:
        raise DomainError("flow jet degree must be >= 1")
    if m > s.max_degree - 1:
        raise DomainError(
            f"degree {m} flow jet needs symbol data through degree {m + 1}, "
            f"only {s.max_degree} available")
    dim = 2 * s.n
    field = hamiltonian_field(s, m + 1)     # components of z-order m
    coords = [Jet.coordinate(i, dim, m) for i in range(dim)]
    flow = [TimeJet.of(c) for c in coords]  # linear part stays the identity
    for d in range(2, m + 1):
        for i in range(dim):
            rhs = compose_time(field[i].truncate(m), flow)
            part = rhs.homogeneous_part(d)
            # the degree-d slot must still be untouched, otherwise the
            # triangular structure of the recurrence is broken
            if not flow[i].homogeneous_part(d).is_zero():
                raise InternalError("flow recurrence is not triangular")
            flow[i] = flow[i] + part.integrate_t()
    return flow


def flow_jet(s: SymbolModel, m: int, t: float) -> FlowJet:
    """Taylor coefficients through degree m of the time-t flow at the origin.

    The linear part is the identity for every t; all higher parts come from
    exact integration of polynomials in time, so coefficients carry only
    rounding error.
    """
    tpolys = _flow_time_jets(s, m)
    return FlowJet(t=float(t), jet=VectorJet([p.at(float(t)) for p in tpolys]))


def flow_numeric(s: SymbolModel, z, t: float, tol: float = 1e-12) -> np.ndarray:
    """ODE oracle: integrate zdot = H_p0(z) with an adaptive RK(5,4) pair."""
    z0 = np.asarray(z, dtype=float)
    if z0.shape != (2 * s.n,):
        raise DomainError(f"phase point must have shape ({2 * s.n},)")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    if t == 0.0:
        return z0.copy()
    field = hamiltonian_field(s)

    def rhs(_t, y):
        return field.eval_many(y[None, :])[0]

    scale = max(1.0, float(np.linalg.norm(z0)))
    sol = solve_ivp(rhs, (0.0, float(t)), z0, method="RK45",
                    rtol=min(max(tol, 1e-13), 1e-3), atol=tol * scale * 1e-2)
    if not sol.success:
        raise ConvergenceError(f"flow integration failed: {sol.message}")
    return sol.y[:, -1]


# -- generating function --------------------------------------------------------

@dataclass(frozen=True)
class GeneratingJet:
    """Generating function S(t, x, eta) = <x, eta> - t*E_c + correction.

    ``S`` is the full jet at the stored time; the decomposition fields give
    the leading -t * p_k piece, the -t * (remaining homogeneous parts) piece,
    and the explicitly t^2-prefixed remainder, all evaluated at the same t.
    """

    t: float
    S: Jet
    pk_part: Jet
    r_part: Jet
    g_part: Jet


def _generating_sigma(s: SymbolModel, N: int) -> TimeJet:
    """The correction sigma(t, x, eta) = S - <x, eta> + t*E_c through degree N."""
    if N > s.max_degree:
        raise DomainError(f"degree {N} needs symbol data through {N}, "
                          f"only {s.max_degree} available")
    if N < s.k:
        raise DomainError(f"need N >= k = {s.k}")
    dim = 2 * s.n
    n = s.n
    p = s.principal_minus_critical(N)
    coords_x = [Jet.coordinate(i, dim, N) for i in range(n)]
    coords_eta = [Jet.coordinate(n + i, dim, N) for i in range(n)]
    sigma = TimeJet.zero(dim, N)
    for d in range(s.k, N + 1):
        args = [TimeJet.of(c) for c in coords_x]
        args += [TimeJet.of(coords_eta[i]) + sigma.diff_z(i) for i in range(n)]
        composed = compose_time(p, args)
        rhs_d = composed.homogeneous_part(d)
        if not sigma.homogeneous_part(d).is_zero():
            raise InternalError("Hamilton-Jacobi recursion is not triangular")
        sigma = sigma + (-1.0 * rhs_d).integrate_t()
    return sigma


def generating_jet(s: SymbolModel, N: int, t: float) -> GeneratingJet:
    """Order-by-order solution of d_t S + p0(x, d_x S) = 0 with S(0) = <x, eta>.

    Returns the jet of S at time t together with its structural decomposition
    S - <x,eta> + t*E_c = -t*p_k - t*(p0 - E_c - p_k) - t^2*G(t).
    """
    sigma = _generating_sigma(s, N)
    dim = 2 * s.n
    tf = float(t)
    pairing = Jet.zero(dim, N)
    for i in range(s.n):
        pairing = pairing + jet_mul(Jet.coordinate(i, dim, N),
                                    Jet.coordinate(s.n + i, dim, N))
    S = pairing + Jet.constant(-tf * s.E_c, dim, N) + sigma.at(tf)
    pk = s.component(s.k).truncate(N)
    r = s.principal_minus_critical(N) - pk
    g_tpoly = _g_remainder(s, sigma)
    return GeneratingJet(t=tf, S=S, pk_part=-tf * pk, r_part=-tf * r,
                         g_part=(-tf * tf) * g_tpoly.at(tf))


def _g_remainder(s: SymbolModel, sigma: TimeJet) -> TimeJet:
    """G(t, x, eta) with sigma = -t*(p0 - E_c) - t^2*G(t); exact t-division."""
    linear = TimeJet.of(s.principal_minus_critical(sigma.order), tpower=1)
    rest = sigma + linear
    # rest must carry an explicit t^2 factor
    if not rest.t_coefficient(0).is_zero() or not rest.t_coefficient(1).is_zero():
        raise InternalError("generating correction lacks the t^2 structure")
    shifted = rest.tcoeffs[2:] if rest.t_degree >= 2 else []
    if not shifted:
        return TimeJet.zero(sigma.dim, sigma.order)
    return TimeJet([(-1.0) * c for c in shifted])


def phase_structure_check(s: SymbolModel, N: int, t_grid) -> dict:
    """Verify the phase decomposition coefficient-wise; report-only.

    Checks that the t-linear part of the correction is exactly
    -(p0 - E_c), that the rest carries an explicit t^2 factor whose spatial
    degrees start above k, and reports the largest reconstruction residual
    over the t grid along with the observed t-degree per spatial degree of
    the remainder.
    """
    sigma = _generating_sigma(s, N)
    p_full = s.principal_minus_critical(N)
    lin_residual = (sigma.t_coefficient(1) + p_full).max_abs()
    t0_residual = sigma.t_coefficient(0).max_abs()

    g = _g_remainder(s, sigma)
    low_degrees = 0.0
    for d in range(0, min(s.k, N) + 1):
        low_degrees = max(low_degrees, g.homogeneous_part(d).max_abs())

    t_degrees = {}
    for d in range(N + 1):
        td = 0
        for pwr, c in enumerate(g.tcoeffs):
            if homogeneous_part(c, d).max_abs() > 0.0:
                td = pwr
        if td or not g.homogeneous_part(d).is_zero():
            t_degrees[d] = td

    grid_residual = 0.0
    pk = s.component(s.k).truncate(N)
    r = p_full - pk
    for t in t_grid:
        t = float(t)
        lhs = sigma.at(t)
        rhs = (-t) * pk + (-t) * r + (-t * t) * g.at(t)
        grid_residual = max(grid_residual, (lhs - rhs).max_abs())

    return {
        "linear_part_residual": float(lin_residual),
        "t0_residual": float(t0_residual),
        "g_low_degree_residual": float(low_degrees),
        "max_residual": float(max(grid_residual, lin_residual, t0_residual,
                                  low_degrees)),
        "g_t_degree_per_spatial_degree": t_degrees,
    }


def normal_form_jacobian(s: SymbolModel, t: float, theta) -> float:
    """|p_k(theta)|^(1/k) for a unit direction theta; independent of t."""
    th = np.asarray(theta, dtype=float)
    if th.shape != (2 * s.n,):
        raise DomainError(f"direction must have shape ({2 * s.n},)")
    nrm = float(np.linalg.norm(th))
    if nrm == 0.0:
        raise DomainError("direction must be non-zero")
    th = th / nrm
    val = float(jet_eval_many(s.components[s.k], th[None, :])[0])
    return abs(val) ** (1.0 / s.k)


# -- independent chain-rule constants ------------------------------------------

def set_partitions(m: int):
    """All partitions of {0, ..., m-1} into blocks (lists of lists)."""
    if m == 0:
        yield []
        return
    for rest in set_partitions(m - 1):
        elt = m - 1
        for i in range(len(rest)):
            yield rest[:i] + [rest[i] + [elt]] + rest[i + 1:]
        yield rest + [[elt]]


def faa_di_bruno_constants(m: int) -> dict:
    """Counts of set partitions of an m-set grouped by block-size multiset.

    These are the universal integers of the higher-order chain rule; the
    test-suite uses them to verify jet composition against the partition
    formula without hard-coding any table.
    """
    counts: dict = {}
    for part in set_partitions(m):
        key = tuple(sorted(len(b) for b in part))
        counts[key] = counts.get(key, 0) + 1
    return counts


def scalar_chain_rule_oracle(f_derivs, g_derivs, m: int) -> float:
    """m-th derivative of f(g(x)) at 0 from the partition formula (1-D).

    ``f_derivs[r]`` is f^(r)(g(0)) and ``g_derivs[j]`` is g^(j)(0) with
    g(0) = 0.  Serves as the independent oracle for jet composition.
    """
    total = 0.0
    for sizes, count in faa_di_bruno_constants(m).items():
        r = len(sizes)
        term = f_derivs[r]
        for nj in sizes:
            term *= g_derivs[nj]
        total += count * term
    return total


def first_jet_prediction(s: SymbolModel, t: float) -> VectorJet:
    """t * (degree k-1 part of the Hamiltonian field of p_k)."""
    field = hamiltonian_field(s, s.k)
    comps = [float(t) * homogeneous_part(c, s.k - 1) for c in field]
    return VectorJet(comps)


def compose_flows(a: FlowJet, b: FlowJet) -> VectorJet:
    """Jet of the composition z -> a(b(z)), truncated at the common order."""
    return VectorJet([jet_compose(c, list(b.jet)) for c in a.jet])

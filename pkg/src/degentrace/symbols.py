"""Polynomial local models of a classical Hamiltonian near a flat critical point.

A :class:`SymbolModel` holds the homogeneous pieces of the principal symbol
above the critical energy, the first non-vanishing degree ``k``, the extremum
type certified from a dense sphere sample, and the subprincipal value at the
critical point.  The critical point is always the origin of the model
coordinates; translating a user symbol there is the caller's responsibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, HypothesisViolation, StructureError
from .jets import (Jet, VectorJet, homogeneous_part, jet_diff, jet_eval_many,
                   jet_from_json, jet_to_json)

MINIMUM = "minimum"
MAXIMUM = "maximum"

# dense-sample definiteness margin: min |p_k| over the sphere sample must be
# at least this fraction of the max
DEFINITENESS_MARGIN = 1e-9

_CIRCLE_SAMPLES = 4096
_SPHERE3_SAMPLES = 1 << 17


@dataclass(frozen=True)
class SymbolModel:
    """Validated local model  E_c + sum_j p_j  with homogeneous components p_j."""

    n: int
    E_c: float
    components: dict          # degree -> homogeneous Jet (dim 2n)
    k: int
    extremum: str             # MINIMUM or MAXIMUM
    p1_at_z0: float
    max_degree: int = field(default=0)

    def component(self, j: int) -> Jet:
        dim = 2 * self.n
        return self.components.get(j, Jet.zero(dim, self.max_degree))

    def principal_minus_critical(self, order: int | None = None) -> Jet:
        """The jet of p0 - E_c, truncated at `order` (default: all data)."""
        order = self.max_degree if order is None else order
        if order > self.max_degree:
            raise DomainError(f"only degrees up to {self.max_degree} are available")
        total = Jet.zero(2 * self.n, order)
        for j, comp in self.components.items():
            if j <= order:
                total = total + comp.truncate(order)
        return total

    def leading_on_directions(self, directions: np.ndarray) -> np.ndarray:
        return jet_eval_many(self.components[self.k], directions)


def sphere_sample(n: int) -> np.ndarray:
    """Quasi-uniform unit directions in R^{2n} used as a definiteness certificate."""
    if n == 1:
        theta = np.linspace(0.0, 2.0 * np.pi, _CIRCLE_SAMPLES, endpoint=False)
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 2:
        from scipy.stats import norm, qmc
        u = qmc.Sobol(d=4, scramble=False).random(_SPHERE3_SAMPLES)
        g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
        r = np.linalg.norm(g, axis=1)
        keep = r > 1e-9
        return g[keep] / r[keep, None]
    raise DomainError(f"sphere sampling implemented for n in (1, 2), got n={n}")


def make_symbol(n: int, E_c: float, components, p1_at_z0: float = 0.0) -> SymbolModel:
    """Validate homogeneous components and classify the critical point.

    ``components`` is an iterable of homogeneous jets in 2n variables.  The
    lowest non-vanishing degree k must exceed 2, and the degree-k part must
    have a fixed sign bounded away from zero on the unit sphere; otherwise a
    :class:`HypothesisViolation` names the failed condition.
    """
    comps = list(components)
    if n not in (1, 2):
        raise DomainError(f"n must be 1 or 2, got {n}")
    if not comps:
        raise StructureError("at least one homogeneous component is required")
    dim = 2 * n
    by_degree: dict[int, Jet] = {}
    max_degree = max(c.order for c in comps)
    for c in comps:
        if c.dim != dim:
            raise StructureError(f"component dim {c.dim} != 2n = {dim}")
        d = c.lowest_degree()
        if d is None:
            continue                       # identically zero: ignore
        c = c.truncate(max_degree)
        if homogeneous_part(c, d) != c:
            raise StructureError(f"component with lowest degree {d} is not homogeneous")
        if d in by_degree:
            raise StructureError(f"duplicate component of degree {d}")
        by_degree[d] = c
    if not by_degree:
        raise StructureError("all components are zero")

    k = min(by_degree)
    if k <= 2:
        raise HypothesisViolation(
            "H2", f"first non-vanishing homogeneous degree is {k}, need k > 2")

    directions = sphere_sample(n)
    vals = jet_eval_many(by_degree[k], directions)
    abs_vals = np.abs(vals)
    vmax = float(abs_vals.max())
    imin = int(abs_vals.argmin())
    if vmax == 0.0 or abs_vals[imin] < DEFINITENESS_MARGIN * vmax or \
            vals.min() < 0.0 < vals.max():
        theta = directions[imin if vmax else 0]
        raise HypothesisViolation(
            "H4",
            "degree-%d component is not definite on the sphere "
            "(offending direction theta=%s)" % (k, np.array2string(theta, precision=6)),
            direction=theta)
    extremum = MINIMUM if vals.min() > 0.0 else MAXIMUM

    return SymbolModel(n=n, E_c=float(E_c), components=by_degree, k=k,
                       extremum=extremum, p1_at_z0=float(p1_at_z0),
                       max_degree=max_degree)


# -- sphere integral ---------------------------------------------------------

def _circle_integral(s: SymbolModel, tol: float) -> float:
    expo = -2.0 * s.n / s.k
    prev = None
    m = 256
    while m <= (1 << 20):
        theta = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        vals = np.abs(s.leading_on_directions(dirs)) ** expo
        est = float(vals.mean() * 2.0 * np.pi)
        if prev is not None and abs(est - prev) <= tol:
            return est
        prev = est
        m *= 2
    raise ConvergenceError(f"circle quadrature did not reach tol={tol}")


def _sphere3_integral(s: SymbolModel, tol: float) -> float:
    # hyperspherical angles (psi1, psi2 in [0, pi], psi3 in [0, 2pi)) with
    # surface element sin^2(psi1) sin(psi2); Gauss-Legendre in the polar
    # angles, trapezoid in the periodic azimuthal one
    expo = -2.0 * s.n / s.k
    prev = None
    m = 8
    while m <= 512:
        x1, w1 = np.polynomial.legendre.leggauss(m)
        psi1 = 0.5 * np.pi * (x1 + 1.0)
        psi2 = psi1
        w = 0.5 * np.pi * w1
        psi3 = np.linspace(0.0, 2.0 * np.pi, 2 * m, endpoint=False)
        w3 = 2.0 * np.pi / (2 * m)

        a, b, c = np.meshgrid(psi1, psi2, psi3, indexing="ij")
        dirs = np.column_stack([
            np.cos(a).ravel(),
            (np.sin(a) * np.cos(b)).ravel(),
            (np.sin(a) * np.sin(b) * np.cos(c)).ravel(),
            (np.sin(a) * np.sin(b) * np.sin(c)).ravel(),
        ])
        vals = np.abs(s.leading_on_directions(dirs)) ** expo
        jac = (np.sin(a) ** 2 * np.sin(b)).ravel()
        wgt = (np.multiply.outer(np.multiply.outer(w, w), np.full(2 * m, w3))).ravel()
        est = float(np.sum(vals * jac * wgt))
        if prev is not None and abs(est - prev) <= tol:
            return est
        prev = est
        m *= 2
    raise ConvergenceError(f"sphere quadrature did not reach tol={tol}")


def sphere_integral(s: SymbolModel, tol: float = 1e-10) -> float:
    """Integral of |p_k|^(-2n/k) over the unit sphere in R^{2n}.

    The integrand is smooth and bounded away from zero for a validated
    model, so successive grid doubling gives a reliable error estimate.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    if s.n == 1:
        return _circle_integral(s, tol)
    return _sphere3_integral(s, tol)


def hamiltonian_field(s: SymbolModel, order: int | None = None) -> VectorJet:
    """Hamiltonian vector field (d_xi p0, -d_x p0) truncated at degree order-1."""
    order = s.max_degree if order is None else order
    p = s.principal_minus_critical(order)
    n = s.n
    comps = [jet_diff(p, n + i) for i in range(n)]          # +d/d(xi_i)
    comps += [-1.0 * jet_diff(p, i) for i in range(n)]      # -d/d(x_i)
    return VectorJet([c.truncate(max(order - 1, 0)) for c in comps])


# -- canned models and serialization ------------------------------------------

def isotropic_component(n: int, m: int, sign: float = 1.0) -> Jet:
    """sign * (|x|^2 + |xi|^2)^m as a homogeneous jet of degree 2m."""
    dim = 2 * n
    order = 2 * m
    q = Jet.zero(dim, order)
    for i in range(dim):
        zi = Jet.coordinate(i, dim, order)
        q = q + zi * zi
    out = Jet.constant(1.0, dim, order)
    for _ in range(m):
        out = out * q
    return sign * out


def symbol_to_json(s: SymbolModel) -> dict:
    return {
        "n": s.n,
        "Ec": s.E_c,
        "p1": s.p1_at_z0,
        "components": [
            {"degree": d, "terms": jet_to_json(c)["terms"]}
            for d, c in sorted(s.components.items())
        ],
    }


def symbol_from_json(obj: dict) -> SymbolModel:
    n = int(obj["n"])
    comps = []
    for entry in obj["components"]:
        d = int(entry["degree"])
        comps.append(jet_from_json({"dim": 2 * n, "order": d, "terms": entry["terms"]}))
    return make_symbol(n, float(obj.get("Ec", 0.0)), comps,
                       p1_at_z0=float(obj.get("p1", 0.0)))

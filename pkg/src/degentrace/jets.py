"""Dense truncated Taylor (jet) algebra in up to four variables.

A :class:`Jet` keeps one coefficient block per total degree, with monomials
ordered graded-lexicographically (larger leading exponent first).  Equal jets
therefore have identical storage and their serialized forms are
byte-comparable.  Coefficients are doubles and every operation is exact in
the coefficient ring up to floating-point rounding, which keeps all
downstream verification tolerances meaningful.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from .errors import DomainError, StructureError

MAX_DIM = 4


@lru_cache(maxsize=None)
def monomials(dim: int, degree: int) -> tuple:
    """Exponent tuples of total degree `degree` in `dim` variables, graded-lex order."""
    if dim == 1:
        return ((degree,),)
    out = []
    for lead in range(degree, -1, -1):
        for rest in monomials(dim - 1, degree - lead):
            out.append((lead,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_position(dim: int, degree: int) -> dict:
    return {alpha: i for i, alpha in enumerate(monomials(dim, degree))}


def block_size(dim: int, degree: int) -> int:
    return comb(degree + dim - 1, dim - 1)


@lru_cache(maxsize=None)
def _product_table(dim: int, d1: int, d2: int) -> np.ndarray:
    """``table[i, j]`` is the position of ``m1[i] + m2[j]`` inside degree ``d1 + d2``."""
    pos = monomial_position(dim, d1 + d2)
    m1, m2 = monomials(dim, d1), monomials(dim, d2)
    table = np.empty((len(m1), len(m2)), dtype=np.intp)
    for i, a in enumerate(m1):
        for j, b in enumerate(m2):
            table[i, j] = pos[tuple(x + y for x, y in zip(a, b))]
    return table


@lru_cache(maxsize=None)
def _diff_table(dim: int, degree: int, var: int) -> tuple:
    """(source positions, target positions, factors) for d/dx_var on degree `degree`."""
    pos_lo = monomial_position(dim, degree - 1)
    src, dst, fac = [], [], []
    for i, alpha in enumerate(monomials(dim, degree)):
        e = alpha[var]
        if e == 0:
            continue
        beta = alpha[:var] + (e - 1,) + alpha[var + 1:]
        src.append(i)
        dst.append(pos_lo[beta])
        fac.append(float(e))
    return (np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
            np.array(fac))


class Jet:
    """Truncated Taylor polynomial in `dim` variables through total degree `order`."""

    __slots__ = ("dim", "order", "parts")

    def __init__(self, dim: int, order: int, parts=None):
        if not 1 <= dim <= MAX_DIM:
            raise DomainError(f"jet dimension must be in 1..{MAX_DIM}, got {dim}")
        if order < 0:
            raise DomainError(f"jet order must be non-negative, got {order}")
        self.dim = dim
        self.order = order
        if parts is None:
            parts = [np.zeros(block_size(dim, d)) for d in range(order + 1)]
        else:
            parts = [np.asarray(p, dtype=float) for p in parts]
            if len(parts) != order + 1 or any(
                    p.shape != (block_size(dim, d),) for d, p in enumerate(parts)):
                raise StructureError("coefficient blocks do not match dim/order")
        for p in parts:
            p.flags.writeable = False
        self.parts = tuple(parts)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim: int, order: int) -> "Jet":
        return cls(dim, order)

    @classmethod
    def constant(cls, value: float, dim: int, order: int) -> "Jet":
        parts = [np.zeros(block_size(dim, d)) for d in range(order + 1)]
        parts[0][0] = value
        return cls(dim, order, parts)

    @classmethod
    def coordinate(cls, i: int, dim: int, order: int) -> "Jet":
        """The coordinate function z_i (0-based index)."""
        if not 0 <= i < dim:
            raise DomainError(f"coordinate index {i} out of range for dim {dim}")
        if order < 1:
            raise DomainError("coordinate jet needs order >= 1")
        parts = [np.zeros(block_size(dim, d)) for d in range(order + 1)]
        alpha = tuple(1 if j == i else 0 for j in range(dim))
        parts[1][monomial_position(dim, 1)[alpha]] = 1.0
        return cls(dim, order, parts)

    @classmethod
    def from_terms(cls, dim: int, order: int, terms: dict) -> "Jet":
        """Build from a {multi-index tuple: coefficient} mapping."""
        parts = [np.zeros(block_size(dim, d)) for d in range(order + 1)]
        for alpha, c in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or any(a < 0 for a in alpha):
                raise StructureError(f"bad multi-index {alpha} for dim {dim}")
            d = sum(alpha)
            if d > order:
                raise StructureError(f"multi-index {alpha} exceeds order {order}")
            parts[d][monomial_position(dim, d)[alpha]] += float(c)
        return cls(dim, order, parts)

    # -- accessors ---------------------------------------------------------

    def coeff(self, alpha) -> float:
        """Coefficient of the monomial with exponents `alpha`; absent terms are 0."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim:
            raise StructureError(f"multi-index length {len(alpha)} != dim {self.dim}")
        d = sum(alpha)
        if d > self.order:
            return 0.0
        return float(self.parts[d][monomial_position(self.dim, d)[alpha]])

    def terms(self):
        """Yield (alpha, coefficient) for the non-zero terms, graded-lex order."""
        for d, block in enumerate(self.parts):
            for alpha, c in zip(monomials(self.dim, d), block):
                if c != 0.0:
                    yield alpha, float(c)

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(p))) if p.size else 0.0) for p in self.parts)

    def is_zero(self) -> bool:
        return all(not p.any() for p in self.parts)

    # -- algebra -----------------------------------------------------------

    def _check_compatible(self, other: "Jet"):
        if self.dim != other.dim or self.order != other.order:
            raise StructureError(
                f"jet mismatch: dim/order ({self.dim},{self.order}) vs "
                f"({other.dim},{other.order})")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Jet.constant(float(other), self.dim, self.order)
        self._check_compatible(other)
        return Jet(self.dim, self.order,
                   [a + b for a, b in zip(self.parts, other.parts)])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.dim, self.order, [-p for p in self.parts])

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Jet.constant(float(other), self.dim, self.order)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Jet(self.dim, self.order, [float(other) * p for p in self.parts])
        return jet_mul(self, other)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        return (self.dim == other.dim and self.order == other.order and
                all(np.array_equal(a, b) for a, b in zip(self.parts, other.parts)))

    __hash__ = None

    def __repr__(self):
        body = " + ".join(f"{c:g}*z^{alpha}" for alpha, c in self.terms()) or "0"
        return f"Jet(dim={self.dim}, order={self.order}: {body})"

    # -- calculus ----------------------------------------------------------

    def diff(self, i: int) -> "Jet":
        return jet_diff(self, i)

    def homogeneous_part(self, j: int) -> "Jet":
        return homogeneous_part(self, j)

    def truncate(self, order: int) -> "Jet":
        """Copy truncated (or zero-padded) to the given order."""
        parts = [self.parts[d] if d <= self.order else
                 np.zeros(block_size(self.dim, d)) for d in range(order + 1)]
        return Jet(self.dim, order, parts)

    def lowest_degree(self):
        """Smallest degree with a non-zero block, or None for the zero jet."""
        for d, p in enumerate(self.parts):
            if p.any():
                return d
        return None

    def __call__(self, point):
        return jet_eval(self, point)


def jet_add(a: Jet, b: Jet) -> Jet:
    """Coefficient-wise sum; dim and order must match."""
    return a + b


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Cauchy product truncated to total degree <= order."""
    a._check_compatible(b)
    parts = [np.zeros(block_size(a.dim, d)) for d in range(a.order + 1)]
    for d1, pa in enumerate(a.parts):
        if not pa.any():
            continue
        for d2 in range(a.order - d1 + 1):
            pb = b.parts[d2]
            if not pb.any():
                continue
            np.add.at(parts[d1 + d2], _product_table(a.dim, d1, d2),
                      np.multiply.outer(pa, pb))
    return Jet(a.dim, a.order, parts)


def jet_diff(a: Jet, i: int) -> Jet:
    """Formal partial derivative d/dz_i (0-based); stored order is kept."""
    if not 0 <= i < a.dim:
        raise DomainError(f"variable index {i} out of range for dim {a.dim}")
    parts = [np.zeros(block_size(a.dim, d)) for d in range(a.order + 1)]
    for d in range(1, a.order + 1):
        src, dst, fac = _diff_table(a.dim, d, i)
        if src.size:
            np.add.at(parts[d - 1], dst, fac * a.parts[d][src])
    return Jet(a.dim, a.order, parts)


def homogeneous_part(a: Jet, j: int) -> Jet:
    """Restriction of the coefficient table to total degree exactly j."""
    if not 0 <= j <= a.order:
        raise DomainError(f"degree {j} outside 0..{a.order}")
    parts = [a.parts[d] if d == j else np.zeros(block_size(a.dim, d))
             for d in range(a.order + 1)]
    return Jet(a.dim, a.order, parts)


def jet_compose(f: Jet, g) -> Jet:
    """Taylor expansion of f(g_1, ..., g_m) truncated at the g's order.

    Every ``g_i`` must share dim and order and have a vanishing constant
    term (composition is taken at the base point).
    """
    gs = list(g)
    if len(gs) != f.dim:
        raise StructureError(f"need {f.dim} inner jets, got {len(gs)}")
    dim, order = gs[0].dim, gs[0].order
    for gi in gs:
        if gi.dim != dim or gi.order != order:
            raise StructureError("inner jets disagree on dim/order")
        if gi.parts[0][0] != 0.0:
            raise DomainError("inner jet has non-zero constant term "
                              "(base-point mismatch)")
    out = Jet.constant(float(f.parts[0][0]), dim, order)
    powers = [[Jet.constant(1.0, dim, order), gi] for gi in gs]

    def power(i, e):
        while len(powers[i]) <= e:
            powers[i].append(jet_mul(powers[i][-1], powers[i][1]))
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
                term = power(i, e) if term is None else jet_mul(term, power(i, e))
            out = out + c * term
    return out


def jet_eval(a: Jet, point) -> float:
    """Evaluate the polynomial at a point (array of length dim)."""
    z = np.asarray(point, dtype=float)
    if z.shape != (a.dim,):
        raise StructureError(f"point shape {z.shape} != ({a.dim},)")
    total = 0.0
    for d, block in enumerate(a.parts):
        if not block.any():
            continue
        mono = monomials(a.dim, d)
        vals = np.array([np.prod(z ** np.array(alpha)) for alpha in mono])
        total += float(block @ vals)
    return total


def jet_eval_many(a: Jet, points: np.ndarray) -> np.ndarray:
    """Vectorized evaluation; `points` has shape (npts, dim)."""
    z = np.asarray(points, dtype=float)
    if z.ndim != 2 or z.shape[1] != a.dim:
        raise StructureError(f"points shape {z.shape} incompatible with dim {a.dim}")
    total = np.zeros(z.shape[0])
    for d, block in enumerate(a.parts):
        if not block.any():
            continue
        for pos, alpha in enumerate(monomials(a.dim, d)):
            c = block[pos]
            if c == 0.0:
                continue
            term = np.full(z.shape[0], c)
            for i, e in enumerate(alpha):
                if e:
                    term *= z[:, i] ** e
            total += term
    return total


class VectorJet:
    """Ordered tuple of jets sharing dim and order (a polynomial map)."""

    __slots__ = ("components",)

    def __init__(self, components):
        comps = tuple(components)
        if not comps:
            raise StructureError("VectorJet needs at least one component")
        dim, order = comps[0].dim, comps[0].order
        for c in comps:
            if c.dim != dim or c.order != order:
                raise StructureError("VectorJet components disagree on dim/order")
        self.components = comps

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def order(self):
        return self.components[0].order

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __eq__(self, other):
        if not isinstance(other, VectorJet):
            return NotImplemented
        return self.components == other.components

    __hash__ = None

    def max_abs(self):
        return max(c.max_abs() for c in self.components)

    def eval(self, point) -> np.ndarray:
        return np.array([jet_eval(c, point) for c in self.components])

    def eval_many(self, points) -> np.ndarray:
        return np.stack([jet_eval_many(c, points) for c in self.components], axis=-1)

    def __repr__(self):
        return f"VectorJet({list(self.components)!r})"


# -- serialization ----------------------------------------------------------

def jet_to_json(a: Jet) -> dict:
    """{"dim": d, "order": N, "terms": [{"alpha": [...], "c": v}, ...]}."""
    return {"dim": a.dim, "order": a.order,
            "terms": [{"alpha": list(alpha), "c": c} for alpha, c in a.terms()]}


def jet_from_json(obj: dict) -> Jet:
    return Jet.from_terms(int(obj["dim"]), int(obj["order"]),
                          {tuple(t["alpha"]): float(t["c"]) for t in obj["terms"]})

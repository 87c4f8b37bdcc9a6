import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degentrace.errors import DomainError, StructureError
from degentrace.jets import (Jet, VectorJet, block_size, homogeneous_part,
                             jet_add, jet_compose, jet_diff, jet_eval,
                             jet_from_json, jet_mul, jet_to_json, monomials)


def j1(order, terms):
    return Jet.from_terms(1, order, terms)


def j2(order, terms):
    return Jet.from_terms(2, order, terms)


# -- spec examples -----------------------------------------------------------

def test_add_cancellation():
    a = j1(2, {(0,): 1.0, (1,): 1.0})
    b = j1(2, {(0,): 1.0, (1,): -1.0})
    assert jet_add(a, b) == Jet.constant(2.0, 1, 2)


def test_add_identity():
    a = j1(3, {(1,): 2.0, (3,): -0.5})
    assert jet_add(a, Jet.zero(1, 3)) == a


def test_add_same_monomial():
    assert jet_add(j1(2, {(2,): 1.0}), j1(2, {(2,): 2.0})) == j1(2, {(2,): 3.0})


def test_mul_binomial():
    a = j1(2, {(0,): 1.0, (1,): 1.0})
    assert jet_mul(a, a) == j1(2, {(0,): 1.0, (1,): 2.0, (2,): 1.0})


def test_mul_truncates():
    x = j1(1, {(1,): 1.0})
    assert jet_mul(x, x) == Jet.zero(1, 1)


def test_mul_conjugate_pair():
    xi_plus = j2(2, {(1, 0): 1.0, (0, 1): 1.0})
    xi_minus = j2(2, {(1, 0): 1.0, (0, 1): -1.0})
    assert jet_mul(xi_plus, xi_minus) == j2(2, {(2, 0): 1.0, (0, 2): -1.0})


def test_compose_square():
    f = j1(3, {(2,): 1.0})                      # f(y) = y^2
    g = j1(3, {(1,): 1.0, (2,): 1.0})           # g(x) = x + x^2
    assert jet_compose(f, [g]) == j1(3, {(2,): 1.0, (3,): 2.0})


def test_compose_identity():
    gs = [Jet.coordinate(i, 2, 4) * (1.0 + i) for i in range(2)]
    for i in range(2):
        f = Jet.coordinate(i, 2, 4)
        assert jet_compose(f, gs) == gs[i]


def test_compose_product():
    f = j2(3, {(1, 1): 1.0})                    # f(y1, y2) = y1*y2
    g = [j1(3, {(1,): 1.0}), j1(3, {(2,): 1.0})]
    assert jet_compose(f, g) == j1(3, {(3,): 1.0})


def test_compose_rejects_nonzero_constant():
    f = j1(2, {(1,): 1.0})
    with pytest.raises(DomainError):
        jet_compose(f, [j1(2, {(0,): 1.0, (1,): 1.0})])


def test_diff_examples():
    a = j2(3, {(2, 1): 1.0})                    # x^2 xi
    assert jet_diff(a, 0) == j2(3, {(1, 1): 2.0})
    assert jet_diff(j2(2, {(2, 0): 1.0}), 1) == Jet.zero(2, 2)
    q = j2(4, {(2, 0): 1.0, (0, 2): 1.0})
    q2 = jet_mul(q, q)
    # d/dx (x^2 + xi^2)^2 = 4x(x^2 + xi^2)
    assert jet_diff(q2, 0) == 4.0 * jet_mul(Jet.coordinate(0, 2, 4), q)


def test_homogeneous_part_examples():
    q = j2(4, {(2, 0): 1.0, (0, 2): 1.0})
    q2 = jet_mul(q, q)
    assert homogeneous_part(q2, 4) == q2
    assert homogeneous_part(j1(3, {(0,): 1.0, (3,): 1.0}), 2) == Jet.zero(1, 3)
    a = j2(5, {(4, 0): 1.0, (0, 4): 1.0, (5, 0): 1.0})
    assert homogeneous_part(a, 4) == j2(5, {(4, 0): 1.0, (0, 4): 1.0})


def test_structural_errors():
    with pytest.raises(StructureError):
        jet_add(Jet.zero(1, 2), Jet.zero(2, 2))
    with pytest.raises(StructureError):
        jet_mul(Jet.zero(1, 2), Jet.zero(1, 3))
    with pytest.raises(DomainError):
        jet_diff(Jet.zero(2, 2), 5)


# -- random jets -------------------------------------------------------------

def random_jet(rng, dim, order, zero_constant=False):
    parts = [rng.uniform(-1.0, 1.0, size=block_size(dim, d))
             for d in range(order + 1)]
    if zero_constant:
        parts[0][:] = 0.0
    return Jet(dim, order, parts)


@st.composite
def jets(draw, dim=2, order=4, zero_constant=False):
    # dyadic coefficients in [-1, 1] keep every product and partial sum exact
    # in double precision, so the ring laws can be asserted with ==
    coeff = st.integers(min_value=-64, max_value=64).map(lambda k: k / 64.0)
    parts = []
    for d in range(order + 1):
        n = block_size(dim, d)
        parts.append(draw(st.lists(coeff, min_size=n, max_size=n)))
    if zero_constant:
        parts[0] = [0.0]
    return Jet(dim, order, parts)


@settings(max_examples=30, deadline=None)
@given(jets(), jets(), jets())
def test_ring_laws(a, b, c):
    assert jet_add(a, b) == jet_add(b, a)
    assert jet_mul(a, b) == jet_mul(b, a)
    assert jet_add(jet_add(a, b), c) == jet_add(a, jet_add(b, c))
    assert jet_mul(jet_mul(a, b), c) == jet_mul(a, jet_mul(b, c))
    assert jet_mul(a, jet_add(b, c)) == jet_add(jet_mul(a, b), jet_mul(a, c))


@settings(max_examples=20, deadline=None)
@given(jets(dim=2, order=4), jets(dim=2, order=4, zero_constant=True),
       jets(dim=2, order=4, zero_constant=True))
def test_chain_rule(f, g0, g1):
    g = [g0, g1]
    for i in range(2):
        lhs = jet_diff(jet_compose(f, g), i)
        rhs = Jet.zero(2, 4)
        for m in range(2):
            rhs = rhs + jet_mul(jet_compose(jet_diff(f, m), g), jet_diff(g[m], i))
        # lhs is exact only through order-1 (the top degree loses information
        # to truncation before differentiation), so compare up to order-1
        diff = lhs - rhs
        for d in range(4):
            assert homogeneous_part(diff, d).max_abs() < 1e-12


@settings(max_examples=40, deadline=None)
@given(jets(dim=2, order=5))
def test_homogeneous_parts_sum(a):
    total = Jet.zero(2, 5)
    for d in range(6):
        total = total + homogeneous_part(a, d)
    assert total == a


def test_eval_matches_numpy_polynomial():
    rng = np.random.default_rng(7)
    a = random_jet(rng, 2, 5)
    z = np.array([0.3, -0.2])
    direct = sum(c * z[0] ** al[0] * z[1] ** al[1] for al, c in a.terms())
    assert jet_eval(a, z) == pytest.approx(direct, rel=1e-14)


# -- vector jets and serialization -------------------------------------------

def test_vector_jet_validation():
    with pytest.raises(StructureError):
        VectorJet([Jet.zero(2, 3), Jet.zero(2, 2)])
    v = VectorJet([Jet.coordinate(0, 2, 3), Jet.coordinate(1, 2, 3)])
    assert v.eval([0.5, 2.0]) == pytest.approx([0.5, 2.0])


def test_json_round_trip_and_order():
    rng = np.random.default_rng(11)
    a = random_jet(rng, 2, 4)
    obj = jet_to_json(a)
    assert jet_from_json(obj) == a
    # graded-lex term order makes the serialization canonical
    alphas = [tuple(t["alpha"]) for t in obj["terms"]]
    keyed = sorted(alphas, key=lambda al: (sum(al), tuple(-x for x in al)))
    assert alphas == keyed
    json.dumps(obj)  # must be JSON-serializable as-is


def test_monomial_order_is_graded_lex():
    assert monomials(2, 2) == ((2, 0), (1, 1), (0, 2))
    assert monomials(3, 1) == ((1, 0, 0), (0, 1, 0), (0, 0, 1))

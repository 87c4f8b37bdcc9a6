import numpy as np
import pytest

from degentrace.errors import ConvergenceError, DomainError, StructureError
from degentrace.jets import Jet
from degentrace.spectrum import (OperatorModel, closed_form_spectrum,
                                 eigenvalues_sym, ladder_matrices,
                                 oscillator_weyl_correction, spectrum,
                                 weyl_quantize)
from degentrace.symbols import make_symbol, sphere_integral


def aniso_model():
    sym = make_symbol(1, 0.0, [Jet.from_terms(2, 4, {(4, 0): 1.0, (0, 4): 1.0})])
    return OperatorModel.poly_symbol(sym)


# -- closed-form spectra ---------------------------------------------------------

def test_osc2_window():
    model = OperatorModel.osc_power(2)
    res = closed_form_spectrum(model, 0.1, (0.0, 1.0))
    assert res.eigenvalues == pytest.approx([0.01, 0.09, 0.25, 0.49, 0.81])
    assert res.converged and res.count == 5


def test_osc2_negative_sign():
    model = OperatorModel.osc_power(2, sign=-1.0)
    res = closed_form_spectrum(model, 0.1, (-1.0, 0.0))
    assert res.eigenvalues == pytest.approx([-0.81, -0.49, -0.25, -0.09, -0.01])


def test_osc3_window():
    model = OperatorModel.osc_power(3)
    res = closed_form_spectrum(model, 0.1, (0.0, 1.0))
    assert res.eigenvalues == pytest.approx([0.001, 0.027, 0.125, 0.343, 0.729])


def test_empty_window_is_not_an_error():
    model = OperatorModel.osc_power(2)
    res = closed_form_spectrum(model, 0.1, (0.3, 0.4))
    assert res.count == 0


def test_osc2_counting():
    model = OperatorModel.osc_power(2)
    res = closed_form_spectrum(model, 1e-3, (0.0, 0.5))
    assert res.count == 354          # odd integers below sqrt(0.5)/h


def test_n2_multiplicities():
    model = OperatorModel.osc_power(2, n=2)
    res = closed_form_spectrum(model, 0.1, (0.0, 1.0))
    # levels (h*(2s+2))^2 with multiplicity s+1; 1.0 sits on the window edge
    assert res.eigenvalues == pytest.approx([0.04, 0.16, 0.36, 0.64, 1.0])
    assert list(res.multiplicities) == [1, 2, 3, 4, 5]


def test_p1_shift_moves_everything():
    base = closed_form_spectrum(OperatorModel.osc_power(2), 0.1, (0.0, 1.0))
    shifted = closed_form_spectrum(OperatorModel.osc_power(2, p1_shift=0.3),
                                   0.1, (0.0, 1.0))
    common = min(len(base.eigenvalues), len(shifted.eigenvalues))
    assert shifted.eigenvalues[:common] == pytest.approx(
        base.eigenvalues[:common] + 0.03)


# -- ladder matrices --------------------------------------------------------------

def test_ladder_small():
    X, P = ladder_matrices(2, 1.0)
    assert X == pytest.approx(np.array([[0.0, np.sqrt(0.5)], [np.sqrt(0.5), 0.0]]))
    assert P[0, 1] == pytest.approx(-1j * np.sqrt(0.5))
    assert P[1, 0] == pytest.approx(1j * np.sqrt(0.5))


def test_oscillator_identity_interior():
    h = 0.3
    N = 12
    X, P = ladder_matrices(N, h)
    H = X @ X + (P @ P).real
    expect = h * (2 * np.arange(N) + 1)
    assert H[: N - 1, : N - 1] == pytest.approx(np.diag(expect[: N - 1]))


def test_canonical_commutator_interior():
    h = 0.7
    N = 10
    X, P = ladder_matrices(N, h)
    C = X @ P - P @ X
    interior = C[: N - 1, : N - 1]
    assert interior == pytest.approx(1j * h * np.eye(N - 1))


# -- Weyl quantization -------------------------------------------------------------

def test_quantized_oscillator_eigenvalues():
    M = weyl_quantize([(2, 0, 1.0), (0, 2, 1.0)], 6, 1.0)
    vals = eigenvalues_sym(M)
    # interior eigenvalues are exact; the top one is corrupted by truncation
    stable = [v for v in vals if any(abs(v - e) < 1e-9 for e in (1, 3, 5, 7, 9))]
    assert sorted(set(np.round(stable, 9))) == [1.0, 3.0, 5.0, 7.0, 9.0]


def test_mccoy_symmetrization_xxi():
    N = 8
    X, P = ladder_matrices(N, 0.5)
    M = weyl_quantize([(1, 1, 1.0)], N, 0.5)
    assert M == pytest.approx(0.5 * (X @ P + P @ X))


def test_mccoy_orderings_agree_in_interior():
    # x-based and p-based symmetrizations coincide where truncation is invisible
    from math import comb
    N = 24
    h = 0.37
    a, b = 3, 2
    X, P = ladder_matrices(N, h)
    xp = {e: np.linalg.matrix_power(X.astype(complex), e) for e in range(a + 1)}
    pp = {e: np.linalg.matrix_power(P, e) for e in range(b + 1)}
    m1 = sum(comb(a, s) * xp[s] @ pp[b] @ xp[a - s] for s in range(a + 1)) / 2 ** a
    m2 = sum(comb(b, t) * pp[t] @ xp[a] @ pp[b - t] for t in range(b + 1)) / 2 ** b
    cut = N - (a + b)
    assert np.max(np.abs((m1 - m2)[:cut, :cut])) < 1e-12


def test_weyl_linearity():
    N = 16
    h = 0.2
    m1 = weyl_quantize([(4, 0, 1.0)], N, h)
    m2 = weyl_quantize([(0, 4, 1.0)], N, h)
    m12 = weyl_quantize([(4, 0, 1.0), (0, 4, 1.0)], N, h)
    assert np.array_equal(m12, m1 + m2)


def test_moyal_correction_power2():
    h = 0.1
    N = 60
    M = weyl_quantize([(4, 0, 1.0), (2, 2, 2.0), (0, 4, 1.0)], N, h)
    vals = eigenvalues_sym(M)
    base = h * (2 * np.arange(N) + 1)
    expect = oscillator_weyl_correction(2, h, base)
    assert vals[:20] == pytest.approx(expect[:20], abs=1e-10)


def test_moyal_correction_power3():
    h = 0.1
    N = 80
    monos = [(6, 0, 1.0), (4, 2, 3.0), (2, 4, 3.0), (0, 6, 1.0)]
    vals = eigenvalues_sym(weyl_quantize(monos, N, h))
    base = h * (2 * np.arange(N) + 1)
    expect = oscillator_weyl_correction(3, h, base)
    assert vals[:20] == pytest.approx(expect[:20], abs=1e-9)


def test_eigenvalues_sym_examples():
    assert eigenvalues_sym(np.diag([3.0, 1.0, 2.0])) == pytest.approx([1, 2, 3])
    assert eigenvalues_sym(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx([-1, 1])
    rng = np.random.default_rng(5)
    A = rng.normal(size=(50, 50))
    A = 0.5 * (A + A.T)
    vals = eigenvalues_sym(A)
    assert vals.sum() == pytest.approx(np.trace(A), abs=1e-9)
    with pytest.raises(StructureError):
        eigenvalues_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))


# -- dispatcher ---------------------------------------------------------------------

def test_spectrum_dispatch_closed_form():
    res = spectrum(OperatorModel.osc_power(2), 1e-3, eps=0.5)
    assert res.count == 354 and res.converged


def test_quantized_aniso_self_convergence():
    res = spectrum(aniso_model(), 0.05, eps=0.5)
    assert res.converged
    res2 = spectrum(aniso_model(), 0.05, eps=0.5, basis_N=2 * res.basis_N)
    assert len(res.eigenvalues) == len(res2.eigenvalues)
    assert np.max(np.abs(res.eigenvalues - res2.eigenvalues)) < 1e-9


def test_quantized_radial_matches_closed_form():
    # quantizing (x^2+xi^2)^2 equals the closed form plus the h^2 star correction
    h = 0.05
    sym = make_symbol(1, 0.0, [Jet.from_terms(
        2, 4, {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0})])
    res = spectrum(OperatorModel.poly_symbol(sym), h, eps=0.5)
    oracle = closed_form_spectrum(OperatorModel.osc_power(2), h,
                                  (0.0, 0.5)).eigenvalues
    got = res.eigenvalues - h ** 2
    got = got[got >= -1e-12]
    assert len(got) >= len(oracle)
    assert got[: len(oracle)] == pytest.approx(oracle, abs=1e-9)


def test_quantized_p1_shift():
    h = 0.05
    base = spectrum(aniso_model(), h, eps=0.5)
    sym = make_symbol(1, 0.0, [Jet.from_terms(2, 4, {(4, 0): 1.0, (0, 4): 1.0})])
    shifted = spectrum(OperatorModel.poly_symbol(sym, p1_shift=0.3), h, eps=0.5)
    m = min(len(base.eigenvalues), len(shifted.eigenvalues))
    assert shifted.eigenvalues[:m] == pytest.approx(
        base.eigenvalues[:m] + 0.3 * h, abs=1e-9)


def test_parity_block_structure():
    h = 0.05
    M = weyl_quantize(aniso_model().symbol, 128, h)
    # even symbols cannot couple even and odd Hermite indices
    assert np.max(np.abs(M[::2, 1::2])) == 0.0
    full = eigenvalues_sym(M)
    split = np.sort(np.concatenate([
        eigenvalues_sym(M[::2, ::2]), eigenvalues_sym(M[1::2, 1::2])]))
    window = (full >= -0.5) & (full <= 0.5)
    assert np.max(np.abs(full[window] - split[window])) < 1e-10


def test_weyl_law_count():
    # windowed count approaches vol(p0 <= eps) / (2 pi h), with
    # vol = eps^(2n/k) * sphere_integral / (2n)
    eps = 0.5
    model = aniso_model()
    vol = eps ** 0.5 * sphere_integral(model.symbol, 1e-9) / 2.0
    h = 0.01
    res = spectrum(model, h, eps=eps)
    predicted = vol / (2.0 * np.pi * h)
    assert res.count == pytest.approx(predicted, rel=0.1)


def test_maximum_polysymbol_negation():
    h = 0.05
    sym_min = make_symbol(1, 0.0, [Jet.from_terms(2, 4, {(4, 0): 1.0, (0, 4): 1.0})])
    sym_max = make_symbol(1, 0.0, [Jet.from_terms(2, 4, {(4, 0): -1.0, (0, 4): -1.0})])
    res_min = spectrum(OperatorModel.poly_symbol(sym_min), h, eps=0.5)
    res_max = spectrum(OperatorModel.poly_symbol(sym_max), h, eps=0.5)
    assert res_max.eigenvalues == pytest.approx(-res_min.eigenvalues[::-1])


def test_unconverged_raises():
    with pytest.raises(ConvergenceError):
        spectrum(aniso_model(), 2e-4, eps=0.5)


def test_model_validation():
    with pytest.raises(DomainError):
        OperatorModel.osc_power(1)
    with pytest.raises(DomainError):
        OperatorModel.osc_power(2, n=3)
    sym2 = make_symbol(2, 0.0, [Jet.from_terms(
        4, 4, {(4, 0, 0, 0): 1.0, (0, 4, 0, 0): 1.0,
               (0, 0, 4, 0): 1.0, (0, 0, 0, 4): 1.0,
               (2, 2, 0, 0): 2.0, (0, 0, 2, 2): 2.0})])
    with pytest.raises(DomainError):
        OperatorModel.poly_symbol(sym2)

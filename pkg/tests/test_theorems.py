import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian_expectation
from gaugeglass.errors import ConfigurationError
from gaugeglass.model import BondGraph, ModelSpec, NishimoriParams, coupling_arrays, gibbs_batch
from gaugeglass.quench import MonteCarlo, Quadrature
from gaugeglass.theorems import (
    ASSEMBLIES,
    cs_auxiliary_matrix,
    first_stencil,
    four_squares,
    hessian_agreement,
    hessian_psd,
    second_stencil,
    thm1_check,
    thm1_checks,
    thm2_check,
    thm2_checks,
)


@pytest.mark.parametrize("x0", [0.0, 0.5])
def test_stencils_are_exact_on_low_order_polynomials(x0):
    h = 1e-2
    coeffs = np.array([0.3, -1.1, 0.7, 2.0, -0.4])  # quartic
    f = np.polynomial.Polynomial(coeffs)
    d1 = sum(w * f(x0 + o) for o, w in first_stencil(x0, h))
    d2 = sum(w * f(x0 + o) for o, w in second_stencil(x0, h))
    if x0 == 0.0:  # fourth-order forward rules: exact up to degree 4
        assert d1 == pytest.approx(f.deriv()(x0), abs=1e-9)
        assert d2 == pytest.approx(f.deriv(2)(x0), abs=1e-7)
    else:  # central rules: truncation O(h^2)
        assert d1 == pytest.approx(f.deriv()(x0), abs=5e-4)
        assert d2 == pytest.approx(f.deriv(2)(x0), abs=5e-4)


def _ising_first_derivative_oracle(x):
    # d/dx E log cosh(sqrt(x) z + x), differentiated under the integral
    return gaussian_expectation(lambda z: math.tanh(math.sqrt(x) * z + x) * (z / (2 * math.sqrt(x)) + 1.0))


@pytest.mark.parametrize("x", [0.25, 1.0, 4.0])
def test_thm1_ising_against_differentiated_integral(ising_bond, x):
    rep = thm1_check(ising_bond, NishimoriParams.uniform(ising_bond, x), ising_bond.slots[0], Quadrature(128))
    assert rep.passed, rep.to_dict()
    assert rep.analytic.value == pytest.approx(_ising_first_derivative_oracle(x), abs=1e-10)
    assert 0.0 <= rep.analytic.value <= 1.0


@pytest.mark.parametrize("q", [2, 3, 4])
@pytest.mark.parametrize("x", [0.0, 0.25, 1.0, 4.0])
def test_thm1_single_bond(q, x):
    model = ModelSpec.build(q, BondGraph.chain(2))
    rep = thm1_check(model, NishimoriParams.uniform(model, x), model.slots[0], Quadrature(128))
    assert rep.passed, rep.to_dict()
    if x == 0.0:
        assert rep.notes
        # no coupling: <cos> averages to 0 over Z_q, so dP/dx = 1/2
        assert rep.analytic.value == pytest.approx(0.5, abs=1e-14)


def test_thm1_chain_all_slots(z3_chain):
    params = NishimoriParams.from_vector(z3_chain, [0.4, 1.0])
    for rep in thm1_checks(z3_chain, params, z3_chain.slots):
        assert rep.passed, rep.to_dict()


@pytest.mark.parametrize("x", [0.25, 1.0])
def test_thm2_ising_single_bond(ising_bond, x):
    s = ising_bond.slots[0]
    rep = thm2_check(ising_bond, NishimoriParams.uniform(ising_bond, x), s, s, Quadrature(128))
    assert rep.passed, rep.to_dict()
    # four squares reduce to E sech^4; compare with the x-derivative of E tanh
    sech4 = gaussian_expectation(lambda z: 1.0 / math.cosh(math.sqrt(x) * z + x) ** 4)
    slope = gaussian_expectation(lambda z: (z / (2 * math.sqrt(x)) + 1.0) / math.cosh(math.sqrt(x) * z + x) ** 2)
    assert sech4 == pytest.approx(slope, abs=1e-12)
    assert rep.analytic.value == pytest.approx(sech4, abs=1e-10)


def test_thm2_mixed_slots_and_boundary():
    model = ModelSpec.build(3, BondGraph.chain(2), harmonics=(1, 2))
    a, b = model.slots
    for x in ([0.7, 0.4], [0.0, 0.5]):
        params = NishimoriParams.from_vector(model, x)
        for rep in thm2_checks(model, params, [(a, b), (b, a), (a, a)], Quadrature()):
            assert rep.passed, rep.to_dict()
            assert rep.analytic.value >= 0


def test_thm2_monte_carlo_uses_error_bars(ising_bond):
    s = ising_bond.slots[0]
    rep = thm2_check(ising_bond, NishimoriParams.uniform(ising_bond, 1.0), s, s, MonteCarlo(20_000, seed=5))
    assert rep.tolerance >= 3 * rep.difference.std_error
    assert rep.passed, rep.to_dict()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), q=st.sampled_from([2, 3, 5]))
def test_four_squares_nonnegative_and_cs_matrix_matches(seed, q):
    rng = np.random.default_rng(seed)
    model = ModelSpec.build(q, BondGraph.ring(3, one_body_sites=(0,)), one_body_harmonics=(1,))
    params = NishimoriParams.from_vector(model, rng.uniform(0, 3, len(model.slots)))
    amp, mean = coupling_arrays(model, params)
    j, k = rng.standard_normal((2, 8, len(model.slots)))
    batch = gibbs_batch(model, amp, mean, j, k)
    cs = cs_auxiliary_matrix(batch, model.slots)
    for ia, a in enumerate(model.slots):
        for ib, b in enumerate(model.slots):
            fs = four_squares(batch, a, b)
            assert np.all(fs >= 0)
            np.testing.assert_allclose(cs[:, ia, ib], fs, atol=1e-13)
    # each realization's matrix is a Gram matrix
    assert np.all(np.linalg.eigvalsh(cs) >= -1e-12)


def test_hessian_three_ways(z3_chain):
    params = NishimoriParams.from_vector(z3_chain, [0.5, 1.2])
    reps = [hessian_psd(z3_chain, params, Quadrature(32), a) for a in ASSEMBLIES]
    for r in reps:
        assert r.passed, r.to_dict()
        np.testing.assert_array_equal(r.matrix, r.matrix.T)
    for row in hessian_agreement(reps):
        assert row["verdict"] == "pass", row
    np.testing.assert_allclose(reps[0].matrix, reps[1].matrix, atol=1e-14)


def test_hessian_dimension_limit():
    model = ModelSpec.build(2, BondGraph.complete(6))
    with pytest.raises(ConfigurationError):
        hessian_psd(model, NishimoriParams.uniform(model, 1.0))
    bond = ModelSpec.build(2, BondGraph.chain(2))
    with pytest.raises(ConfigurationError):
        hessian_psd(bond, NishimoriParams.uniform(bond, 1.0), assembly="lanczos")

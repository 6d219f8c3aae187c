from fractions import Fraction
from math import comb, factorial, prod

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boserdm.errors import InvalidStateError, SectorMismatchError
from boserdm.fock_sector import enumerate_sector
from boserdm.second_quant import SectorOperator, expectation_m_particle
from boserdm.subsystem import (
    DensityMatrix,
    ProductStateAmplitudes,
    naive_tensor_trace_check,
    partial_trace,
    partial_trace_map,
    product_state_density,
    product_state_vector,
    project_to_sector,
    random_density_matrix,
    random_hermitian,
    trace_distance,
)
from oracles import dense_partial_trace_tensor, tuple_matrix_elements

seeds = st.integers(0, 2**32 - 1)


def test_fock_state_reduces_to_half_identity():
    b = enumerate_sector(2, 2)
    m = np.zeros((3, 3))
    m[1, 1] = 1
    r1 = partial_trace(DensityMatrix(b, m), 1)
    assert np.allclose(r1.matrix, 0.5 * np.eye(2))


@pytest.mark.parametrize("m", [1, 2])
def test_partial_trace_against_operator_string_oracle(m, rng):
    b = enumerate_sector(3, 3)
    rho = random_density_matrix(b, rng)
    sub = enumerate_sector(3, m)
    mine = tuple_matrix_elements(partial_trace(rho, m).matrix, sub.states, 3, m)
    ref = dense_partial_trace_tensor(rho.matrix, b.states, 3, m)
    assert np.max(np.abs(mine - ref)) < 1e-13


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([(2, 3), (3, 3), (3, 4), (4, 2)]))
def test_partial_trace_is_a_state(seed, dn):
    rng = np.random.default_rng(seed)
    d, n = dn
    rho = random_density_matrix(enumerate_sector(d, n), rng, rank=int(rng.integers(1, 4)))
    for m in range(1, n + 1):
        r = partial_trace(rho, m)
        assert abs(r.trace() - 1) < 1e-10
        assert r.min_eigenvalue() > -1e-10
        assert np.max(np.abs(r.matrix - r.matrix.conj().T)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_nesting(seed):
    rng = np.random.default_rng(seed)
    b = enumerate_sector(3, 4)
    rho = random_density_matrix(b, rng)
    r2 = partial_trace(rho, 2)
    assert np.max(np.abs(partial_trace(r2, 1).matrix - partial_trace(rho, 1).matrix)) < 1e-11
    r3 = partial_trace(rho, 3)
    assert np.max(np.abs(partial_trace(r3, 2).matrix - r2.matrix)) < 1e-11


def test_endpoints(rng):
    b = enumerate_sector(3, 2)
    rho = random_density_matrix(b, rng)
    assert np.allclose(partial_trace_map(rho.matrix, b, 2), rho.matrix)
    assert partial_trace_map(rho.matrix, b, 0) == pytest.approx(np.array([[1.0]]))
    with pytest.raises(ValueError):
        partial_trace(rho, 3)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 3))
def test_expectation_factor(seed, m):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(enumerate_sector(3, 3), rng)
    sub = enumerate_sector(3, m)
    a = SectorOperator(sub, random_hermitian(sub.dim, rng))
    lhs = expectation_m_particle(rho, a)
    rhs = comb(3, m) * np.trace(partial_trace(rho, m).matrix @ a.matrix)
    assert abs(lhs - rhs) < 1e-10


def test_linearity(rng):
    b = enumerate_sector(3, 3)
    x, y = random_hermitian(b.dim, rng), random_hermitian(b.dim, rng)
    lhs = partial_trace_map(2 * x - 3j * y, b, 2)
    rhs = 2 * partial_trace_map(x, b, 2) - 3j * partial_trace_map(y, b, 2)
    assert np.allclose(lhs, rhs)


def test_projection_scales_by_binomial(rng):
    b = enumerate_sector(3, 3)
    x = SectorOperator(b, random_hermitian(b.dim, rng))
    assert np.allclose(project_to_sector(x, 1).matrix, 3 * partial_trace_map(x.matrix, b, 1))


def test_product_state_amplitudes():
    c = np.array([1, 1]) / np.sqrt(2)
    v = product_state_vector(c, enumerate_sector(2, 2))
    assert np.allclose(v, [0.5, np.sqrt(0.5), 0.5])
    with pytest.raises(InvalidStateError):
        ProductStateAmplitudes([1.0, 1.0])


def test_product_closure_is_exact_in_rationals():
    # c = (3, 4)/5: every squared condensate element is a rational number
    c = [Fraction(3, 5), Fraction(4, 5)]
    for n in (2, 3, 4):
        rho = product_state_density(np.array([0.6, 0.8]), n)
        for m in range(1, n + 1):
            red = partial_trace(rho, m).matrix
            assert np.max(np.abs(red - product_state_density(np.array([0.6, 0.8]), m).matrix)) < 1e-15
            sub = enumerate_sector(2, m)
            for a, occ_a in enumerate(sub.states):
                for b, occ_b in enumerate(sub.states):
                    assert red[a, b].real ** 2 == pytest.approx(float(_squared_element(c, occ_a, occ_b)), abs=1e-15)


def _squared_element(c, occ_a, occ_b):
    """``|<a|Phi^M><Phi^M|b>|^2`` for the condensate with real amplitudes ``c``."""
    def weight(occ):
        coef = Fraction(factorial(sum(occ)), prod(factorial(o) for o in occ))
        return coef * prod(ci ** (2 * o) for ci, o in zip(c, occ))

    return weight(occ_a) * weight(occ_b)


def test_naive_tensor_trace():
    b = enumerate_sector(2, 1)
    mixed = DensityMatrix(b, 0.5 * np.eye(2))
    out = naive_tensor_trace_check(mixed)
    assert np.allclose(out.matrix, 3 / 8 * np.eye(2), atol=1e-15)
    assert out.trace() == pytest.approx(0.75)
    pure = DensityMatrix(b, np.array([[0.36, 0.48], [0.48, 0.64]]))
    assert np.allclose(naive_tensor_trace_check(pure).matrix, pure.matrix, atol=1e-15)


def test_invalid_states_rejected():
    b = enumerate_sector(2, 1)
    with pytest.raises(InvalidStateError):
        DensityMatrix(b, np.diag([1.5, -0.5]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(b, np.diag([0.5, 0.4]))
    with pytest.raises(SectorMismatchError):
        DensityMatrix(b, np.eye(3) / 3)


def test_json_roundtrip(rng):
    rho = random_density_matrix(enumerate_sector(3, 2), rng)
    back = DensityMatrix.from_json(rho.to_json())
    assert np.array_equal(back.matrix, rho.matrix)
    assert trace_distance(rho, back) == 0.0

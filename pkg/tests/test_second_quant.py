from itertools import combinations_with_replacement, product
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boserdm.errors import NonHermitianError
from boserdm.fock_sector import enumerate_sector
from boserdm.second_quant import (
    OneBodyOperator,
    SectorOperator,
    TwoBodyOperator,
    embed_m_body,
    embed_one_body,
    embed_two_body,
    expectation_m_particle,
    extend_operator,
    m_particle_matrix_element,
    number_operator,
    symmetrize_pair_indices,
)
from boserdm.subsystem import random_density_matrix, random_hermitian
from oracles import KronFock, tuple_matrix_elements


def _random_two_body(d, rng):
    return TwoBodyOperator(random_hermitian(d * d, rng).reshape(d, d, d, d))


def test_one_body_against_oracle(rng):
    d, n = 3, 3
    h = random_hermitian(d, rng)
    fock = KronFock(d, n)
    iso = fock.restrict(enumerate_sector(d, n).states)
    ref = iso.T @ fock.m_body(h, 1) @ iso
    assert np.allclose(embed_one_body(h, enumerate_sector(d, n)).matrix, ref, atol=1e-12)


def test_two_body_against_oracle(rng):
    d, n = 3, 3
    v = _random_two_body(d, rng)
    fock = KronFock(d, n)
    iso = fock.restrict(enumerate_sector(d, n).states)
    ref = iso.T @ fock.m_body(v.coeffs, 2) @ iso
    assert np.allclose(embed_two_body(v, enumerate_sector(d, n)).matrix, ref, atol=1e-12)


def test_contact_interaction():
    b = enumerate_sector(2, 2)
    m = embed_two_body(TwoBodyOperator.contact(2, 1.0), b).matrix
    assert np.allclose(m, np.diag([1.0, 0.0, 1.0]))


def test_pair_symmetrization_is_invisible(rng):
    d = 3
    raw = rng.normal(size=(d,) * 4)
    b = enumerate_sector(d, 3)
    assert np.allclose(embed_two_body(raw, b).matrix, embed_two_body(symmetrize_pair_indices(raw), b).matrix)


def test_non_hermitian_h2_rejected(rng):
    raw = rng.normal(size=(2, 2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2, 2))
    with pytest.raises(NonHermitianError, match="h2 not Hermitian"):
        TwoBodyOperator(raw)


def test_number_operator_and_two_body_hermitian(rng):
    for n in range(0, 4):
        b = enumerate_sector(3, n)
        assert np.allclose(number_operator(b).matrix, n * np.eye(b.dim))
    v = _random_two_body(3, rng)
    assert embed_two_body(v, enumerate_sector(3, 3)).hermitian_deviation() < 1e-12


@pytest.mark.parametrize("d,n,m", [(3, 3, 1), (3, 3, 2), (3, 3, 3), (2, 4, 2), (3, 2, 3)])
def test_number_string_identity(d, n, m):
    b = enumerate_sector(d, n)
    # sum over mode tuples of a^dag_{i1..iM} a_{i1..iM}: tuple coefficients M! * identity
    eye = np.zeros((d,) * (2 * m))
    for ks in product(range(d), repeat=m):
        eye[ks + ks] = 1.0
    got = embed_m_body(eye * factorial(m), b).matrix
    expected = factorial(n) / factorial(n - m) if m <= n else 0.0
    assert np.max(np.abs(got - expected * np.eye(b.dim))) < 1e-12


def _random_m_operator(d, m, rng):
    sub = enumerate_sector(d, m)
    small = random_hermitian(sub.dim, rng)
    return small, tuple_matrix_elements(small, sub.states, d, m)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_m_body_embedding_against_oracle(m, rng):
    d, n = 3, 3
    small, a = _random_m_operator(d, m, rng)
    fock = KronFock(d, n)
    b = enumerate_sector(d, n)
    iso = fock.restrict(b.states)
    ref = iso.T @ fock.m_body(a, m) @ iso
    assert np.allclose(embed_m_body(a, b).matrix, ref, atol=1e-12)
    # normal-ordered extension of the sector matrix is the same operator
    assert np.allclose(extend_operator(SectorOperator(enumerate_sector(d, m), small), b).matrix, ref, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_subset_matrix_elements_against_oracle(m, rng):
    d, n = 3, 3
    _, a = _random_m_operator(d, m, rng)
    fock = KronFock(d, n)
    op = fock.m_body(a, m)
    reps = list(combinations_with_replacement(range(d), n))
    for i in reps:
        bra = fock.tuple_state(i)
        for j in reps:
            ref = np.vdot(bra, op @ fock.tuple_state(j))
            assert abs(m_particle_matrix_element(a, i, j) - ref) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_expectation_factor(seed, m):
    rng = np.random.default_rng(seed)
    d, n = 3, 3
    rho = random_density_matrix(enumerate_sector(d, n), rng)
    small, a = _random_m_operator(d, m, rng)
    direct = np.trace(rho.matrix @ embed_m_body(a, rho.basis).matrix)
    assert abs(expectation_m_particle(rho, SectorOperator(enumerate_sector(d, m), small)) - direct) < 1e-10


def test_one_body_load(tmp_path):
    from boserdm.serialization import save_complex_array

    h = np.array([[1.0, 0.5j], [-0.5j, 2.0]])
    save_complex_array(tmp_path / "h.json", h)
    op = OneBodyOperator.load(tmp_path / "h.json")
    assert np.allclose(op.coeffs, h) and op.is_hermitian()

"""Second-quantized operators and their matrices on fixed-N sectors."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from math import comb, factorial
from typing import Sequence

import numpy as np

from .errors import NonHermitianError, SectorMismatchError
from .fock_sector import (
    SectorBasis,
    _enumerate,
    annihilation_matrix,
    annihilation_string_matrix,
    enumerate_sector,
    perm_delta,
    raising_tensor,
)
from .serialization import load_complex_array

HERMITIAN_TOL = 1e-12


def max_hermitian_deviation(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True)
class OneBodyOperator:
    """Coefficients ``h_ij`` of ``sum_ij h_ij a^dag_i a_j``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"one-body coefficients must be square, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    def hermitian_deviation(self) -> float:
        return max_hermitian_deviation(self.coeffs)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermitian_deviation() < tol

    @classmethod
    def load(cls, path) -> "OneBodyOperator":
        return cls(load_complex_array(path))


def symmetrize_pair_indices(v: np.ndarray) -> np.ndarray:
    """Average ``v[i,j,k,l]`` over ``i<->j`` and ``k<->l`` separately.

    ``a^dag_i a^dag_j a_k a_l`` only sees this part of the tensor.
    """
    v = np.asarray(v, dtype=complex)
    return 0.25 * (v + v.transpose(1, 0, 2, 3) + v.transpose(0, 1, 3, 2) + v.transpose(1, 0, 3, 2))


def two_body_hermitian_deviation(v: np.ndarray) -> float:
    d = v.shape[0]
    return max_hermitian_deviation(v.reshape(d * d, d * d))


@dataclass(frozen=True)
class TwoBodyOperator:
    """Coefficients of ``1/2 sum H_{ij;kl} a^dag_i a^dag_j a_k a_l``.

    The tensor is symmetrized over the creation pair and the annihilation
    pair on construction.  Hermiticity (``H_{ij;kl} = conj(H_{kl;ij})`` after
    symmetrization) is enforced unless ``check_hermitian`` is false.
    """

    coeffs: np.ndarray
    check_hermitian: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 4 or len(set(c.shape)) != 1:
            raise ValueError(f"two-body coefficients must be d x d x d x d, got {c.shape}")
        c = symmetrize_pair_indices(c)
        if self.check_hermitian:
            dev = two_body_hermitian_deviation(c)
            if dev > 1e-10:
                raise NonHermitianError(f"h2 not Hermitian (max dev = {dev:.3e})")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    def as_matrix(self) -> np.ndarray:
        d = self.d
        return self.coeffs.reshape(d * d, d * d)

    @classmethod
    def zero(cls, d: int) -> "TwoBodyOperator":
        return cls(np.zeros((d,) * 4))

    @classmethod
    def contact(cls, d: int, g: float) -> "TwoBodyOperator":
        """On-site interaction ``g/2 sum_x n_x (n_x - 1)`` in the site basis."""
        v = np.zeros((d,) * 4, dtype=complex)
        for x in range(d):
            v[x, x, x, x] = g
        return cls(v)

    @classmethod
    def load(cls, path) -> "TwoBodyOperator":
        return cls(load_complex_array(path))


@dataclass(frozen=True)
class SectorOperator:
    basis: SectorBasis
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise SectorMismatchError(
                f"matrix shape {m.shape} does not match sector size {self.basis.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def __add__(self, other: "SectorOperator") -> "SectorOperator":
        _same_sector(self.basis, other.basis)
        return SectorOperator(self.basis, self.matrix + other.matrix)

    def __sub__(self, other: "SectorOperator") -> "SectorOperator":
        _same_sector(self.basis, other.basis)
        return SectorOperator(self.basis, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "SectorOperator":
        return SectorOperator(self.basis, scalar * self.matrix)

    __rmul__ = __mul__

    def dagger(self) -> "SectorOperator":
        return SectorOperator(self.basis, self.matrix.conj().T)

    def hermitian_deviation(self) -> float:
        return max_hermitian_deviation(self.matrix)


def _same_sector(a: SectorBasis, b: SectorBasis) -> None:
    if (a.d, a.n) != (b.d, b.n):
        raise SectorMismatchError(f"sector (d={a.d}, N={a.n}) != (d={b.d}, N={b.n})")


def _coeff_array(op, ndim: int) -> np.ndarray:
    c = op.coeffs if hasattr(op, "coeffs") else op
    c = np.asarray(c, dtype=complex)
    if c.ndim != ndim:
        raise ValueError(f"expected rank-{ndim} coefficients, got rank {c.ndim}")
    return c


@lru_cache(maxsize=64)
def _lowering_stack(d: int, n: int) -> np.ndarray:
    """Dense ``L[k] = a_k`` from (d, n) to (d, n - 1), shape (d, dim_{n-1}, dim_n)."""
    basis = _enumerate(d, n)
    out = np.zeros((d, _enumerate(d, n - 1).dim, basis.dim), dtype=complex)
    for k in range(d):
        out[k] = annihilation_matrix(k, basis).toarray()
    return out


@lru_cache(maxsize=64)
def _pair_lowering_stack(d: int, n: int) -> np.ndarray:
    """Dense ``P[k, l] = a_k a_l`` from (d, n) to (d, n - 2)."""
    upper, lower = _lowering_stack(d, n), _lowering_stack(d, n - 1)
    return np.einsum("kab,lbc->klac", lower, upper)


def embed_one_body(h, basis: SectorBasis) -> SectorOperator:
    """Sector matrix of ``sum_ij h_ij a^dag_i a_j``."""
    c = _coeff_array(h, 2)
    if c.shape[0] != basis.d:
        raise SectorMismatchError(f"operator has d={c.shape[0]}, sector has d={basis.d}")
    if basis.n == 0:
        return SectorOperator(basis, np.zeros((1, 1)))
    low = _lowering_stack(basis.d, basis.n)
    return SectorOperator(basis, np.einsum("ij,iqp,jqr->pr", c, low.conj(), low, optimize=True))


def embed_two_body(v, basis: SectorBasis) -> SectorOperator:
    """Sector matrix of ``1/2 sum H_{ij;kl} a^dag_i a^dag_j a_k a_l``.

    ``v`` may be a :class:`TwoBodyOperator` or a raw rank-4 array; raw arrays
    are used as given (no symmetrization or Hermiticity check).
    """
    c = _coeff_array(v, 4)
    if c.shape[0] != basis.d:
        raise SectorMismatchError(f"operator has d={c.shape[0]}, sector has d={basis.d}")
    if basis.n < 2:
        return SectorOperator(basis, np.zeros((basis.dim, basis.dim)))
    pairs = _pair_lowering_stack(basis.d, basis.n)
    mat = 0.5 * np.einsum("ijkl,jiqp,klqr->pr", c, pairs.conj(), pairs, optimize=True)
    return SectorOperator(basis, mat)


def number_operator(basis: SectorBasis) -> SectorOperator:
    return embed_one_body(np.eye(basis.d), basis)


@lru_cache(maxsize=32)
def one_body_units(d: int, n: int) -> np.ndarray:
    """``E[i, j]`` = sector matrix of ``a^dag_i a_j`` on (d, n), shape (d, d, dim, dim)."""
    basis = _enumerate(d, n)
    if n == 0:
        return np.zeros((d, d, 1, 1), dtype=complex)
    low = _lowering_stack(d, n)
    out = np.einsum("iqp,jqr->ijpr", low.conj(), low)
    out.setflags(write=False)
    return out


def embed_m_body(a: np.ndarray, basis: SectorBasis) -> SectorOperator:
    """Sector matrix of ``1/M! sum A_{k;l} a^dag_{k_1..k_M} a_{l_1..l_M}``.

    ``a`` has shape ``(d,)*2M``: the first M axes index the creation string,
    the last M the annihilation string.  Vanishes when M > N.
    """
    a = np.asarray(a, dtype=complex)
    m2 = a.ndim
    if m2 % 2:
        raise ValueError("M-body coefficients need an even number of axes")
    m, d = m2 // 2, basis.d
    if m > basis.n:
        return SectorOperator(basis, np.zeros((basis.dim, basis.dim)))
    lower = enumerate_sector(d, basis.n - m)
    tuples = list(product(range(d), repeat=m))
    strings = np.zeros((len(tuples), lower.dim, basis.dim), dtype=complex)
    for t, modes in enumerate(tuples):
        strings[t] = annihilation_string_matrix(modes, basis).toarray()
    flat = a.reshape(d**m, d**m)
    mat = np.einsum("kl,kqp,lqr->pr", flat, strings.conj(), strings) / factorial(m)
    return SectorOperator(basis, mat)


def m_particle_matrix_element(a: np.ndarray, i: Sequence[int], j: Sequence[int]) -> complex:
    """Tuple-state matrix element of an M-particle operator in an N-particle space.

    ``a`` holds the tuple elements ``A_{k;l}`` with shape ``(d,)*2M``.  The
    element is the binomial-weighted double sum over ordered position
    subsets, contracting the leftover indices with :func:`perm_delta`.
    Exponential in N; meant for small checks.
    """
    a = np.asarray(a)
    m, n = a.ndim // 2, len(i)
    if len(j) != n:
        raise ValueError("bra and ket tuples differ in length")
    if m > n:
        raise ValueError(f"M={m} exceeds N={n}")
    total = 0j
    for alpha in combinations(range(n), m):
        rest_i = [i[k] for k in range(n) if k not in alpha]
        sub_i = tuple(i[k] for k in alpha)
        for beta in combinations(range(n), m):
            rest_j = [j[k] for k in range(n) if k not in beta]
            delta = perm_delta(rest_i, rest_j)
            if delta:
                total += a[sub_i + tuple(j[k] for k in beta)] * float(delta)
    return total / comb(n, m)


def extend_operator(a: SectorOperator, full: SectorBasis) -> SectorOperator:
    """Represent an M-particle sector operator on the (d, N) sector.

    Uses the normal-ordered second-quantized form, so the M-sector action
    of the result equals ``a`` and its N-sector trace against a state equals
    ``C(N, M)`` times the reduced expectation.
    """
    x = raising_tensor(a.basis, full)
    mat = np.einsum("fg,fpe,gre->pr", a.matrix, x, x, optimize=True)
    return SectorOperator(full, mat)


def expectation_m_particle(rho_n, a: SectorOperator) -> complex:
    """``Tr_N{rho A}`` for an M-particle operator ``a`` given on the (d, M) sector."""
    basis = rho_n.basis
    if a.basis.d != basis.d:
        raise SectorMismatchError("mode counts differ")
    if a.basis.n > basis.n:
        raise SectorMismatchError(f"M={a.basis.n} exceeds N={basis.n}")
    ext = extend_operator(a, basis)
    return complex(np.einsum("pr,rp->", rho_n.matrix, ext.matrix))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a

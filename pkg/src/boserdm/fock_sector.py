"""Fixed-particle-number bosonic sectors.

A sector (d, N) holds every occupation vector of ``d`` modes with ``N``
particles.  States are stored as unit-norm occupation (Fock) states; the
ordered index tuples ``(i_1, ..., i_N)`` used in hand calculations map onto
them through :func:`tuple_to_fock`, which also returns the norm ``kappa`` of
the symmetrized tuple state.

Mode indices are 0-based throughout.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb, factorial, prod, sqrt
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionOverflowError, SectorMismatchError

ModeTuple = tuple[int, ...]
FockState = tuple[int, ...]

MAX_DIM_ENV = "BOSERDM_MAX_DIM"
DEFAULT_MAX_DIM = 20_000


def max_dimension() -> int:
    value = os.environ.get(MAX_DIM_ENV)
    return int(value) if value else DEFAULT_MAX_DIM


def sector_dimension(d: int, n: int) -> int:
    if d < 1 or n < 0:
        return 0
    return comb(n + d - 1, d - 1)


def _occupations(d: int, n: int):
    # reverse-lexicographic: the first mode is filled first
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _occupations(d - 1, n - first):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class SectorBasis:
    d: int
    n: int
    states: tuple[FockState, ...]
    index_of: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, occ: Sequence[int]) -> int:
        return self.index_of[tuple(occ)]

    def occupation_array(self) -> np.ndarray:
        return np.array(self.states, dtype=int).reshape(len(self.states), self.d)

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.n, "states": [list(s) for s in self.states]}

    def __eq__(self, other):
        return isinstance(other, SectorBasis) and (self.d, self.n) == (other.d, other.n)

    def __hash__(self):
        return hash((self.d, self.n))


@lru_cache(maxsize=None)
def _enumerate(d: int, n: int) -> SectorBasis:
    states = tuple(_occupations(d, n))
    return SectorBasis(d, n, states, {s: k for k, s in enumerate(states)})


def enumerate_sector(d: int, n: int, max_dim: int | None = None) -> SectorBasis:
    """Return the basis of the (d, n) sector in reverse-lexicographic order."""
    if d < 1:
        raise ValueError(f"mode count must be positive, got d={d}")
    if n < 0:
        raise ValueError(f"particle number must be non-negative, got N={n}")
    cap = max_dimension() if max_dim is None else max_dim
    size = sector_dimension(d, n)
    if size > cap:
        raise DimensionOverflowError(
            f"sector (d={d}, N={n}) has dimension {size} > cap {cap}"
        )
    return _enumerate(d, n)


# -- tuple calculus ---------------------------------------------------------

def _check_same_length(i: Sequence[int], j: Sequence[int]) -> None:
    if len(i) != len(j):
        raise ValueError(f"tuple lengths differ: {len(i)} != {len(j)}")


def perm_delta(i: Sequence[int], j: Sequence[int]) -> Fraction:
    """Permutation-invariant Kronecker delta of two index tuples.

    Equals ``prod(c_m!) / K!`` when ``i`` and ``j`` agree as multisets with
    multiplicities ``c_m``, and zero otherwise.
    """
    _check_same_length(i, j)
    ci, cj = Counter(i), Counter(j)
    if ci != cj:
        return Fraction(0)
    return Fraction(prod(factorial(c) for c in ci.values()), factorial(len(i)))


def inner_product_symmetrized(i: Sequence[int], j: Sequence[int]) -> float:
    """Overlap of the symmetrized tuple states built from ``i`` and ``j``."""
    return float(perm_delta(i, j))


def occupation_of(i: Sequence[int], d: int) -> FockState:
    occ = [0] * d
    for mode in i:
        if not 0 <= mode < d:
            raise ValueError(f"mode index {mode} out of range for d={d}")
        occ[mode] += 1
    return tuple(occ)


def kappa_squared(occ: Sequence[int]) -> Fraction:
    return Fraction(prod(factorial(n) for n in occ), factorial(sum(occ)))


def tuple_to_fock(i: Sequence[int], d: int) -> tuple[FockState, float]:
    """Occupation vector of ``i`` and the norm kappa of its tuple state.

    The symmetrized state of ``i`` equals ``kappa`` times the unit-norm
    occupation state, with ``kappa = sqrt(prod(n_k!) / N!)``.
    """
    occ = occupation_of(i, d)
    return occ, sqrt(kappa_squared(occ))


def fock_to_tuple(occ: Sequence[int]) -> ModeTuple:
    """Sorted representative tuple of an occupation vector."""
    return tuple(k for k, n in enumerate(occ) for _ in range(n))


def annihilate_tuple_state(modes: Sequence[int], j: Sequence[int]) -> list[tuple[float, ModeTuple]]:
    """Apply an annihilation string to a symmetrized tuple state.

    Works entirely in tuple labels: every ordered subset of positions of
    ``j`` whose entries match ``modes`` as a multiset contributes the
    remaining tuple with weight ``sqrt((N-M)!/N!) * M! * perm_delta``.
    Returns ``(coefficient, remaining tuple)`` pairs, unmerged.
    """
    m, n = len(modes), len(j)
    if m > n:
        raise ValueError(f"cannot annihilate {m} particles from {n}")
    pref = sqrt(factorial(n - m) / factorial(n)) * factorial(m)
    out = []
    for alpha in combinations(range(n), m):
        delta = perm_delta(modes, [j[a] for a in alpha])
        if delta:
            rest = tuple(j[k] for k in range(n) if k not in alpha)
            out.append((pref * float(delta), rest))
    return out


def create_tuple_state(modes: Sequence[int], j: Sequence[int]) -> tuple[float, ModeTuple]:
    """Creation string on a tuple state: ``sqrt((N+M)!/N!)`` times the joined tuple."""
    n, m = len(j), len(modes)
    return sqrt(factorial(n + m) / factorial(n)), tuple(modes) + tuple(j)


# -- sector vectors and ladder matrices -------------------------------------

@dataclass(frozen=True)
class SectorVector:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise SectorMismatchError(
                f"amplitude length {amps.shape} does not match sector size {self.basis.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def fock_vector(basis: SectorBasis, occ: Sequence[int]) -> SectorVector:
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index(occ)] = 1.0
    return SectorVector(basis, amps)


def tuple_state_vector(i: Sequence[int], basis: SectorBasis) -> SectorVector:
    """The (sub-normalized) symmetrized tuple state as a sector vector."""
    if len(i) != basis.n:
        raise SectorMismatchError(f"tuple of length {len(i)} in an N={basis.n} sector")
    occ, kappa = tuple_to_fock(i, basis.d)
    v = fock_vector(basis, occ)
    return SectorVector(basis, kappa * v.amplitudes)


@lru_cache(maxsize=None)
def _annihilator(d: int, n: int, mode: int) -> sp.csr_matrix:
    src, dst = _enumerate(d, n), _enumerate(d, n - 1)
    rows, cols, vals = [], [], []
    for col, occ in enumerate(src.states):
        k = occ[mode]
        if k:
            target = occ[:mode] + (k - 1,) + occ[mode + 1:]
            rows.append(dst.index_of[target])
            cols.append(col)
            vals.append(sqrt(k))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dst.dim, src.dim), dtype=complex)
    mat.sort_indices()
    return mat


def annihilation_matrix(mode: int, basis: SectorBasis) -> sp.csr_matrix:
    """Sparse matrix of ``a_mode`` from the (d, N) to the (d, N-1) sector."""
    if not 0 <= mode < basis.d:
        raise ValueError(f"mode {mode} out of range for d={basis.d}")
    if basis.n == 0:
        raise ValueError("cannot annihilate in the vacuum sector")
    return _annihilator(basis.d, basis.n, mode)


def creation_matrix(mode: int, basis: SectorBasis) -> sp.csr_matrix:
    """Sparse matrix of ``a_mode^dagger`` from the (d, N) to the (d, N+1) sector."""
    target = enumerate_sector(basis.d, basis.n + 1)
    return annihilation_matrix(mode, target).conj().T.tocsr()


def apply_annihilation_string(modes: Sequence[int], v: SectorVector) -> SectorVector:
    """Apply ``a_{i_1} ... a_{i_M}`` to ``v``; the result lives in (d, N-M)."""
    basis = v.basis
    if len(modes) > basis.n:
        raise ValueError(f"cannot annihilate {len(modes)} particles from N={basis.n}")
    amps = v.amplitudes
    for mode in reversed(modes):
        amps = annihilation_matrix(mode, basis) @ amps
        basis = enumerate_sector(basis.d, basis.n - 1)
    return SectorVector(basis, amps)


def apply_creation_string(modes: Sequence[int], v: SectorVector) -> SectorVector:
    """Apply ``a^dagger_{i_1} ... a^dagger_{i_M}`` to ``v``; lands in (d, N+M)."""
    basis = v.basis
    enumerate_sector(basis.d, basis.n + len(modes))
    amps = v.amplitudes
    for mode in reversed(modes):
        amps = creation_matrix(mode, basis) @ amps
        basis = enumerate_sector(basis.d, basis.n + 1)
    return SectorVector(basis, amps)


def annihilation_string_matrix(modes: Sequence[int], basis: SectorBasis) -> sp.csr_matrix:
    """Sparse matrix of the annihilation string from (d, N) to (d, N-M)."""
    mat = sp.identity(basis.dim, dtype=complex, format="csr")
    b = basis
    for mode in reversed(modes):
        mat = annihilation_matrix(mode, b) @ mat
        b = enumerate_sector(b.d, b.n - 1)
    return mat.tocsr()


def creation_string_matrix(modes: Sequence[int], basis: SectorBasis) -> sp.csr_matrix:
    mat = sp.identity(basis.dim, dtype=complex, format="csr")
    b = basis
    for mode in reversed(modes):
        mat = creation_matrix(mode, b) @ mat
        b = enumerate_sector(b.d, b.n + 1)
    return mat.tocsr()


@lru_cache(maxsize=None)
def _raising_tensor(d: int, n: int, m: int) -> np.ndarray:
    """Dense ``X[F, p, e] = <p| (a^dag)^F / sqrt(F!) |e>`` for |F| = m.

    ``p`` runs over the (d, n) sector and ``e`` over (d, n - m).  Each
    nonzero equals ``prod_k sqrt(C(e_k + F_k, F_k))``.
    """
    sub, env, full = _enumerate(d, m), _enumerate(d, n - m), _enumerate(d, n)
    x = np.zeros((sub.dim, full.dim, env.dim))
    for f, occ_f in enumerate(sub.states):
        for e, occ_e in enumerate(env.states):
            tot = tuple(a + b for a, b in zip(occ_f, occ_e))
            coef = prod(comb(t, a) for t, a in zip(tot, occ_f))
            x[f, full.index_of[tot], e] = sqrt(coef)
    return x


def raising_tensor(sub: SectorBasis, full: SectorBasis) -> np.ndarray:
    if sub.d != full.d or sub.n > full.n:
        raise SectorMismatchError(
            f"cannot embed (d={sub.d}, M={sub.n}) into (d={full.d}, N={full.n})"
        )
    return _raising_tensor(full.d, full.n, sub.n)

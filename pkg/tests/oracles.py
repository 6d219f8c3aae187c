"""Independent reference implementations used only by the tests.

Nothing here imports the package's ladder or partial-trace code: ladder
operators come from Kronecker products of truncated single-mode matrices,
deltas from explicit permutation sums.
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from itertools import permutations, product
from math import factorial, sqrt

import numpy as np


def perm_delta_bruteforce(i, j) -> Fraction:
    """``1/K! sum_sigma prod_k delta(i_k, j_sigma(k))`` by enumerating all K! permutations."""
    k = len(i)
    hits = sum(1 for sigma in permutations(range(k)) if all(i[a] == j[sigma[a]] for a in range(k)))
    return Fraction(hits, factorial(k))


class KronFock:
    """Bosonic modes as Kronecker products on the truncated space ``(cut+1)^d``.

    With ``cut >= N`` every operator string that stays within particle
    numbers <= cut acts exactly as on the untruncated Fock space.
    """

    def __init__(self, d: int, cut: int):
        self.d, self.cut = d, cut
        single = np.diag(np.sqrt(np.arange(1, cut + 1)), k=1).astype(complex)
        eye = np.eye(cut + 1)
        self.a = []
        for k in range(d):
            facs = [single if m == k else eye for m in range(d)]
            self.a.append(reduce(np.kron, facs))
        self.vac = np.zeros((cut + 1) ** d, dtype=complex)
        self.vac[0] = 1.0

    def adag(self, k):
        return self.a[k].conj().T

    def index(self, occ) -> int:
        idx = 0
        for n in occ:
            idx = idx * (self.cut + 1) + n
        return idx

    def tuple_state(self, modes) -> np.ndarray:
        """``1/sqrt(N!) a^dag_{i_1} ... a^dag_{i_N} |0>`` in the big space."""
        v = self.vac
        for k in reversed(modes):
            v = self.adag(k) @ v
        return v / sqrt(factorial(len(modes)))

    def annihilate(self, modes, v) -> np.ndarray:
        for k in reversed(modes):
            v = self.a[k] @ v
        return v

    def create(self, modes, v) -> np.ndarray:
        for k in reversed(modes):
            v = self.adag(k) @ v
        return v

    def restrict(self, states) -> np.ndarray:
        """Isometry from a list of occupation vectors into the big space, shape (big, len)."""
        p = np.zeros(((self.cut + 1) ** self.d, len(states)))
        for c, occ in enumerate(states):
            p[self.index(occ), c] = 1.0
        return p

    def string_op(self, creators, annihilators) -> np.ndarray:
        out = np.eye((self.cut + 1) ** self.d, dtype=complex)
        for k in creators:
            out = out @ self.adag(k)
        for k in annihilators:
            out = out @ self.a[k]
        return out

    def m_body(self, coeffs, m: int) -> np.ndarray:
        """``1/M! sum A[k;l] a^dag_{k_1..k_M} a_{l_1..l_M}`` with ``coeffs`` of shape (d,)*2M."""
        dim = (self.cut + 1) ** self.d
        out = np.zeros((dim, dim), dtype=complex)
        for ks in product(range(self.d), repeat=m):
            for ls in product(range(self.d), repeat=m):
                c = coeffs[ks + ls]
                if c != 0:
                    out += c * self.string_op(ks, ls)
        return out / factorial(m)


def occupations_list(d: int, n: int):
    """All occupation vectors of n bosons in d modes (order irrelevant to callers)."""
    return [occ for occ in product(range(n + 1), repeat=d) if sum(occ) == n]


def tuple_matrix_elements(op_small: np.ndarray, states, d: int, m: int) -> np.ndarray:
    """``A[k;l] = <phi_k|A|phi_l>`` for a sector matrix given on ``states``.

    Maps each ordered tuple to its occupation state with weight
    ``sqrt(prod n! / M!)`` by direct counting.
    """
    index = {s: c for c, s in enumerate(states)}
    tuples = list(product(range(d), repeat=m))
    vecs = np.zeros((len(tuples), len(states)))
    for t, modes in enumerate(tuples):
        occ = [0] * d
        for k in modes:
            occ[k] += 1
        w = sqrt(np.prod([factorial(x) for x in occ]) / factorial(m))
        vecs[t, index[tuple(occ)]] = w
    return (vecs @ op_small @ vecs.T).reshape((d,) * (2 * m))


def dense_partial_trace_tensor(rho_full: np.ndarray, states, d: int, m: int) -> np.ndarray:
    """``rho_M`` via the operator-string trace ``Tr{a^dag_l a_k rho}`` over the Fock space.

    ``<k|rho_M|l> = (N-M)!/N! Tr{a^dag_{l_1..l_M} a_{k_1..k_M} rho}`` in tuple
    labels, returned as the tuple-element tensor of shape (d,)*2M.
    ``rho_full`` is given on the occupation vectors ``states``.
    """
    n = sum(states[0])
    fock = KronFock(d, n)
    iso = fock.restrict(states)
    big = iso @ rho_full @ iso.T
    out = np.zeros((d,) * (2 * m), dtype=complex)
    norm = factorial(n - m) / factorial(n)
    for ks in product(range(d), repeat=m):
        for ls in product(range(d), repeat=m):
            out[ks + ls] = norm * np.trace(fock.string_op(ls, ks) @ big)
    return out

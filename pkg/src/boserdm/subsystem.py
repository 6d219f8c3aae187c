"""Reduced density matrices of identical bosons.

The partial trace over ``N - M`` of ``N`` bosons is evaluated in the
occupation basis as an environment sum::

    rho_M[F', F] = C(N, M)^-1 sum_e rho_N[e + F', e + F] w(e, F') w(e, F)

with ``w(e, F) = prod_k sqrt(C(e_k + F_k, F_k))`` and ``e`` running over the
(d, N - M) sector.  It is linear, trace preserving and maps the N-fold
condensate of a single-particle state onto the M-fold condensate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial, prod, sqrt

import numpy as np

from .errors import InvalidStateError, SectorMismatchError
from .fock_sector import SectorBasis, enumerate_sector, raising_tensor
from .second_quant import SectorOperator, embed_two_body, max_hermitian_deviation
from .serialization import complex_from_pairs, complex_to_pairs

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = -1e-10
NORM_TOL = 1e-9


def min_eigenvalue(m: np.ndarray) -> float:
    h = 0.5 * (m + m.conj().T)
    return float(np.linalg.eigvalsh(h)[0])


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on a sector."""

    basis: SectorBasis
    matrix: np.ndarray
    validate: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise SectorMismatchError(
                f"matrix shape {m.shape} does not match sector size {self.basis.dim}"
            )
        object.__setattr__(self, "matrix", m)
        if self.validate:
            self.check()

    def check(self, herm_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL) -> None:
        dev = max_hermitian_deviation(self.matrix)
        if dev > herm_tol:
            raise InvalidStateError(f"density matrix not Hermitian (max dev = {dev:.3e})")
        tr = self.trace()
        if abs(tr - 1) > trace_tol:
            raise InvalidStateError(f"density matrix trace {tr.real:.12g} != 1")
        lam = min_eigenvalue(self.matrix)
        if lam < psd_tol:
            raise InvalidStateError(f"density matrix not PSD (min eigenvalue = {lam:.3e})")

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))

    def min_eigenvalue(self) -> float:
        return min_eigenvalue(self.matrix)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def to_json(self) -> dict:
        return {"basis": self.basis.to_json(), "matrix": complex_to_pairs(self.matrix)}

    @classmethod
    def from_json(cls, data: dict, validate: bool = True) -> "DensityMatrix":
        b = data["basis"]
        basis = enumerate_sector(b["d"], b["N"])
        if [list(s) for s in basis.states] != b["states"]:
            raise SectorMismatchError("basis ordering in snapshot differs from enumeration")
        return cls(basis, complex_from_pairs(data["matrix"]), validate)


@dataclass(frozen=True)
class ProductStateAmplitudes:
    """Single-particle amplitudes ``c_i = <phi_i|Phi>`` of a condensate."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex).ravel()
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1) > NORM_TOL:
            raise InvalidStateError(f"product-state amplitudes not normalized (|c|^2 = {norm:.12g})")
        object.__setattr__(self, "c", c)

    @property
    def d(self) -> int:
        return self.c.size

    @classmethod
    def normalized(cls, c) -> "ProductStateAmplitudes":
        c = np.asarray(c, dtype=complex)
        return cls(c / np.linalg.norm(c))


def trace_distance(a, b) -> float:
    ma = getattr(a, "matrix", a)
    mb = getattr(b, "matrix", b)
    diff = ma - mb
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def partial_trace_map(x: np.ndarray, basis: SectorBasis, m: int) -> np.ndarray:
    """Bosonic partial trace of an arbitrary (d, N) matrix down to (d, m).

    Linear and trace preserving; no validity checks on input or output.
    ``m == 0`` gives the 1x1 matrix ``[Tr x]``.
    """
    n = basis.n
    if m < 0:
        raise ValueError(f"M must be non-negative, got {m}")
    if m > n:
        raise ValueError(f"cannot reduce N={n} particles to M={m}")
    x = np.asarray(x)
    if m == n:
        return np.array(x, dtype=complex)
    sub = enumerate_sector(basis.d, m)
    w = raising_tensor(sub, basis)
    return np.einsum("fpe,pr,gre->fg", w, x, w, optimize=True) / comb(n, m)


def partial_trace(rho: DensityMatrix, m: int, validate: bool = True) -> DensityMatrix:
    """M-particle reduced density matrix of an N-particle state."""
    sub = enumerate_sector(rho.basis.d, m) if 0 <= m <= rho.basis.n else None
    if sub is None:
        raise ValueError(f"M={m} outside 0..{rho.basis.n}")
    return DensityMatrix(sub, partial_trace_map(rho.matrix, rho.basis, m), validate)


def project_to_sector(x: SectorOperator, m: int) -> SectorOperator:
    """``C(N, M)`` times the partial trace: the M-particle block of ``x``."""
    n = x.basis.n
    sub = enumerate_sector(x.basis.d, m)
    return SectorOperator(sub, comb(n, m) * partial_trace_map(x.matrix, x.basis, m))


def product_state_vector(c, basis: SectorBasis) -> np.ndarray:
    """Occupation-basis amplitudes ``sqrt(N!/prod n_k!) prod c_k^n_k`` of the condensate."""
    c = getattr(c, "c", c)
    c = np.asarray(c, dtype=complex)
    if c.size != basis.d:
        raise SectorMismatchError(f"{c.size} amplitudes for d={basis.d}")
    n = basis.n
    out = np.empty(basis.dim, dtype=complex)
    for k, occ in enumerate(basis.states):
        multinom = factorial(n) / prod(factorial(o) for o in occ)
        out[k] = sqrt(multinom) * np.prod(c ** np.array(occ))
    return out


def product_state_density(c, n: int) -> DensityMatrix:
    """Pure N-fold condensate of the single-particle state with amplitudes ``c``."""
    if not isinstance(c, ProductStateAmplitudes):
        c = ProductStateAmplitudes(c)
    basis = enumerate_sector(c.d, n)
    psi = product_state_vector(c, basis)
    return DensityMatrix(basis, np.outer(psi, psi.conj()))


def naive_tensor_trace_check(rho1: DensityMatrix) -> DensityMatrix:
    """Single-particle reduction of the two-particle operator ``rho (x) rho``.

    ``rho (x) rho`` is read as tuple-state matrix elements of a two-particle
    operator; only its bosonic part survives, and the reduction comes out as
    ``(rho Tr rho + rho^2) / 2``.  The result is generally not normalized,
    so it is returned unvalidated.
    """
    if rho1.basis.n != 1:
        raise SectorMismatchError("expected a single-particle density matrix")
    d = rho1.basis.d
    r = rho1.matrix
    tensor = np.einsum("ac,bd->abcd", r, r)
    two = enumerate_sector(d, 2)
    op = embed_two_body(tensor, two)
    return DensityMatrix(rho1.basis, partial_trace_map(op.matrix, two, 1), validate=False)


def random_density_matrix(basis: SectorBasis, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state ``G G^dag / Tr`` with complex Gaussian ``G`` of the given rank."""
    r = basis.dim if rank is None else rank
    g = rng.normal(size=(basis.dim, r)) + 1j * rng.normal(size=(basis.dim, r))
    m = g @ g.conj().T
    m /= np.trace(m).real
    return DensityMatrix(basis, 0.5 * (m + m.conj().T))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)

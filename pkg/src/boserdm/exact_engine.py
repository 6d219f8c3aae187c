"""Exact propagation of the full N-particle von Neumann equation (hbar = 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonHermitianError, NumericalError, SectorMismatchError
from .fock_sector import SectorBasis
from .integrators import integrate
from .second_quant import (
    OneBodyOperator,
    SectorOperator,
    TwoBodyOperator,
    embed_one_body,
    embed_two_body,
    max_hermitian_deviation,
)
from .subsystem import DensityMatrix


@dataclass(frozen=True)
class Hamiltonian:
    h1: OneBodyOperator
    h2: TwoBodyOperator
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.h1, OneBodyOperator):
            object.__setattr__(self, "h1", OneBodyOperator(self.h1))
        if not isinstance(self.h2, TwoBodyOperator):
            object.__setattr__(self, "h2", TwoBodyOperator(self.h2))
        if self.h1.d != self.h2.d:
            raise SectorMismatchError(f"h1 has d={self.h1.d}, h2 has d={self.h2.d}")
        dev = self.h1.hermitian_deviation()
        if dev > 1e-12:
            raise NonHermitianError(f"h1 not Hermitian (max dev = {dev:.3e})")

    @property
    def d(self) -> int:
        return self.h1.d

    def one_body_matrix(self, basis: SectorBasis) -> np.ndarray:
        key = ("h1", basis.d, basis.n)
        if key not in self._cache:
            self._cache[key] = embed_one_body(self.h1, basis).matrix
        return self._cache[key]

    def two_body_matrix(self, basis: SectorBasis) -> np.ndarray:
        key = ("h2", basis.d, basis.n)
        if key not in self._cache:
            self._cache[key] = embed_two_body(self.h2, basis).matrix
        return self._cache[key]

    def sector_matrix(self, basis: SectorBasis) -> np.ndarray:
        return self.one_body_matrix(basis) + self.two_body_matrix(basis)

    def eigh(self, basis: SectorBasis) -> tuple[np.ndarray, np.ndarray]:
        key = ("eig", basis.d, basis.n)
        if key not in self._cache:
            h = self.sector_matrix(basis)
            dev = max_hermitian_deviation(h)
            if dev > 1e-10:
                raise NonHermitianError(f"sector Hamiltonian not Hermitian (max dev = {dev:.3e})")
            try:
                self._cache[key] = np.linalg.eigh(h)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"eigendecomposition failed: {exc}") from exc
        return self._cache[key]


@dataclass(frozen=True)
class TimeGrid:
    """Output times ``t0, t0 + dt, ..., t1``; ``dt`` must divide the span."""

    t0: float
    t1: float
    dt: float
    tol: float | None = None

    def __post_init__(self):
        if self.t1 < self.t0:
            raise ValueError(f"t1={self.t1} < t0={self.t0}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.dt))

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    def __len__(self):
        return len(self.states)

    def matrices(self) -> np.ndarray:
        return np.array([getattr(s, "matrix", s) for s in self.states])


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def von_neumann_rhs(h: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return -1j * commutator(h, rho)


def propagate_von_neumann(
    hamiltonian: Hamiltonian,
    rho0: DensityMatrix,
    grid: TimeGrid,
    method: str = "eig",
    max_step: float | None = None,
    validate: bool = True,
) -> Trajectory:
    """Propagate ``rho0`` under the sector Hamiltonian.

    ``method="eig"`` applies ``U(t) rho0 U(t)^dag`` from a dense
    eigendecomposition; ``method="rk4"`` integrates the commutator equation
    with fixed RK4 steps (``max_step`` defaults to ``0.01 / ||H||``).
    """
    basis = rho0.basis
    times = grid.times()
    if method == "eig":
        energies, vecs = hamiltonian.eigh(basis)
        r0 = vecs.conj().T @ rho0.matrix @ vecs
        states = []
        for t in times:
            phase = np.exp(-1j * energies * (t - grid.t0))
            rt = phase[:, None] * r0 * phase.conj()[None, :]
            m = vecs @ rt @ vecs.conj().T
            states.append(DensityMatrix(basis, 0.5 * (m + m.conj().T), validate))
        return Trajectory(times, states)
    if method == "rk4":
        h = hamiltonian.sector_matrix(basis)
        norm = max(np.linalg.norm(h, 2), 1e-12)
        step = max_step if max_step is not None else 0.01 / norm
        mats = integrate(lambda t, r: von_neumann_rhs(h, r), rho0.matrix, times, step)
        return Trajectory(times, [DensityMatrix(basis, m, validate) for m in mats])
    raise ValueError(f"unknown propagation method {method!r}")


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h``."""
    e, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * e * t)) @ v.conj().T


def single_particle_propagator(h1, t: float) -> np.ndarray:
    c = getattr(h1, "coeffs", h1)
    return propagator(np.asarray(c), t)


def to_interaction_picture(x, h1, t: float):
    """``U1^dag(t) x U1(t)`` with ``U1 = exp(-i H1 t)`` embedded in the sector of ``x``."""
    return _rotate(x, h1, t, inverse=False)


def from_interaction_picture(x, h1, t: float):
    """Inverse of :func:`to_interaction_picture`."""
    return _rotate(x, h1, t, inverse=True)


def _rotate(x, h1, t: float, inverse: bool):
    basis = x.basis
    coeffs = getattr(h1, "coeffs", h1)
    if np.shape(coeffs)[0] != basis.d:
        raise SectorMismatchError(f"h1 has d={np.shape(coeffs)[0]}, sector has d={basis.d}")
    u = propagator(embed_one_body(coeffs, basis).matrix, t)
    m = u @ x.matrix @ u.conj().T if inverse else u.conj().T @ x.matrix @ u
    if isinstance(x, DensityMatrix):
        return DensityMatrix(basis, 0.5 * (m + m.conj().T), x.validate)
    return SectorOperator(basis, m)


def energy(hamiltonian: Hamiltonian, rho: DensityMatrix) -> float:
    h = hamiltonian.sector_matrix(rho.basis)
    return float(np.real(np.einsum("ij,ji->", h, rho.matrix)))


def check_conservation(hamiltonian: Hamiltonian, traj: Trajectory) -> dict:
    """Maximum deviations of conserved quantities along an exact trajectory."""
    first = traj.states[0]
    e0, p0 = energy(hamiltonian, first), first.purity()
    spec0 = first.eigenvalues()
    out = {"trace": 0.0, "hermiticity": 0.0, "min_eigenvalue": math.inf, "purity": 0.0,
           "energy": 0.0, "spectrum": 0.0}
    for s in traj.states:
        out["trace"] = max(out["trace"], abs(s.trace() - 1))
        out["hermiticity"] = max(out["hermiticity"], max_hermitian_deviation(s.matrix))
        out["min_eigenvalue"] = min(out["min_eigenvalue"], s.min_eigenvalue())
        out["purity"] = max(out["purity"], abs(s.purity() - p0))
        out["energy"] = max(out["energy"], abs(energy(hamiltonian, s) - e0))
        out["spectrum"] = max(out["spectrum"], float(np.max(np.abs(s.eigenvalues() - spec0))))
    return out

"""BBGKY right-hand side, mean-field truncation and the lattice GPE.

Conventions: hbar = 1; two-body tensors index as ``H[n, j, i, m]`` for
``<phi_n phi_j| H2 |phi_i phi_m>``; the mean-field potential is
``C[n, m] = sum_ij H[n, j, i, m] rho1[i, j]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, SectorMismatchError
from .exact_engine import Hamiltonian, TimeGrid, commutator, single_particle_propagator
from .fock_sector import enumerate_sector
from .integrators import integrate
from .second_quant import OneBodyOperator, TwoBodyOperator, embed_one_body, embed_two_body
from .subsystem import DensityMatrix, partial_trace_map

CONSISTENCY_TOL = 1e-8
NORM_TOL = 1e-9


def _matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "matrix", x))


def _h2_tensor(h2) -> np.ndarray:
    return np.asarray(getattr(h2, "coeffs", h2))


def bbgky_rhs(m: int, rho_m, rho_mp1, hamiltonian: Hamiltonian, n: int) -> np.ndarray:
    """``i d/dt rho_M`` from the hierarchy equation coupling M to M+1.

    Returns ``[H1 + (1 - (N - M)) H2, rho_M] + (N - M) Tr_1 [H2, rho_{M+1}]``
    with both Hamiltonian parts represented on the respective sectors.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= M < N, got M={m}, N={n}")
    d = hamiltonian.d
    basis_m = enumerate_sector(d, m)
    basis_mp1 = enumerate_sector(d, m + 1)
    r_m, r_mp1 = _matrix(rho_m), _matrix(rho_mp1)
    if r_m.shape != (basis_m.dim,) * 2 or r_mp1.shape != (basis_mp1.dim,) * 2:
        raise SectorMismatchError(f"density matrices do not match sectors M={m} and M+1={m + 1}")
    mismatch = float(np.max(np.abs(partial_trace_map(r_mp1, basis_mp1, m) - r_m)))
    if mismatch > CONSISTENCY_TOL:
        warnings.warn(
            f"rho_(M+1) does not reduce to rho_M (max dev = {mismatch:.3e})", stacklevel=2
        )
    k = n - m
    gen = hamiltonian.one_body_matrix(basis_m) + (1 - k) * hamiltonian.two_body_matrix(basis_m)
    upper = commutator(hamiltonian.two_body_matrix(basis_mp1), r_mp1)
    return commutator(gen, r_m) + k * partial_trace_map(upper, basis_mp1, m)


def traced_von_neumann_rhs(m: int, rho_n: DensityMatrix, hamiltonian: Hamiltonian) -> np.ndarray:
    """``Tr_{N-M} [H, rho_N]``: the exact reduced generator output."""
    basis = rho_n.basis
    full = commutator(hamiltonian.sector_matrix(basis), rho_n.matrix)
    return partial_trace_map(full, basis, m)


def mean_field_potential(rho1, h2) -> OneBodyOperator:
    """Contraction ``C[n, m] = sum_ij H2[n, j, i, m] rho1[i, j]``."""
    v, r = _h2_tensor(h2), _matrix(rho1)
    if v.shape[0] != r.shape[0]:
        raise SectorMismatchError(f"h2 has d={v.shape[0]}, rho1 has d={r.shape[0]}")
    return OneBodyOperator(np.einsum("njim,ij->nm", v, r))


def rotated_two_body(h2, h1, t: float) -> np.ndarray:
    """Interaction-picture tensor ``(u^dag x u^dag) H2 (u x u)`` with ``u = exp(-i h1 t)``."""
    v = _h2_tensor(h2)
    u = single_particle_propagator(h1, t)
    uc = u.conj()
    return np.einsum("an,bj,abce,ci,em->njim", uc, uc, v, u, u, optimize=True)


def mean_field_potential_interaction(t1: float, rho1_i, h2, h1) -> OneBodyOperator:
    """Two-time potential: the two-body tensor rotated to ``t1`` contracted with ``rho1_i``.

    The state argument carries its own time; pass ``rho1_I(t2)``.
    """
    return mean_field_potential(rho1_i, rotated_two_body(h2, h1, t1))


def truncated_rhs(m: int, rho_m, phi, hamiltonian: Hamiltonian, n: int) -> np.ndarray:
    """Product-state closure of the hierarchy: ``[H1 + H2 + (N - M) C, rho_M]``.

    For M > 1 the result rests entirely on the pure product-state ansatz.
    """
    basis = enumerate_sector(hamiltonian.d, m)
    rho1 = np.outer(phi, np.conj(phi))
    c = embed_one_body(mean_field_potential(rho1, hamiltonian.h2), basis).matrix
    gen = hamiltonian.one_body_matrix(basis) + hamiltonian.two_body_matrix(basis) + (n - m) * c
    return commutator(gen, _matrix(rho_m))


@dataclass(frozen=True)
class MeanFieldState:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=complex).ravel()
        norm = float(np.vdot(phi, phi).real)
        if abs(norm - 1) > NORM_TOL:
            raise NumericalError(f"mean-field state not normalized (|phi|^2 = {norm:.12g})")
        object.__setattr__(self, "phi", phi)

    def density(self) -> DensityMatrix:
        basis = enumerate_sector(self.phi.size, 1)
        return DensityMatrix(basis, np.outer(self.phi, self.phi.conj()), validate=False)


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    states: list

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, k):
        return self.states[k]

    def phis(self) -> np.ndarray:
        return np.array([s.phi for s in self.states])


def effective_hamiltonian(phi: np.ndarray, hamiltonian: Hamiltonian, n: int) -> np.ndarray:
    rho1 = np.outer(phi, phi.conj())
    c = mean_field_potential(rho1, hamiltonian.h2).coeffs
    return hamiltonian.h1.coeffs + (n - 1) * c


def _norm_bound(h1: np.ndarray, h2: np.ndarray, n: int) -> float:
    d = h1.shape[0]
    return float(np.linalg.norm(h1, 2) + (n - 1) * np.linalg.norm(h2.reshape(d * d, d * d), 2))


def _run(rhs, phi0, grid: TimeGrid, norm: float, tol: float, norm_tol: float) -> MeanFieldTrajectory:
    times = grid.times()
    step = 0.05 / max(norm, 1e-12)
    phis = integrate(rhs, phi0, times, step, tol=tol)
    for t, phi in zip(times, phis):
        drift = abs(float(np.vdot(phi, phi).real) - 1)
        if drift > norm_tol * max(1.0, t - grid.t0):
            raise NumericalError(f"norm drift {drift:.3e} at t={t}")
    return MeanFieldTrajectory(times, [MeanFieldState(p) for p in phis])


def propagate_mean_field(
    phi0: MeanFieldState,
    hamiltonian: Hamiltonian,
    n: int,
    grid: TimeGrid,
    tol: float = 1e-9,
    norm_tol: float = NORM_TOL,
) -> MeanFieldTrajectory:
    """Integrate ``i d/dt phi = [H1 + (N - 1) C(phi)] phi`` with RK4.

    The base step is ``0.05 / ||H_eff||``; each output interval is refined by
    step halving until successive solutions differ by less than ``tol``.
    """
    phi0 = phi0 if isinstance(phi0, MeanFieldState) else MeanFieldState(phi0)
    if phi0.phi.size != hamiltonian.d:
        raise SectorMismatchError(f"phi has {phi0.phi.size} entries, H has d={hamiltonian.d}")
    h1 = hamiltonian.h1.coeffs
    v = hamiltonian.h2.coeffs

    def rhs(_t, phi):
        c = np.einsum("njim,i,j->nm", v, phi, phi.conj())
        return -1j * ((h1 + (n - 1) * c) @ phi)

    return _run(rhs, phi0.phi, grid, _norm_bound(h1, v, n), tol, norm_tol)


def self_consistent_state(
    hamiltonian: Hamiltonian, n: int, guess=None, mixing: float = 0.5,
    tol: float = 1e-13, max_iter: int = 2000,
) -> tuple[MeanFieldState, float]:
    """Lowest self-consistent eigenvector of ``H_eff(phi)`` by damped fixed-point iteration.

    Returns the state and its eigenvalue ``mu``.
    """
    d = hamiltonian.d
    phi = np.ones(d, dtype=complex) / math.sqrt(d) if guess is None else np.asarray(guess, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    rho = np.outer(phi, phi.conj())
    for _ in range(max_iter):
        c = mean_field_potential(rho, hamiltonian.h2).coeffs
        e, vecs = np.linalg.eigh(hamiltonian.h1.coeffs + (n - 1) * c)
        new = vecs[:, 0]
        new_rho = np.outer(new, new.conj())
        if np.max(np.abs(new_rho - rho)) < tol:
            return MeanFieldState(new), float(e[0])
        rho = (1 - mixing) * rho + mixing * new_rho
    raise NumericalError("self-consistent iteration did not converge")


# -- lattice Gross-Pitaevskii ------------------------------------------------

@dataclass(frozen=True)
class LatticeConfig:
    """1D lattice discretization of kinetic energy, potential and contact interaction.

    The 3-point stencil gives hopping ``J = hbar^2 / (2 m a^2)``; the
    potential is ``tilt * x + potential[x]`` with ``x`` the site index; the
    on-site coupling enters as ``g`` in the site basis.
    """

    sites: int
    spacing: float = 1.0
    boundary: str = "periodic"
    tilt: float = 0.0
    onsite_g: float = 0.0
    mass: float = 0.5
    potential: tuple | None = None

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError(f"need at least 2 sites, got {self.sites}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")

    @property
    def hopping(self) -> float:
        return 1.0 / (2 * self.mass * self.spacing**2)

    def site_potential(self) -> np.ndarray:
        v = self.tilt * np.arange(self.sites, dtype=float)
        if self.potential is not None:
            v = v + np.asarray(self.potential, dtype=float)
        return v

    def kinetic_matrix(self) -> np.ndarray:
        j, d = self.hopping, self.sites
        k = np.diag(np.full(d, 2 * j)) - j * (np.eye(d, k=1) + np.eye(d, k=-1))
        if self.boundary == "periodic":
            k[0, -1] -= j
            k[-1, 0] -= j
        return k

    def one_body(self) -> OneBodyOperator:
        return OneBodyOperator(self.kinetic_matrix() + np.diag(self.site_potential()))

    def two_body(self) -> TwoBodyOperator:
        return TwoBodyOperator.contact(self.sites, self.onsite_g)

    def hamiltonian(self) -> Hamiltonian:
        return Hamiltonian(self.one_body(), self.two_body())

    def dispersion(self, k: np.ndarray) -> np.ndarray:
        return 2 * self.hopping * (1 - np.cos(np.asarray(k) * self.spacing))


def _laplacian_apply(lat: LatticeConfig, phi: np.ndarray) -> np.ndarray:
    j = lat.hopping
    out = 2 * j * phi
    if lat.boundary == "periodic":
        out -= j * (np.roll(phi, 1) + np.roll(phi, -1))
    else:
        out[1:] -= j * phi[:-1]
        out[:-1] -= j * phi[1:]
    return out


def gpe_rhs(lat: LatticeConfig, n: int):
    v = lat.site_potential()
    gn = lat.onsite_g * (n - 1)

    def rhs(_t, phi):
        return -1j * (_laplacian_apply(lat, phi) + v * phi + gn * np.abs(phi) ** 2 * phi)

    return rhs


def propagate_gpe(
    lattice: LatticeConfig,
    phi0: MeanFieldState,
    n: int,
    grid: TimeGrid,
    tol: float = 1e-9,
    norm_tol: float = NORM_TOL,
) -> MeanFieldTrajectory:
    """Discretized Gross-Pitaevskii evolution on the lattice.

    Same integrator and step rule as :func:`propagate_mean_field`, with the
    Laplacian applied by stencil and the nonlinearity as ``g (N - 1) |phi|^2``.
    """
    phi0 = phi0 if isinstance(phi0, MeanFieldState) else MeanFieldState(phi0)
    if phi0.phi.size != lattice.sites:
        raise SectorMismatchError(f"phi has {phi0.phi.size} entries for {lattice.sites} sites")
    h1 = lattice.one_body().coeffs
    bound = float(np.linalg.norm(h1, 2) + abs(lattice.onsite_g) * (n - 1))
    return _run(gpe_rhs(lattice, n), phi0.phi, grid, bound, tol, norm_tol)


def gpe_energy(lattice: LatticeConfig, phi: np.ndarray, n: int) -> float:
    """Kinetic + potential + ``g (N - 1) / 2 sum |phi|^4``."""
    phi = getattr(phi, "phi", phi)
    lin = np.vdot(phi, _laplacian_apply(lattice, phi) + lattice.site_potential() * phi).real
    return float(lin + 0.5 * lattice.onsite_g * (n - 1) * np.sum(np.abs(phi) ** 4))

"""Second-order dissipative corrections to the mean-field dynamics.

Everything lives in the interaction picture of the single-particle
Hamiltonian ``h1`` with hbar = 1.  Index conventions:

* ``B[a, b]`` is the single-particle operator with matrix
  ``B[a, b][i, j] = H2_I[i, a, j, b](t)``;
* ``A[a, b](s, t) = sum_k B[a, k](s) rho1_I[k, b](t)``;
* ``Gamma[i, j, k, l](t) = int_0^t ds Tr{B[i, j](s) rho1_I(t) B[k, l](t)}``,
  split as ``Gamma = gamma / 2 + i S``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, SectorMismatchError
from .exact_engine import Hamiltonian, TimeGrid, Trajectory, commutator
from .fock_sector import SectorBasis, enumerate_sector
from .hierarchy import mean_field_potential, rotated_two_body
from .integrators import integrate
from .second_quant import (
    OneBodyOperator,
    SectorOperator,
    embed_one_body,
    embed_two_body,
    extend_operator,
    one_body_units,
)
from .subsystem import DensityMatrix, partial_trace_map

TRACE_WARN = 1e-6


def _coeffs(x) -> np.ndarray:
    return np.asarray(getattr(x, "coeffs", x))


def _matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "matrix", x))


class RotatingTensor:
    """Interaction-picture two-body tensor ``H2_I(t)`` with cheap time integrals.

    In the eigenbasis of ``h1`` every entry rotates as ``exp(i w t)`` with
    ``w = e_a + e_b - e_c - e_e``, so ``H2_I(t)`` and quadratures of it are
    elementwise phase sums followed by one basis change.
    """

    def __init__(self, h2, h1):
        v = _coeffs(h2)
        energies, vecs = np.linalg.eigh(_coeffs(h1))
        self.d = v.shape[0]
        self.vecs = vecs
        vc = vecs.conj()
        self.rotated = np.einsum("xa,yb,xyzw,zc,we->abce", vc, vc, v, vecs, vecs, optimize=True)
        e = energies
        self.freq = e[:, None, None, None] + e[None, :, None, None] - e[None, None, :, None] - e[None, None, None, :]

    def _to_site(self, t_eig: np.ndarray) -> np.ndarray:
        u, uc = self.vecs, self.vecs.conj()
        return np.einsum("na,jb,abce,ic,me->njim", u, u, t_eig, uc, uc, optimize=True)

    def at(self, t: float) -> np.ndarray:
        return self._to_site(self.rotated * np.exp(1j * self.freq * t))

    def weighted_sum(self, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
        phases = np.tensordot(weights, np.exp(1j * np.multiply.outer(nodes, self.freq)), axes=1)
        return self._to_site(self.rotated * phases)

    def exact_integral(self, t: float) -> np.ndarray:
        w = self.freq
        small = np.abs(w * t) < 1e-8
        safe = np.where(small, 1.0, w)
        phases = np.where(small, t + 0.5j * w * t * t, (np.exp(1j * w * t) - 1) / (1j * safe))
        return self._to_site(self.rotated * phases)


# -- B and A operators -------------------------------------------------------

def b_operators(t: float, h2, h1) -> np.ndarray:
    """All ``B[a, b](t)`` as an array of shape (d, d, d, d), operator indices last."""
    h_i = rotated_two_body(h2, h1, t)
    return h_i.transpose(1, 3, 0, 2)


def b_operator(first: int, second: int, t: float, h2, h1) -> OneBodyOperator:
    """``B[first, second](t)``: matrix ``H2_I[i, first, j, second](t)`` over ``(i, j)``."""
    d = _coeffs(h2).shape[0]
    if not (0 <= first < d and 0 <= second < d):
        raise IndexError(f"mode indices ({first}, {second}) out of range for d={d}")
    return OneBodyOperator(b_operators(t, h2, h1)[first, second])


def a_operators(s: float, rho1_i, h2, h1) -> np.ndarray:
    """All ``A[a, b](s, t) = sum_k B[a, k](s) rho1_I[k, b](t)``, shape (d, d, d, d)."""
    b = b_operators(s, h2, h1)
    return np.einsum("akij,kb->abij", b, _matrix(rho1_i))


def a_operator(first: int, second: int, s: float, rho1_i, h2, h1) -> OneBodyOperator:
    return OneBodyOperator(a_operators(s, rho1_i, h2, h1)[first, second])


# -- autocorrelation tensor --------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Composite rule for the memory integral ``int_0^t ds``.

    ``substeps`` is the initial panel count; panels double until two
    successive estimates differ by less than ``tol`` (max abs entry).
    """

    rule: str = "trapezoid"
    substeps: int = 16
    tol: float = 1e-8
    max_refinements: int = 14

    def __post_init__(self):
        if self.rule not in ("trapezoid", "gauss"):
            raise ValueError(f"rule must be 'trapezoid' or 'gauss', got {self.rule!r}")
        if self.substeps < 2:
            raise ValueError(f"substeps must be >= 2, got {self.substeps}")


def _nodes(rule: str, t: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    if rule == "trapezoid":
        nodes = np.linspace(0.0, t, panels + 1)
        w = np.full(panels + 1, t / panels)
        w[0] = w[-1] = 0.5 * t / panels
        return nodes, w
    x, wx = np.polynomial.legendre.leggauss(4)
    h = t / panels
    left = h * np.arange(panels)
    nodes = (left[:, None] + 0.5 * h * (x + 1)[None, :]).ravel()
    return nodes, np.tile(0.5 * h * wx, panels)


def memory_integral(t: float, rot: RotatingTensor, quad: QuadratureSpec) -> tuple[np.ndarray, float]:
    """``int_0^t H2_I(s) ds`` by composite quadrature with panel doubling.

    Returns the estimate and the last change between refinements.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return np.zeros((rot.d,) * 4, dtype=complex), 0.0
    panels = quad.substeps
    prev = rot.weighted_sum(*_nodes(quad.rule, t, panels))
    for _ in range(quad.max_refinements):
        panels *= 2
        cur = rot.weighted_sum(*_nodes(quad.rule, t, panels))
        err = float(np.max(np.abs(cur - prev)))
        prev = cur
        if err < quad.tol:
            return cur, err
    raise NumericalError(f"memory integral not converged at t={t} (change {err:.3e})")


@dataclass(frozen=True)
class GammaTensor:
    entries: np.ndarray
    t: float = 0.0
    error: float = 0.0

    @property
    def d(self) -> int:
        return self.entries.shape[0]


def gamma_from_parts(integral: np.ndarray, h_now: np.ndarray, rho1_i) -> np.ndarray:
    """Contract ``int H2_I`` and ``H2_I(t)`` with the state into ``Gamma[i, j, k, l]``."""
    return np.einsum("iajm,mb,kbla->ijkl", integral, _matrix(rho1_i), h_now, optimize=True)


def gamma_tensor(t: float, rho1_i, h2, h1, quad: QuadratureSpec | None = None) -> GammaTensor:
    """Autocorrelation tensor ``Gamma(t)`` for the state ``rho1_I(t)``."""
    quad = quad or QuadratureSpec()
    rot = RotatingTensor(h2, h1)
    integral, err = memory_integral(t, rot, quad)
    return GammaTensor(gamma_from_parts(integral, rot.at(t), rho1_i), t, err)


def conj_swap(x: np.ndarray) -> np.ndarray:
    """``y[i, j, k, l] = conj(x[l, k, j, i])``."""
    return np.conj(np.transpose(x, (3, 2, 1, 0)))


def gamma_s_split(g) -> tuple[np.ndarray, np.ndarray]:
    """Split ``Gamma = gamma / 2 + i S`` into its two conjugation-symmetric parts."""
    ent = np.asarray(getattr(g, "entries", g))
    swapped = conj_swap(ent)
    return ent + swapped, (ent - swapped) / 2j


def kossakowski_spectrum(gamma: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``gamma`` arranged as the Hermitian matrix ``K[(j,i),(k,l)]``.

    The dissipator reads ``sum K[(j,i),(k,l)] L_(j,i)^dag rho L_(k,l)`` with
    ``L_(k,l) = a^dag_k a_l``, so negative eigenvalues flag a map that is not
    completely positive.
    """
    d = gamma.shape[0]
    k = np.transpose(gamma, (1, 0, 2, 3)).reshape(d * d, d * d)
    return np.linalg.eigvalsh(0.5 * (k + k.conj().T))


# -- Lindblad form -----------------------------------------------------------

def _units(basis: SectorBasis) -> np.ndarray:
    return one_body_units(basis.d, basis.n)


def quartic_string(s: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Sector matrix of ``sum S[i, j, k, l] a^dag_k a_l a^dag_i a_j``."""
    e = _units(basis)
    return np.einsum("ijkl,klab,ijbc->ac", s, e, e, optimize=True)


def lamb_shift(s: np.ndarray, basis: SectorBasis, tol: float = 1e-10) -> SectorOperator:
    """Lamb-shift Hamiltonian built from ``S`` on the given sector."""
    s = np.asarray(s)
    dev = float(np.max(np.abs(s - conj_swap(s)))) if s.size else 0.0
    if dev > tol:
        raise ValueError(f"S violates S[ijkl] = conj(S[lkji]) (max dev = {dev:.3e})")
    if s.shape[0] != basis.d:
        raise SectorMismatchError(f"S has d={s.shape[0]}, sector has d={basis.d}")
    return SectorOperator(basis, quartic_string(s, basis))


def dissipator(rho: np.ndarray, gamma: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """``sum gamma[ijkl] (E_ij rho E_kl - 1/2 {E_kl E_ij, rho})`` with ``E_ij = a^dag_i a_j``."""
    e = _units(basis)
    jump = np.einsum("ijkl,ijab,bc,klcd->ad", gamma, e, rho, e, optimize=True)
    q = quartic_string(gamma, basis)
    return jump - 0.5 * (q @ rho + rho @ q)


def lindblad_rhs(rho_m, gamma, h_ls, h2_i, c_i, n: int, prefactor: float | None = None) -> np.ndarray:
    """Time derivative of ``rho_M`` in the dissipative mean-field equation.

    ``-i [H2_I + k C_I + k H_LS, rho] + k D_gamma(rho)`` with ``k = N - M``
    unless ``prefactor`` overrides it.  ``h2_i`` is the rotated two-body
    tensor, ``c_i`` the one-body potential and ``h_ls`` a sector matrix.
    """
    basis = rho_m.basis
    rho = rho_m.matrix
    k = (n - basis.n) if prefactor is None else prefactor
    gen = embed_two_body(_coeffs(h2_i), basis).matrix + k * embed_one_body(_coeffs(c_i), basis).matrix
    gen = gen + k * _matrix(h_ls)
    return -1j * commutator(gen, rho) + k * dissipator(rho, np.asarray(gamma), basis)


# -- alternative forms of the second-order term, used for cross-checks -------

def _one_body_on(ops: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Embed a stack of single-particle matrices (..., d, d) on the sector."""
    return np.einsum("...ij,ijab->...ab", ops, _units(basis))


def _plus_hc(half, r: np.ndarray) -> np.ndarray:
    """``half(r) + half(r^dag)^dag``: the "+ h.c." completion, kept linear in ``r``."""
    return half(r) + half(r.conj().T).conj().T


def double_commutator_form(t: float, rho, h2, h1, rho1_i, quad: QuadratureSpec | None = None) -> np.ndarray:
    """``-int_0^t ds sum_ab [B[b, a](t), [A[a, b](s, t), rho]]`` on the sector of ``rho``."""
    quad = quad or QuadratureSpec()
    basis, r = rho.basis, rho.matrix
    rot = RotatingTensor(h2, h1)
    integral, _ = memory_integral(t, rot, quad)
    # A is linear in B(s), so its time integral uses the integrated tensor
    a_int = np.einsum("akij,kb->abij", integral.transpose(1, 3, 0, 2), _matrix(rho1_i))
    b_now = rot.at(t).transpose(1, 3, 0, 2)
    a_sec = _one_body_on(a_int, basis)
    b_sec = _one_body_on(b_now, basis)
    out = np.zeros_like(r)
    d = basis.d
    for a in range(d):
        for b in range(d):
            inner = commutator(a_sec[a, b], r)
            out -= commutator(b_sec[b, a], inner)
    return out


def ab_form(t: float, rho, h2, h1, rho1_i, quad: QuadratureSpec | None = None) -> np.ndarray:
    """``int ds sum_ab (A rho B - B A rho) + h.c.`` with ``A = A[a, b](s, t)``, ``B = B[b, a](t)``."""
    quad = quad or QuadratureSpec()
    basis, r = rho.basis, rho.matrix
    rot = RotatingTensor(h2, h1)
    integral, _ = memory_integral(t, rot, quad)
    a_int = np.einsum("akij,kb->abij", integral.transpose(1, 3, 0, 2), _matrix(rho1_i))
    b_now = rot.at(t).transpose(1, 3, 0, 2)
    a_sec = _one_body_on(a_int, basis)
    b_sec = _one_body_on(b_now, basis)

    def half(m):
        return np.einsum("abpq,qr,bars->ps", a_sec, m, b_sec) - np.einsum("bapq,abqr,rs->ps", b_sec, a_sec, m)

    return _plus_hc(half, r)


def gamma_form(rho, gamma_entries: np.ndarray) -> np.ndarray:
    """``sum Gamma[ijkl] (E_ij rho E_kl - E_kl E_ij rho) + h.c.``"""
    basis, r = rho.basis, rho.matrix
    e = _units(basis)
    q = quartic_string(gamma_entries, basis)

    def half(m):
        return np.einsum("ijkl,ijab,bc,klcd->ad", gamma_entries, e, m, e, optimize=True) - q @ m

    return _plus_hc(half, r)


def lindblad_form(rho, gamma: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``-i [H_LS, rho] + D_gamma(rho)``."""
    basis, r = rho.basis, rho.matrix
    h_ls = quartic_string(s, basis)
    return -1j * commutator(h_ls, r) + dissipator(r, gamma, basis)


# -- auxiliary operators of the full second-order equation --------------------

def aux_operators_dse(t1: float, t2: float, rho1_i, rho2_i, h2, h1) -> dict:
    """The operators D, E, S and their Hermitian combinations H_D, H_E, H_S.

    ``rho1_i`` and ``rho2_i`` are interaction-picture states at ``t2``.
    D, H_D, E, H_E are single-particle matrices; S and H_S are matrices on
    the two-particle sector.
    """
    r1, r2 = _matrix(rho1_i), _matrix(rho2_i)
    d = _coeffs(h2).shape[0]
    one, two = enumerate_sector(d, 1), enumerate_sector(d, 2)
    if r1.shape != (one.dim, one.dim):
        raise SectorMismatchError(f"rho1 must be a single-particle state of d={d}")
    if r2.shape != (two.dim, two.dim):
        raise SectorMismatchError(f"rho2 must be a two-particle state of d={d}")
    h_t1 = rotated_two_body(h2, h1, t1)
    h_t2 = rotated_two_body(h2, h1, t2)
    h2_t1 = embed_two_body(h_t1, two).matrix
    h2_t2 = embed_two_body(h_t2, two).matrix

    b_t1 = h_t1.transpose(1, 3, 0, 2)
    reduced = partial_trace_map(h2_t2 @ r2, two, 1)
    dmat = np.einsum("ijab,ba->ij", b_t1, reduced)

    c_22 = mean_field_potential(r1, h_t2).coeffs
    c_12 = mean_field_potential(r1, h_t1).coeffs
    emat = 0.5 * c_22 @ r1 @ c_12

    smat = 0.5 * h2_t1 @ r2 @ h2_t2

    def herm(x):
        return -1j * (x - x.conj().T)

    return {"D": dmat, "E": emat, "S": smat, "H_D": herm(dmat), "H_E": herm(emat), "H_S": herm(smat)}


def second_order_terms(
    t: float,
    m: int,
    n: int,
    h2,
    h1,
    rho_m_i,
    rho1_i,
    rho2_i,
    quad: QuadratureSpec | None = None,
    approximate_prefactors: bool = False,
) -> dict:
    """Term-by-term right-hand side of the full second-order equation.

    ``rho_m_i``, ``rho1_i`` and ``rho2_i`` are callables returning the
    interaction-picture matrices of the supplied history at time ``s``.
    Memory integrals use the composite rule of ``quad`` with a fixed panel
    count (``quad.substeps``), since the history is arbitrary data.  With
    ``approximate_prefactors`` every ``N - M - 1`` and ``N - M - 2`` is
    replaced by ``N - M``.  Returns a dict of sector matrices keyed by term.
    """
    quad = quad or QuadratureSpec()
    d = _coeffs(h2).shape[0]
    basis = enumerate_sector(d, m)
    k = n - m
    k1 = k if approximate_prefactors else k - 1
    k2 = k if approximate_prefactors else k - 2
    rot = RotatingTensor(h2, h1)

    def h2_sec(s):
        return embed_two_body(rot.at(s), basis).matrix

    def c_sec(t_h, t_r):
        return embed_one_body(mean_field_potential(rho1_i(t_r), rot.at(t_h)).coeffs, basis).matrix

    h_t = h2_sec(t)
    r0 = rho_m_i(0.0)
    terms = {
        "initial": -1j * commutator(h_t, r0),
        "initial_mean_field": -1j * k * commutator(c_sec(t, 0.0), r0),
    }
    nodes, weights = _nodes(quad.rule, t, quad.substeps) if t > 0 else (np.zeros(0), np.zeros(0))
    acc = {key: np.zeros((basis.dim, basis.dim), dtype=complex) for key in
           ("h2_h2", "b_a", "h2_c", "c_h2", "c_c", "h_d", "h_s", "h_e")}
    b_now = _one_body_on(rot.at(t).transpose(1, 3, 0, 2), basis)
    for s, w in zip(nodes, weights):
        rs = rho_m_i(s)
        h_s = h2_sec(s)
        c_ss = c_sec(s, s)
        c_ts = c_sec(t, s)
        acc["h2_h2"] -= w * commutator(h_t, commutator(h_s, rs))
        a_ss = _one_body_on(np.einsum("akij,kb->abij", rot.at(s).transpose(1, 3, 0, 2), rho1_i(s)), basis)
        for a in range(d):
            for b in range(d):
                acc["b_a"] -= w * k * commutator(b_now[b, a], commutator(a_ss[a, b], rs))
        acc["h2_c"] -= w * k * commutator(h_t, commutator(c_ss, rs))
        acc["c_h2"] -= w * k * commutator(c_ts, commutator(h_s, rs))
        acc["c_c"] -= w * k * k1 * commutator(c_ts, commutator(c_ss, rs))
        aux = aux_operators_dse(t, s, rho1_i(s), rho2_i(s), h2, h1)
        acc["h_d"] -= 1j * w * k * k1 * commutator(_lift(aux["H_D"], 1, basis), rs)
        acc["h_s"] -= 1j * w * k * k1 * commutator(_lift(aux["H_S"], 2, basis), rs)
        acc["h_e"] -= 1j * w * k * k1 * k2 * commutator(_lift(aux["H_E"], 1, basis), rs)
    terms.update(acc)
    return terms


def _lift(x: np.ndarray, k: int, basis: SectorBasis) -> np.ndarray:
    """Normal-ordered extension of a k-particle matrix; zero on fewer than k particles."""
    if basis.n < k:
        return np.zeros((basis.dim, basis.dim), dtype=complex)
    return extend_operator(SectorOperator(enumerate_sector(basis.d, k), x), basis).matrix


# -- propagation -------------------------------------------------------------

@dataclass
class DissipativeResult:
    """Schrodinger-picture single-particle trajectory plus per-step diagnostics."""

    trajectory: Trajectory
    diagnostics: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.diagnostics])


def propagate_dissipative_mean_field(
    rho1_0: DensityMatrix,
    hamiltonian: Hamiltonian,
    n: int,
    grid: TimeGrid,
    quad: QuadratureSpec | None = None,
    max_step: float | None = None,
    prefactor: float | None = None,
) -> DissipativeResult:
    """Time-local dissipative mean-field equation for one particle out of N.

    ``Gamma`` is rebuilt from the instantaneous state at every RK4 stage.
    Purity is not enforced; trace, purity, the lowest eigenvalue of the
    state and of the reshaped ``gamma`` are recorded at each output time.
    """
    quad = quad or QuadratureSpec()
    basis = rho1_0.basis
    if basis.n != 1:
        raise SectorMismatchError("propagation is for the single-particle state")
    if n < 2:
        raise ValueError(f"need N >= 2, got N={n}")
    if abs(rho1_0.purity() - 1) > 1e-9:
        raise ValueError(f"initial state must be pure (purity {rho1_0.purity():.12g})")
    k = (n - 1) if prefactor is None else prefactor
    h1 = hamiltonian.h1.coeffs
    rot = RotatingTensor(hamiltonian.h2, h1)
    energies, vecs = np.linalg.eigh(h1)

    def u1(t):
        return (vecs * np.exp(-1j * energies * t)) @ vecs.conj().T

    def parts(t, r):
        h_now = rot.at(t)
        integral, _ = memory_integral(t, rot, quad)
        gam, s = gamma_s_split(gamma_from_parts(integral, h_now, r))
        return h_now, gam, s

    def rhs(t, r):
        h_now, gam, s = parts(t, r)
        c = np.einsum("njim,ij->nm", h_now, r)
        gen = k * c + k * quartic_string(s, basis)
        return -1j * commutator(gen, r) + k * dissipator(r, gam, basis)

    norm = np.linalg.norm(hamiltonian.h2.as_matrix(), 2) * max(k, 1)
    step = max_step if max_step is not None else 0.05 / max(norm, 1e-12)
    times = grid.times()
    rel = times - grid.t0
    r0 = u1(grid.t0).conj().T @ rho1_0.matrix @ u1(grid.t0)
    mats = integrate(rhs, r0, rel, step)
    states, diag, warns = [], [], []
    for t_abs, t_rel, r in zip(times, rel, mats):
        _, gam, _ = parts(t_rel, r)
        u = u1(t_abs)
        m = u @ r @ u.conj().T
        m = 0.5 * (m + m.conj().T)
        st = DensityMatrix(basis, m, validate=False)
        tr = st.trace().real
        row = {
            "time": float(t_abs),
            "trace": tr,
            "purity": st.purity(),
            "min_eig_rho": st.min_eigenvalue(),
            "min_eig_gamma": float(kossakowski_spectrum(gam)[0]) if t_rel > 0 else 0.0,
        }
        if abs(tr - 1) > TRACE_WARN:
            msg = f"trace drift {tr - 1:.3e} at t={t_abs}"
            warns.append(msg)
            warnings.warn(msg, stacklevel=2)
        states.append(st)
        diag.append(row)
    return DissipativeResult(Trajectory(times, states), diag, warns)

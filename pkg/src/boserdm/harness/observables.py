"""Single-particle observables evaluated from ``rho1`` (unit trace).

Particle-number-extensive quantities (occupations, momentum distribution,
natural-orbital occupations) carry the factor N, so they sum to N.
"""

from __future__ import annotations

import numpy as np

from ..subsystem import trace_distance


def dft_matrix(d: int) -> np.ndarray:
    """``F[k, x] = exp(-2 pi i k x / d) / sqrt(d)``: momentum modes ``a_k = sum_x F[k, x] a_x``."""
    k = np.arange(d)
    return np.exp(-2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)


def occupations(rho1: np.ndarray, n: int) -> np.ndarray:
    return n * np.real(np.diag(rho1))


def momentum_distribution(rho1: np.ndarray, n: int) -> np.ndarray:
    """``p_k = Tr{a_k^dag a_k rho}`` on the discrete momentum grid ``2 pi k / d``."""
    f = dft_matrix(rho1.shape[0])
    return n * np.real(np.einsum("kx,xy,ky->k", f, rho1, f.conj()))


def purity(rho1: np.ndarray) -> float:
    return float(np.real(np.einsum("ij,ji->", rho1, rho1)))


def natural_orbital_occupations(rho1: np.ndarray, n: int) -> np.ndarray:
    lam = np.linalg.eigvalsh(0.5 * (rho1 + rho1.conj().T))
    return n * lam[::-1]


def product_energy(rho1: np.ndarray, h1: np.ndarray, h2: np.ndarray, n: int) -> float:
    """``N Tr{h1 rho} + N(N-1)/2 sum H[n,j,i,m] rho[i,n] rho[m,j]``: the energy of the condensate of ``rho``."""
    one = np.einsum("ij,ji->", h1, rho1)
    two = np.einsum("njim,in,mj->", h2, rho1, rho1)
    return float(np.real(n * one + 0.5 * n * (n - 1) * two))


def columns(name: str, d: int) -> list[str]:
    if name == "occupations":
        return [f"n_{k}" for k in range(d)]
    if name == "momentum":
        return [f"p_{k}" for k in range(d)]
    if name == "natural_orbitals":
        return [f"lambda_{k}" for k in range(d)]
    return [name]


def evaluate(
    name: str,
    rho1: np.ndarray,
    n: int,
    energy: float | None = None,
    reference: np.ndarray | None = None,
) -> list[float]:
    if name == "occupations":
        return list(occupations(rho1, n))
    if name == "momentum":
        return list(momentum_distribution(rho1, n))
    if name == "purity":
        return [purity(rho1)]
    if name == "natural_orbitals":
        return list(natural_orbital_occupations(rho1, n))
    if name == "energy":
        return [float("nan") if energy is None else energy]
    if name == "trace_distance":
        return [float("nan") if reference is None else trace_distance(rho1, reference)]
    raise KeyError(name)


def revival_time(times, series) -> float | None:
    """Time of the first recurrence of a vector time series to its initial value.

    With ``dist(t) = ||series(t) - series(0)||`` and threshold half its
    maximum: after ``dist`` first rises above the threshold, the recurrence
    is the minimum of the first window where it is back below it.  ``None``
    if no such window exists.
    """
    s = np.asarray(series)
    t = np.asarray(times)
    dist = np.linalg.norm(s - s[0], axis=1)
    thr = 0.5 * dist.max()
    if thr == 0:
        return None
    above = dist > thr
    k0 = int(np.argmax(above))
    below = np.flatnonzero(~above[k0:]) + k0
    if below.size == 0:
        return None
    k1 = int(below[0])
    rest = np.flatnonzero(above[k1:])
    k2 = k1 + int(rest[0]) if rest.size else len(dist)
    return float(t[k1 + int(np.argmin(dist[k1:k2]))])

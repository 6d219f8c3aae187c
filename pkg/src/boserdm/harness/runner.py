"""Engine orchestration, CSV output and the run manifest."""

from __future__ import annotations

import csv
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..dissipator import propagate_dissipative_mean_field
from ..errors import ConfigError
from ..exact_engine import Hamiltonian, TimeGrid, energy, propagate_von_neumann
from ..fock_sector import enumerate_sector
from ..hierarchy import MeanFieldState, bbgky_rhs, propagate_gpe, propagate_mean_field, traced_von_neumann_rhs
from ..subsystem import DensityMatrix, partial_trace_map
from . import observables as obs
from .config import ScenarioConfig

EQUATIONS = {
    "exact": "von Neumann equation i d(rho_N)/dt = [H1 + H2, rho_N] on the fixed-(d, N) sector, solved by eigendecomposition",
    "bbgky_check": "hierarchy equation i d(rho_M)/dt = [H1 + (1 - (N - M)) H2, rho_M] + (N - M) Tr_1 [H2, rho_(M+1)], "
                   "residual against the traced exact generator",
    "mean_field": "nonlinear mean-field Schrodinger equation i dPhi/dt = [H1 + (N - 1) C(Phi)] Phi, "
                  "C[n, m] = sum_ij H2[n, j, i, m] Phi_i Phi_j^*",
    "gpe": "discrete Gross-Pitaevskii equation i dPhi/dt = [-J Laplacian + V + g (N - 1) |Phi|^2] Phi",
    "dissipative": "dissipative mean-field master equation for rho_1 in the interaction picture: "
                   "-i [(N - 1)(C + H_LS), rho] + (N - 1) sum gamma_ijkl (E_ij rho E_kl - {E_kl E_ij, rho} / 2)",
}

TOLERANCES = {
    "hermiticity": 1e-12,
    "trace": 1e-10,
    "psd": -1e-10,
    "mean_field_refinement": 1e-9,
    "norm_drift_per_time": 1e-9,
    "dissipative_trace_warning": 1e-6,
}


@dataclass
class EngineResult:
    times: np.ndarray
    rho1: list
    energies: list | None = None
    extra: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    states: list | None = None


@dataclass
class Prepared:
    cfg: ScenarioConfig
    hamiltonian: Hamiltonian
    rho0: object
    grid: TimeGrid


def prepare(cfg: ScenarioConfig) -> Prepared:
    cfg.check_caps()
    h = Hamiltonian(cfg.build_h1(), cfg.build_h2())
    rho0 = cfg.build_initial()
    if "gpe" in cfg.engines:
        if cfg.lattice() is None or cfg.h2.get("type", "none") not in ("contact", "none"):
            raise ConfigError("gpe engine needs a tight_binding or harmonic h1 and a contact h2")
    if "dissipative" in cfg.engines and cfg.n < 2:
        raise ConfigError("dissipative engine needs N >= 2")
    return Prepared(cfg, h, rho0, TimeGrid(0.0, cfg.t1, cfg.dt_out))


def _condensate(prep: Prepared) -> np.ndarray:
    """Single-particle orbital of a condensate initial state."""
    r1 = partial_trace_map(prep.rho0.matrix, prep.rho0.basis, 1)
    lam, vecs = np.linalg.eigh(0.5 * (r1 + r1.conj().T))
    if abs(lam[-1] - 1) > 1e-9:
        raise ConfigError(f"mean-field engines need a condensate initial state (largest rho1 eigenvalue {lam[-1]:.12g})")
    phi = vecs[:, -1]
    k = int(np.argmax(np.abs(phi)))
    return phi * (abs(phi[k]) / phi[k])


def run_exact(prep: Prepared) -> EngineResult:
    traj = propagate_von_neumann(prep.hamiltonian, prep.rho0, prep.grid)
    basis = prep.rho0.basis
    rho1 = [partial_trace_map(s.matrix, basis, 1) for s in traj.states]
    en = [energy(prep.hamiltonian, s) for s in traj.states]
    res = EngineResult(traj.times, rho1, en, states=traj.states)
    res.summary = {
        "energy_drift": float(max(abs(e - en[0]) for e in en)),
        "trace_drift": float(max(abs(s.trace() - 1) for s in traj.states)),
    }
    return res


def run_bbgky(prep: Prepared, exact: EngineResult) -> EngineResult:
    m, n = prep.cfg.m, prep.cfg.n
    basis = prep.rho0.basis
    resid = []
    for s in exact.states:
        r_m = partial_trace_map(s.matrix, basis, m)
        r_mp1 = partial_trace_map(s.matrix, basis, m + 1)
        lhs = bbgky_rhs(m, r_m, r_mp1, prep.hamiltonian, n)
        rhs = traced_von_neumann_rhs(m, s, prep.hamiltonian)
        resid.append(float(np.max(np.abs(lhs - rhs))))
    res = EngineResult(exact.times, exact.rho1, exact.energies, {"bbgky_residual": resid})
    res.summary = {"max_bbgky_residual": max(resid)}
    return res


def run_mean_field(prep: Prepared) -> EngineResult:
    traj = propagate_mean_field(MeanFieldState(_condensate(prep)), prep.hamiltonian, prep.cfg.n, prep.grid)
    return _from_orbitals(prep, traj)


def run_gpe(prep: Prepared) -> EngineResult:
    traj = propagate_gpe(prep.cfg.lattice(), MeanFieldState(_condensate(prep)), prep.cfg.n, prep.grid)
    return _from_orbitals(prep, traj)


def _from_orbitals(prep: Prepared, traj) -> EngineResult:
    h1, h2, n = prep.hamiltonian.h1.coeffs, prep.hamiltonian.h2.coeffs, prep.cfg.n
    rho1 = [np.outer(p, p.conj()) for p in traj.phis()]
    en = [obs.product_energy(r, h1, h2, n) for r in rho1]
    norms = [abs(float(np.vdot(p, p).real) - 1) for p in traj.phis()]
    res = EngineResult(traj.times, rho1, en)
    res.summary = {"norm_drift": max(norms), "energy_drift": float(max(abs(e - en[0]) for e in en))}
    return res


def run_dissipative(prep: Prepared) -> EngineResult:
    phi = _condensate(prep)
    basis = enumerate_sector(prep.cfg.d, 1)
    rho1_0 = DensityMatrix(basis, np.outer(phi, phi.conj()))
    out = propagate_dissipative_mean_field(rho1_0, prep.hamiltonian, prep.cfg.n, prep.grid, prep.cfg.quadrature())
    h1, h2, n = prep.hamiltonian.h1.coeffs, prep.hamiltonian.h2.coeffs, prep.cfg.n
    rho1 = [s.matrix for s in out.trajectory.states]
    extra = {f"diag_{k}": list(out.column(k)) for k in ("trace", "purity", "min_eig_rho", "min_eig_gamma")}
    res = EngineResult(out.trajectory.times, rho1, [obs.product_energy(r, h1, h2, n) for r in rho1], extra)
    res.summary = {
        "max_trace_drift": float(np.max(np.abs(out.column("trace") - 1))),
        "final_purity": float(out.column("purity")[-1]),
        "min_eig_gamma": float(np.min(out.column("min_eig_gamma"))),
    }
    res.warnings = list(out.warnings)
    return res


def write_csv(path: Path, cfg: ScenarioConfig, res: EngineResult, reference: list | None) -> list[str]:
    header = ["time"]
    for name in cfg.observables:
        header += obs.columns(name, cfg.d)
    header += list(res.extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, t in enumerate(res.times):
            row = [float(t)]
            en = res.energies[k] if res.energies is not None else None
            ref = reference[k] if reference is not None else None
            for name in cfg.observables:
                row += obs.evaluate(name, res.rho1[k], cfg.n, en, ref)
            row += [col[k] for col in res.extra.values()]
            w.writerow([f"{float(x):.15e}" for x in row])
    return header


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run every requested engine, write one CSV each plus a JSON manifest."""
    prep = prepare(cfg)
    out_dir = cfg.path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    need_exact = "exact" in cfg.engines or "bbgky_check" in cfg.engines or (
        "trace_distance" in cfg.observables
    )
    results = {}
    exact = run_exact(prep) if need_exact else None
    for eng in cfg.engines:
        if eng == "exact":
            results[eng] = exact
        elif eng == "bbgky_check":
            results[eng] = run_bbgky(prep, exact)
        elif eng == "mean_field":
            results[eng] = run_mean_field(prep)
        elif eng == "gpe":
            results[eng] = run_gpe(prep)
        elif eng == "dissipative":
            results[eng] = run_dissipative(prep)

    reference = exact.rho1 if exact is not None else None
    engines = {}
    for eng, res in results.items():
        path = out_dir / f"{cfg.prefix}_{eng}.csv"
        header = write_csv(path, cfg, res, reference)
        engines[eng] = {
            "equation": EQUATIONS[eng],
            "csv": path.name,
            "columns": header,
            "rows": len(res.times),
            "diagnostics": res.summary,
            "warnings": res.warnings,
        }
    notes = []
    if cfg.m > 1:
        notes.append("M > 1 quantities in truncated equations follow from the pure product-state ansatz")
    manifest = {
        "name": cfg.name,
        "config": cfg.raw,
        "sector_dimensions": {str(k): v for k, v in cfg.sector_dimensions().items()},
        "versions": {
            "boserdm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "tolerances": TOLERANCES,
        "engines": engines,
        "notes": notes,
    }
    with open(out_dir / f"{cfg.prefix}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def validate_scenario(cfg: ScenarioConfig) -> dict:
    """Dry run: build operators and initial state, predict sector sizes; writes nothing."""
    prep = prepare(cfg)
    report = {"sector_dimensions": cfg.sector_dimensions(), "warnings": []}
    if any(e in cfg.engines for e in ("mean_field", "gpe", "dissipative")):
        _condensate(prep)
    if "trace_distance" in cfg.observables and cfg.engines == ("exact",):
        report["warnings"].append("trace_distance against exact is identically zero for the exact engine")
    return report


"""Scenario configuration read from a single JSON document.

Complex matrices and vectors are nested ``[re, im]`` pairs; plain real
numbers are accepted wherever the imaginary part is zero.  Relative file
paths resolve against the directory of the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dissipator import QuadratureSpec
from ..errors import ConfigError, DimensionOverflowError
from ..fock_sector import enumerate_sector, max_dimension, sector_dimension
from ..hierarchy import LatticeConfig
from ..second_quant import HERMITIAN_TOL, OneBodyOperator, TwoBodyOperator, max_hermitian_deviation
from ..serialization import complex_from_pairs, load_complex_array
from ..subsystem import DensityMatrix, product_state_density

ENGINES = ("exact", "bbgky_check", "mean_field", "gpe", "dissipative")
OBSERVABLES = ("occupations", "momentum", "purity", "trace_distance", "energy", "natural_orbitals")
DEFAULT_OBSERVABLES = ("occupations", "momentum", "purity", "energy")


def _complex(data, what: str) -> np.ndarray:
    """Real array, or complex array given as trailing ``[re, im]`` pairs."""
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: not a numeric array") from exc
    return arr


def parse_vector(data, what: str) -> np.ndarray:
    arr = _complex(data, what)
    if arr.ndim == 1:
        return arr.astype(complex)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return complex_from_pairs(arr)
    raise ConfigError(f"{what}: expected a vector or a list of [re, im] pairs, got shape {arr.shape}")


def parse_matrix(data, what: str) -> np.ndarray:
    arr = _complex(data, what)
    if arr.ndim == 2:
        return arr.astype(complex)
    if arr.ndim == 3 and arr.shape[2] == 2:
        return complex_from_pairs(arr)
    raise ConfigError(f"{what}: expected a matrix or nested [re, im] pairs, got shape {arr.shape}")


@dataclass
class ScenarioConfig:
    d: int
    n: int
    h1: dict
    h2: dict
    initial: dict
    t1: float
    dt_out: float
    m: int = 1
    engines: tuple = ("exact",)
    observables: tuple = DEFAULT_OBSERVABLES
    output_dir: str = "out"
    prefix: str = "run"
    quad: dict = field(default_factory=dict)
    seed: int = 0
    name: str = "scenario"
    base_dir: Path = field(default_factory=Path.cwd)
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"N must be a positive integer, got {self.n!r}")
        if not isinstance(self.m, int) or not 1 <= self.m <= self.n:
            raise ConfigError(f"M must satisfy 1 <= M <= N, got M={self.m!r}")
        if not self.t1 > 0:
            raise ConfigError(f"grid.t1 must be positive, got {self.t1}")
        if not self.dt_out > 0:
            raise ConfigError(f"grid.dt_out must be positive, got {self.dt_out}")
        steps = self.t1 / self.dt_out
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"grid.dt_out={self.dt_out} does not divide t1={self.t1}")
        bad = [e for e in self.engines if e not in ENGINES]
        if bad or not self.engines:
            raise ConfigError(f"engines must be a non-empty subset of {list(ENGINES)}, got {list(self.engines)}")
        bad = [o for o in self.observables if o not in OBSERVABLES]
        if bad or not self.observables:
            raise ConfigError(f"observables must be a non-empty subset of {list(OBSERVABLES)}, got {list(self.observables)}")
        if "bbgky_check" in self.engines and self.m >= self.n:
            raise ConfigError(f"bbgky_check needs M < N, got M={self.m}, N={self.n}")

    # -- builders ---------------------------------------------------------

    def path(self, p) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def _load_matrix_source(self, spec: dict, what: str) -> np.ndarray:
        if "file" in spec:
            f = self.path(spec["file"])
            if not f.exists():
                raise ConfigError(f"{what} file not found: {f}")
            try:
                return load_complex_array(f)
            except (ValueError, TypeError, json.JSONDecodeError) as exc:
                raise ConfigError(f"{what} file unreadable: {exc}") from exc
        if "matrix" in spec:
            return parse_matrix(spec["matrix"], what)
        if "tensor" in spec:
            arr = _complex(spec["tensor"], what)
            return complex_from_pairs(arr) if arr.ndim == 5 else arr.astype(complex)
        raise ConfigError(f"{what}: need 'file' or inline data")

    def lattice(self) -> LatticeConfig | None:
        """Lattice description when h1 is a tight-binding chain, else None."""
        kind = self.h1.get("type")
        if kind not in ("tight_binding", "harmonic"):
            return None
        j = float(self.h1.get("J", 1.0))
        a = float(self.h1.get("spacing", 1.0))
        if j <= 0:
            raise ConfigError(f"h1.J must be positive, got {j}")
        potential = None
        tilt = 0.0
        boundary = self.h1.get("boundary", "open" if kind == "harmonic" else "periodic")
        if kind == "tight_binding":
            tilt = float(self.h1.get("F", self.h1.get("tilt", 0.0)))
        else:
            k = float(self.h1.get("k", 1.0))
            c = float(self.h1.get("center", (self.d - 1) / 2))
            x = np.arange(self.d)
            potential = tuple(0.5 * k * (x - c) ** 2)
        g = float(self.h2.get("g", 0.0)) if self.h2.get("type") == "contact" else 0.0
        try:
            return LatticeConfig(self.d, a, boundary, tilt, g, 1.0 / (2 * j * a * a), potential)
        except ValueError as exc:
            raise ConfigError(f"h1: {exc}") from exc

    def build_h1(self) -> OneBodyOperator:
        kind = self.h1.get("type")
        if kind in ("tight_binding", "harmonic"):
            return self.lattice().one_body()
        if kind == "explicit":
            m = self._load_matrix_source(self.h1, "h1")
        else:
            raise ConfigError(f"h1.type must be tight_binding, harmonic or explicit, got {kind!r}")
        if m.shape != (self.d, self.d):
            raise ConfigError(f"h1 has shape {m.shape}, expected ({self.d}, {self.d})")
        dev = max_hermitian_deviation(m)
        if dev > HERMITIAN_TOL:
            raise ConfigError(f"h1 not Hermitian (max dev = {dev:.3e})")
        return OneBodyOperator(m)

    def build_h2(self) -> TwoBodyOperator:
        kind = self.h2.get("type", "none")
        if kind == "none":
            return TwoBodyOperator.zero(self.d)
        if kind == "contact":
            return TwoBodyOperator.contact(self.d, float(self.h2.get("g", 0.0)))
        if kind != "explicit":
            raise ConfigError(f"h2.type must be contact, explicit or none, got {kind!r}")
        t = self._load_matrix_source(self.h2, "h2")
        if t.shape != (self.d,) * 4:
            raise ConfigError(f"h2 has shape {t.shape}, expected {(self.d,) * 4}")
        try:
            return TwoBodyOperator(t)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_initial(self) -> DensityMatrix:
        kind = self.initial.get("type")
        if kind == "product":
            c = self._amplitudes()
            norm = float(np.sum(np.abs(c) ** 2))
            if abs(norm - 1) > 1e-9:
                if not self.initial.get("normalize", False):
                    raise ConfigError(f"initial product amplitudes not normalized (|c|^2 = {norm:.12g})")
                c = c / np.sqrt(norm)
            return product_state_density(c, self.n)
        basis = enumerate_sector(self.d, self.n)
        if kind == "fock":
            occ = tuple(int(x) for x in self.initial.get("n", ()))
            if len(occ) != self.d or sum(occ) != self.n or min(occ) < 0:
                raise ConfigError(f"initial fock occupations {list(occ)} do not fit d={self.d}, N={self.n}")
            m = np.zeros((basis.dim, basis.dim), dtype=complex)
            k = basis.index(occ)
            m[k, k] = 1.0
            return DensityMatrix(basis, m)
        if kind == "explicit":
            m = self._load_matrix_source(self.initial, "initial state")
            if m.shape != (basis.dim, basis.dim):
                raise ConfigError(f"initial state has shape {m.shape}, sector size is {basis.dim}")
            try:
                return DensityMatrix(basis, m)
            except ValueError as exc:
                raise ConfigError(f"initial state invalid: {exc}") from exc
            except ArithmeticError as exc:
                raise ConfigError(f"initial state invalid: {exc}") from exc
        raise ConfigError(f"initial.type must be product, fock or explicit, got {kind!r}")

    def _amplitudes(self) -> np.ndarray:
        if "c" in self.initial:
            c = parse_vector(self.initial["c"], "initial.c")
        elif "gaussian" in self.initial:
            g = self.initial["gaussian"]
            x = np.arange(self.d, dtype=float)
            x0 = float(g.get("center", (self.d - 1) / 2))
            w = float(g.get("width", 1.0))
            k0 = float(g.get("k0", 0.0))
            c = np.exp(-((x - x0) ** 2) / (4 * w * w) + 1j * k0 * x)
            c = c / np.linalg.norm(c)
        else:
            raise ConfigError("initial product state needs 'c' or 'gaussian'")
        if c.size != self.d:
            raise ConfigError(f"initial.c has {c.size} entries, expected d={self.d}")
        return c

    def quadrature(self) -> QuadratureSpec:
        try:
            return QuadratureSpec(**self.quad)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"quad: {exc}") from exc

    def sector_dimensions(self) -> dict:
        ms = sorted({1, self.m, min(self.m + 1, self.n), self.n})
        return {k: sector_dimension(self.d, k) for k in ms}

    def check_caps(self) -> None:
        cap = max_dimension()
        dim = sector_dimension(self.d, self.n)
        if dim > cap:
            raise DimensionOverflowError(f"sector (d={self.d}, N={self.n}) has dimension {dim} > cap {cap}")


def config_from_dict(data: dict, base_dir=None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        grid = data.get("grid", {})
        out = data.get("outputs", {})
        return ScenarioConfig(
            d=data["d"],
            n=data["N"],
            m=data.get("M", 1),
            h1=dict(data["h1"]),
            h2=dict(data.get("h2", {"type": "none"})),
            initial=dict(data["initial_state"]),
            t1=float(grid["t1"]),
            dt_out=float(grid["dt_out"]),
            engines=tuple(data.get("engines", ("exact",))),
            observables=tuple(data.get("observables", DEFAULT_OBSERVABLES)),
            output_dir=str(out.get("dir", "out")),
            prefix=str(out.get("prefix", data.get("name", "run"))),
            quad=dict(data.get("quad", {})),
            seed=int(data.get("seed", 0)),
            name=str(data.get("name", "scenario")),
            base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
            raw=data,
        )
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} at line {exc.lineno}") from exc
    return config_from_dict(data, p.parent)

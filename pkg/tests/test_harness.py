import json

import numpy as np
import pytest

from boserdm.errors import ConfigError, DimensionOverflowError
from boserdm.harness import load_config, run_scenario, validate_scenario
from boserdm.harness.cli import main
from boserdm.harness.config import config_from_dict, parse_matrix
from boserdm.harness.observables import (
    dft_matrix,
    momentum_distribution,
    natural_orbital_occupations,
    occupations,
    revival_time,
)
from boserdm.serialization import save_complex_array


def base(tmp_path, **over):
    cfg = {
        "name": "small",
        "d": 3,
        "N": 2,
        "h1": {"type": "tight_binding", "J": 1.0, "boundary": "open"},
        "h2": {"type": "contact", "g": 0.5},
        "initial_state": {"type": "product", "c": [0.6, 0.8, 0.0]},
        "grid": {"t1": 1.0, "dt_out": 0.1},
        "engines": ["exact", "bbgky_check", "mean_field", "gpe"],
        "observables": ["occupations", "momentum", "purity", "natural_orbitals", "energy", "trace_distance"],
        "outputs": {"dir": str(tmp_path / "out"), "prefix": "small"},
    }
    cfg.update(over)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def read_csv(path):
    return np.genfromtxt(path, delimiter=",", names=True)


def test_run_writes_csv_and_manifest(tmp_path):
    cfg = config_from_dict(base(tmp_path))
    manifest = run_scenario(cfg)
    out = tmp_path / "out"
    assert set(manifest["engines"]) == {"exact", "bbgky_check", "mean_field", "gpe"}
    for eng, info in manifest["engines"].items():
        assert info["equation"]
        data = read_csv(out / info["csv"])
        assert len(data) == info["rows"] == 11
        occ = np.stack([data[f"n_{k}"] for k in range(3)], axis=1)
        assert np.max(np.abs(occ.sum(axis=1) - 2)) < 1e-8
        mom = np.stack([data[f"p_{k}"] for k in range(3)], axis=1)
        assert np.max(np.abs(mom.sum(axis=1) - 2)) < 1e-8
    exact = read_csv(out / "small_exact.csv")
    assert np.max(np.abs(exact["trace_distance"])) == 0
    assert np.max(read_csv(out / "small_bbgky_check.csv")["bbgky_residual"]) < 1e-12
    mf, gpe = read_csv(out / "small_mean_field.csv"), read_csv(out / "small_gpe.csv")
    assert np.max(np.abs(mf["n_0"] - gpe["n_0"])) < 1e-9
    saved = json.loads((out / "small_manifest.json").read_text())
    assert saved["sector_dimensions"] == {"1": 3, "2": 6}
    assert saved["versions"]["boserdm"]


def test_runs_are_byte_identical(tmp_path):
    cfg = base(tmp_path, engines=["exact", "mean_field"])
    run_scenario(config_from_dict(cfg))
    first = (tmp_path / "out" / "small_exact.csv").read_bytes(), (tmp_path / "out" / "small_mean_field.csv").read_bytes()
    run_scenario(config_from_dict(cfg))
    second = (tmp_path / "out" / "small_exact.csv").read_bytes(), (tmp_path / "out" / "small_mean_field.csv").read_bytes()
    assert first == second


def test_noninteracting_mean_field_is_exact(tmp_path):
    cfg = base(tmp_path, h2={"type": "none"}, engines=["mean_field"], observables=["trace_distance"],
               grid={"t1": 10.0, "dt_out": 0.5})
    run_scenario(config_from_dict(cfg))
    data = read_csv(tmp_path / "out" / "small_mean_field.csv")
    assert np.max(data["trace_distance"]) < 1e-8


def test_dissipative_engine_columns(tmp_path):
    cfg = base(tmp_path, d=2, h1={"type": "explicit", "matrix": [[0, -1], [-1, 0]]},
               initial_state={"type": "product", "c": [1, 0]}, engines=["dissipative"],
               observables=["purity"], grid={"t1": 0.5, "dt_out": 0.25})
    manifest = run_scenario(config_from_dict(cfg))
    cols = manifest["engines"]["dissipative"]["columns"]
    assert cols == ["time", "purity", "diag_trace", "diag_purity", "diag_min_eig_rho", "diag_min_eig_gamma"]
    data = read_csv(tmp_path / "out" / "small_dissipative.csv")
    assert np.allclose(data["purity"], data["diag_purity"])
    assert data["purity"][-1] < 1


def test_config_variants(tmp_path):
    cfg = config_from_dict(base(tmp_path, h1={"type": "harmonic", "J": 1.0, "k": 0.5}))
    h1 = cfg.build_h1().coeffs
    assert np.allclose(np.diag(h1).real, 2 + 0.25 * (np.arange(3) - 1.0) ** 2)
    cfg = config_from_dict(base(tmp_path, initial_state={"type": "fock", "n": [1, 1, 0]}))
    assert abs(cfg.build_initial().trace() - 1) < 1e-14
    cfg = config_from_dict(base(tmp_path, initial_state={"type": "product", "c": [1, 1, 0], "normalize": True}))
    assert abs(cfg.build_initial().purity() - 1) < 1e-12
    g = config_from_dict(base(tmp_path, initial_state={"type": "product", "gaussian": {"center": 1, "width": 1}}))
    assert abs(g.build_initial().trace() - 1) < 1e-12
    assert np.allclose(parse_matrix([[[1, 2], [0, 0]], [[0, 0], [1, 0]]], "m"), [[1 + 2j, 0], [0, 1]])


@pytest.mark.parametrize("change, match", [
    ({"d": 0}, "d must be"),
    ({"grid": {"t1": 1.0, "dt_out": 0.3}}, "does not divide"),
    ({"engines": ["nope"]}, "engines"),
    ({"h1": {"type": "explicit", "matrix": [[0, 1, 0], [0, 0, 0], [0, 0, 0]]}}, "not Hermitian"),
    ({"initial_state": {"type": "product", "c": [1, 1, 0]}}, "not normalized"),
    ({"initial_state": {"type": "fock", "n": [2, 1, 0]}}, "do not fit"),
    ({"M": 2, "engines": ["bbgky_check"]}, "M < N"),
])
def test_config_errors(tmp_path, change, match):
    with pytest.raises(ConfigError, match=match):
        cfg = config_from_dict(base(tmp_path, **change))
        run_scenario(cfg)


def test_mean_field_needs_condensate(tmp_path):
    cfg = config_from_dict(base(tmp_path, initial_state={"type": "fock", "n": [1, 1, 0]}, engines=["mean_field"]))
    with pytest.raises(ConfigError, match="condensate"):
        validate_scenario(cfg)


def test_dimension_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("BOSERDM_MAX_DIM", "5")
    with pytest.raises(DimensionOverflowError):
        validate_scenario(config_from_dict(base(tmp_path)))


def test_cli_validate_and_run(tmp_path, capsys):
    p = write(tmp_path, base(tmp_path, engines=["exact"]))
    assert main(["validate", str(p)]) == 0
    assert "OK dim(d=3,N=1)=3 dim(d=3,N=2)=6" in capsys.readouterr().out
    assert main(["run", str(p)]) == 0
    assert (tmp_path / "out" / "small_exact.csv").exists()


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    bad = write(tmp_path, base(tmp_path, h1={"type": "explicit", "matrix": [[0, 1, 0], [0, 0, 0], [0, 0, 0]]}))
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("boserdm: error code=2 kind=ConfigError:") and "not Hermitian" in err
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    assert main(["validate", str(garbled)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    big = write(tmp_path, base(tmp_path, d=12, N=12, h1={"type": "tight_binding", "J": 1.0},
                               initial_state={"type": "fock", "n": [1] * 12}), "big.json")
    assert main(["validate", str(big)]) == 3
    assert "kind=DimensionOverflowError" in capsys.readouterr().err


def test_load_config_resolves_relative_paths(tmp_path):
    save_complex_array(tmp_path / "h1.json", np.array([[0.0, -1.0], [-1.0, 0.0]]))
    cfg = base(tmp_path, d=2, h1={"type": "explicit", "file": "h1.json"}, initial_state={"type": "product", "c": [1, 0]})
    loaded = load_config(write(tmp_path, cfg))
    assert np.allclose(loaded.build_h1().coeffs, [[0, -1], [-1, 0]])


def test_observables():
    d, n = 4, 3
    f = dft_matrix(d)
    assert np.allclose(f @ f.conj().T, np.eye(d))
    x = np.arange(d)
    phi = np.exp(2j * np.pi * 1 * x / d) / np.sqrt(d)
    rho = np.outer(phi, phi.conj())
    assert np.allclose(momentum_distribution(rho, n), [0, n, 0, 0])
    assert np.allclose(occupations(rho, n), n / d)
    lam = natural_orbital_occupations(np.diag([0.5, 0.3, 0.2, 0.0]), n)
    assert np.allclose(lam, n * np.array([0.5, 0.3, 0.2, 0.0]))


def test_revival_time():
    t = np.linspace(0, 10, 1001)
    w = 2 * np.pi / 3.0
    series = np.stack([np.cos(w * t) + 0.05 * np.sin(40 * t), np.sin(w * t)], axis=1)
    assert abs(revival_time(t, series) - 3.0) < 0.05
    assert revival_time(t, np.ones((t.size, 2))) is None

import json

import numpy as np
import pytest

from radgas.cli import main
from radgas.config import ExperimentConfig, resolve_key
from radgas.errors import ConfigError, FieldFormatError, RegimeError
from radgas.fieldio import dump_field, load_field, read_header
from radgas.grid import Grid
from radgas.harness import run_experiment, run_sweep, validity_horizon
from radgas.initial_data import build, gaussian

BASE = """
[grid]
n = 1
N = 256
L = 128

[initial]
name = gaussian
amplitude = 0.1
width = 2.0

[integrator]
dt = 0.1
outputs = 32

[run]
figures = false
"""


def cfg(extra=None, text=BASE):
    return ExperimentConfig.from_string(text, extra)


# -- config ---------------------------------------------------------------------------


def test_config_defaults_and_aliases():
    c = cfg()
    assert c.grid() == Grid(1, 256, 128.0)
    assert c.sobolev_s == 3 and c.suites == ("linear", "nonlinear-decay", "profile")
    assert c.data["integrator"]["scheme"] == "exp-rk4"
    c2 = c.with_overrides({"amplitude": "0.01", "grid.N": 512, "suites": "linear"})
    assert c2.data["initial"]["amplitude"] == 0.01 and c2.grid().N == 512
    assert c2.suites == ("linear",)
    assert resolve_key("n") == ("grid", "n") and resolve_key("N") == ("grid", "N")


def test_config_digest_stable_and_ignores_output_dir():
    a, b = cfg(), cfg({"run.output_dir": "/elsewhere"})
    assert a.digest() == b.digest()
    assert a.digest() != cfg({"dt": 0.05}).digest()
    assert ExperimentConfig.from_string(a.to_ini()).digest() == a.digest()


@pytest.mark.parametrize("bad", [
    {"grid.N": 7},
    {"run.s": 2},
    {"width": 0.5},
    {"run.suites": "linear, bogus"},
    {"integrator.scheme": "rk45"},
    {"integrator.outputs": 1},
    {"integrator.t_end": 0.05},
    {"initial.name": "sinc"},
    {"flux.name": "polynomial"},
    {"initial.center": "1 2"},
])
def test_config_rejects_invalid(bad):
    with pytest.raises(ConfigError):
        cfg(bad)


def test_config_rejects_unknown_and_missing(tmp_path):
    with pytest.raises(ConfigError, match="required"):
        ExperimentConfig.from_string("[grid]\nn = 1\nN = 64\n")
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_string(BASE + "\n[flux]\nfoo = 1\n")
    with pytest.raises(ConfigError, match="unknown sections"):
        ExperimentConfig.from_string(BASE + "\n[extra]\na = 1\n")
    with pytest.raises(ConfigError, match="not found"):
        ExperimentConfig.from_file(tmp_path / "missing.ini")
    with pytest.raises(ConfigError):
        resolve_key("nosuch")


def test_initial_families():
    g = Grid(2, 64, 40.0)
    u = build(g, "band_limited_random", {"seed": 3, "band": 5, "amplitude": 0.2})
    assert np.isclose(np.abs(u).max(), 0.2)
    assert np.array_equal(u, build(g, "band_limited_random", {"seed": 3, "band": 5, "amplitude": 0.2}))
    d = build(g, "derivative_of_gaussian", {"width": 2.0, "axis": 1})
    assert abs(g.cell_volume * d.sum()) < 1e-15
    m = build(g, "gaussian_mixture", {"components": "1 2 0 0; 0.5 2 3 3", "amplitude": 0.1})
    origin = m[g.N // 2, g.N // 2]
    assert np.isclose(origin, 0.1 * (1 + 0.5 * np.exp(-18 / 8)), rtol=1e-12)
    with pytest.raises(ConfigError):
        build(g, "gaussian_mixture", {"components": "1 2 0"})


# -- field dumps ------------------------------------------------------------------------


def test_field_round_trip_bit_exact(tmp_path):
    g = Grid(2, 16, 3.5)
    f = np.random.default_rng(0).standard_normal(g.shape)
    dump_field(tmp_path / "f.bin", g, f, {"t": 1.5})
    g2, f2 = load_field(tmp_path / "f.bin", g)
    assert g2 == g and f2.tobytes() == f.tobytes()
    v = np.random.default_rng(1).standard_normal((2,) + g.shape)
    dump_field(tmp_path / "v.bin", g, v)
    assert load_field(tmp_path / "v.bin")[1].tobytes() == v.tobytes()


def test_field_header_only(tmp_path):
    g = Grid(3, 8, 1.0)
    dump_field(tmp_path / "f.bin", g, np.zeros(g.shape), {"t": 2.0})
    h = read_header(tmp_path / "f.bin")
    assert (h["n"], h["N"], h["L"], h["endianness"], h["version"]) == (3, 8, 1.0, "little", 1)
    assert h["meta"] == {"t": 2.0}


def test_field_errors(tmp_path):
    g = Grid(1, 16, 1.0)
    dump_field(tmp_path / "f.bin", g, np.ones(16))
    with pytest.raises(FieldFormatError, match="does not match"):
        load_field(tmp_path / "f.bin", Grid(1, 32, 1.0))
    raw = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(b"X" + raw[1:])
    with pytest.raises(FieldFormatError, match="not a radgas"):
        load_field(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(FieldFormatError, match="payload"):
        load_field(tmp_path / "short.bin")
    v2 = bytearray(raw)
    v2[8] = 9
    (tmp_path / "ver.bin").write_bytes(bytes(v2))
    with pytest.raises(FieldFormatError, match="version"):
        load_field(tmp_path / "ver.bin")
    with pytest.raises(FieldFormatError):
        dump_field(tmp_path / "x.bin", g, np.ones(8))


# -- harness -------------------------------------------------------------------------------


def test_validity_horizon_combines_rules():
    g = Grid(1, 256, 128.0)
    T, offset, var = validity_horizon(g, gaussian(g, 1.0, 2.0))
    assert offset < 1e-12 and abs(var - 4.0) < 1e-9
    from radgas.propagators import box_validity_horizon
    tail = box_validity_horizon(g, 4.0)
    assert T == pytest.approx(min(tail, ((128 - 2 * 4.0) / 12) ** 2 - 1))
    off = validity_horizon(g, gaussian(g, 1.0, 2.0, [20.0]))
    assert off[1] == pytest.approx(20.0) and off[0] < T


def test_flux_zero_linear_suite(tmp_path):
    rec = run_experiment(cfg({"flux.name": "zero", "suites": "linear"}), tmp_path)
    names = [c.name for _, c in rec.all_claims()]
    assert any(n.startswith("G(t) ratio trend") for n in names)
    assert all(c.verdict is not None for _, c in rec.all_claims())
    assert rec.claim("linear", "G(t) ratio trend k=0").verdict
    assert rec.steps == 0


def test_zero_amplitude_all_fits_skipped(tmp_path):
    rec = run_experiment(cfg({"amplitude": 0.0}), tmp_path)
    for suite, c in rec.all_claims():
        if c.name in ("mass drift",):
            continue
        assert c.status == "skip" and c.reason, (suite, c.name)
    assert all(c.reason == "zero field" for _, c in rec.all_claims()
               if c.status == "skip" and "exponent" in c.name)


def test_every_suite_has_verdict_or_reason(tmp_path):
    rec = run_experiment(cfg(), tmp_path)
    assert set(rec.claims) == {"linear", "nonlinear-decay", "profile"}
    assert rec.claim("profile", "asymptotic profile").reason == "theorem hypothesis n >= 2"
    summary = json.loads((tmp_path / "summary.json").read_text())
    for suite in summary["suites"].values():
        for c in suite["claims"]:
            assert {"theory", "measured", "tolerance", "verdict"} <= set(c)
            assert c["verdict"] in ("pass", "fail") or c["reason"]
    for rel_path in summary["series"].values():
        assert (tmp_path / rel_path).read_text().startswith("t,value\n")
    assert (tmp_path / "log.txt").exists()


def test_determinism_byte_identical(tmp_path):
    c = cfg({"run.save_fields": True})
    run_experiment(c, tmp_path / "a")
    run_experiment(c, tmp_path / "b")
    assert (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()
    assert (tmp_path / "a/fields/u_final.bin").read_bytes() == (tmp_path / "b/fields/u_final.bin").read_bytes()


def test_regime_error_carries_amplitude(tmp_path):
    c = cfg({"amplitude": 30.0, "integrator.blowup_factor": 1.2, "suites": "nonlinear-decay"})
    with pytest.raises(RegimeError) as info:
        run_experiment(c, tmp_path)
    assert info.value.amplitude == pytest.approx(30.0)
    assert "amplitude" in str(info.value)


def test_no_write_mode(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rec = run_experiment(cfg({"suites": "linear"}), write=False)
    assert rec.output_dir is None and not any(tmp_path.iterdir())


def test_sweep_empty_and_partial_failure(tmp_path):
    assert run_sweep(cfg(), "amplitude", [], tmp_path) == []
    entries = run_sweep(cfg({"suites": "linear"}), "width", [2.0, 0.1], tmp_path)
    assert entries[0].record is not None and entries[1].record is None
    assert "ConfigError" in entries[1].error
    table = (tmp_path / "sweep.csv").read_text().splitlines()
    assert table[0].startswith("width,status") and table[2].startswith("0.1,error")


def test_amplitude_sweep_converges_to_linear(tmp_path):
    base = cfg({"suites": "linear,nonlinear-decay"})
    entries = run_sweep(base, "amplitude", [1e-1, 1e-2, 1e-3], tmp_path, workers=3)
    gaps = []
    for e in entries:
        lin = e.record.claim("linear", "|d^0 ubar|_L2 exponent").measured
        nl = e.record.claim("nonlinear-decay", "|d^0 u|_L2 exponent").measured
        gaps.append(abs(nl - lin))
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-4
    assert json.loads((tmp_path / "sweep.json").read_text())["axis"] == "amplitude"


def test_resolution_sweep_grid_independent(tmp_path):
    text = BASE.replace("L = 128", "L = 64")
    base = cfg({"suites": "nonlinear-decay"}, text)
    entries = run_sweep(base, "grid.N", [64, 128, 256], tmp_path)
    ex = [e.record.claim("nonlinear-decay", "|d^1 u|_L2 exponent").measured for e in entries]
    assert abs(ex[2] - ex[1]) < 0.02


# -- command line ------------------------------------------------------------------------------


def _write(tmp_path, text=BASE):
    p = tmp_path / "exp.ini"
    p.write_text(text)
    return p


def test_cli_verify_linear(tmp_path, capsys):
    p = _write(tmp_path, BASE.replace("L = 128", "L = 512").replace("N = 256", "N = 1024"))
    code = main(["verify-linear", str(p), "-o", str(tmp_path / "out")])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "suite,claim,theory,measured,tolerance,comparator,verdict"
    assert all(line.startswith("linear,") for line in lines[1:])
    assert code == (0 if all(line.endswith(",pass") for line in lines[1:]) else 1)
    assert code == 0


def test_cli_run_exit_code_reflects_failures(tmp_path, capsys):
    # a short box makes the G - G0 fit miss its bound
    p = _write(tmp_path)
    code = main(["run", str(p), "-o", str(tmp_path / "out"), "--set", "suites=linear"])
    out = capsys.readouterr().out
    assert code == 1 and ",fail" in out


def test_cli_fit(tmp_path, capsys):
    t = np.concatenate([[0.0], np.geomspace(0.1, 300, 30)])
    csv = tmp_path / "s.csv"
    csv.write_text("t,value\n" + "".join(f"{float(a)!r},{2 * (1 + float(a)) ** -0.5!r}\n" for a in t))
    assert main(["fit", str(csv), "--theory", "-0.5"]) == 0
    assert main(["fit", str(csv), "--theory", "-1.0", "--tolerance", "0.1"]) == 1
    assert main(["fit", str(csv), "--theory", "-0.5", "--window", "1", "300",
                 "--log-correction"]) == 0
    rows = [r for r in capsys.readouterr().out.splitlines() if r.startswith("fit,")]
    assert len(rows) == 3 and rows[2].split(",")[-1] != ""


def test_cli_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "none.ini")]) == 2
    p = _write(tmp_path)
    assert main(["run", str(p), "--set", "width=0.1"]) == 2
    assert main(["run", str(p), "--set", "noequals"]) == 2
    assert main(["run", str(p), "-o", str(tmp_path / "o"), "--set", "amplitude=30",
                 "--set", "integrator.blowup_factor=1.2", "--set", "suites=nonlinear-decay"]) == 3
    err = capsys.readouterr().err
    assert "RegimeError" in err


def test_cli_sweep(tmp_path, capsys):
    p = _write(tmp_path)
    code = main(["sweep", str(p), "--axis", "amplitude", "--values", "0.1,0.01",
                 "-o", str(tmp_path / "sw"), "--set", "suites=nonlinear-decay"])
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("amplitude,suite,claim")
    assert {line.split(",")[0] for line in out[1:]} == {"0.1", "0.01"}
    assert code in (0, 1)
    assert (tmp_path / "sw" / "sweep.csv").exists()

import json

import numpy as np
import pytest

from twophoton import cli
from twophoton.grid import make_grid
from twophoton.observables import MomentReport
from twophoton.scenario import (
    BUILTINS,
    SCENARIO_SCHEMA,
    ElementError,
    ScenarioError,
    apply_override,
    builtin_text,
    export_grid,
    from_dict,
    load_scenario,
    parse_scenario,
    read_grid,
    run_scenario,
)
from twophoton.state import BiphotonAmplitude, correlated_gaussian

MINIMAL = {
    "name": "minimal",
    "grid": {"n": 64, "dt": 0.25},
    "modes": [{"label": "1", "beta2": 1.0}, {"label": "2"}],
    "initial": {"builder": "correlated_gaussian", "pair": ["1", "2"], "sigma_plus": 2.0, "sigma_minus": 1.0},
    "elements": [{"type": "dispersion", "mode": "1", "z": 0.5}],
}


def _doc(**changes):
    d = json.loads(json.dumps(MINIMAL))
    d.update(changes)
    return d


def _write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


# ----------------------------------------------------------------- parsing

def test_minimal_parses():
    s = parse_scenario(json.dumps(MINIMAL))
    assert s.name == "minimal"
    assert s.grid == make_grid(64, 0.25)
    assert s.modes["1"].beta2 == 1.0
    assert [e.type for e in s.elements] == ["dispersion"]


def test_undeclared_mode_names_element():
    d = _doc(elements=[{"type": "dispersion", "mode": "1", "z": 1.0}, {"type": "dispersion", "mode": "3", "z": 1.0}])
    with pytest.raises(ScenarioError) as e:
        parse_scenario(json.dumps(d, indent=2))
    assert "element 1" in str(e.value)
    assert "'3'" in str(e.value)


def test_diagnostic_has_line_and_field():
    d = _doc(elements=[{"type": "dispersion", "mode": "1", "z": "far"}])
    text = json.dumps(d, indent=2)
    with pytest.raises(ScenarioError) as e:
        parse_scenario(text)
    err = e.value
    assert err.path == "elements[0].z"
    assert text.splitlines()[err.line - 1].strip().startswith('"z"')


def test_json_syntax_error_position():
    with pytest.raises(ScenarioError) as e:
        parse_scenario('{\n  "grid": {\n  "n": 8,,\n}')
    assert e.value.line == 3


@pytest.mark.parametrize(
    "doc",
    [
        _doc(colour="blue"),
        _doc(grid={"n": 64, "dt": 0.25, "bins": 3}),
        _doc(elements=[{"type": "dispersion", "mode": "1", "z": 1.0, "zz": 1}]),
        _doc(elements=[{"type": "warp_drive", "mode": "1"}]),
        _doc(grid={"n": 64, "dt": -0.25}),
        _doc(grid={"n": 60, "dt": 0.25}),
        _doc(modes=[{"label": "1"}, {"label": "1"}]),
        _doc(elements=[{"type": "coupler", "modes": ["1", "1"], "kappaL": 0.5}]),
        _doc(elements=[{"type": "fwm_split_step", "modes": ["1", "2"], "L": 1.0, "dz": 0.3}]),
        _doc(elements=[{"type": "n_mode_coupler", "modes": ["1", "2"], "kappa": [[0, 1]], "L": 1.0}]),
        _doc(references=[{"check": "image", "pair": ["1", "2"], "element": 0}]),
    ],
)
def test_invalid_configs_rejected(doc):
    with pytest.raises(ScenarioError):
        from_dict(doc)


def test_schema_is_published():
    from importlib import resources

    shipped = json.loads(resources.files("twophoton").joinpath("scenario.schema.json").read_text())
    assert shipped == json.loads(json.dumps(SCENARIO_SCHEMA))


def test_franson_golden_parse():
    s = load_scenario("franson")
    assert s.grid == make_grid(2048, 0.0725)
    assert s.modes["1"].beta2 * s.elements[0].params["z"] == 2.0
    assert s.modes["2"].beta2 * s.elements[1].params["z"] == -2.0
    assert s.initial == {
        "builder": "correlated_gaussian",
        "pair": ["1", "2"],
        "sigma_plus": 14.0,
        "sigma_minus": 0.29,
    }
    assert [(e.type, e.params["mode"]) for e in s.elements] == [("dispersion", "1"), ("dispersion", "2")]
    assert s.references[0]["check"] == "tau_minus_restored"


@pytest.mark.parametrize("name", BUILTINS)
def test_every_builtin_parses(name):
    assert parse_scenario(builtin_text(name)).name == name


def test_override_paths():
    d = apply_override(MINIMAL, "elements.0.z=2.5")
    assert d["elements"][0]["z"] == 2.5
    assert MINIMAL["elements"][0]["z"] == 0.5
    d = apply_override(d, "grid.n=128")
    assert from_dict(d).grid.n == 128
    assert apply_override(MINIMAL, "name=other")["name"] == "other"
    with pytest.raises(ScenarioError):
        apply_override(MINIMAL, "elements.7.z=1")
    with pytest.raises(ScenarioError):
        apply_override(MINIMAL, "grid.n")


# ------------------------------------------------------------------ export

def test_export_row_count(tmp_path):
    g = make_grid(8, 0.5)
    amp = BiphotonAmplitude(g, np.arange(64).reshape(8, 8) * (1 + 0.5j))
    p = tmp_path / "g.csv"
    export_grid(amp, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,tprime,re,im,absq"
    assert len(lines) == 65
    t, tp, re, im, absq = map(float, lines[2].split(","))
    assert (t, tp) == (g.t[0], g.t[1])
    assert re + 1j * im == amp.data[0, 1]
    assert absq == pytest.approx(abs(amp.data[0, 1]) ** 2)


def test_export_round_trip(tmp_path, rng):
    g = make_grid(16, 0.3, 1.1)
    amp = BiphotonAmplitude(g, rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)))
    p = tmp_path / "g.csv"
    export_grid(amp, p)
    back = read_grid(p)
    assert back.grid == g
    assert np.array_equal(back.data, amp.data)


def test_file_initial_state(tmp_path):
    g = make_grid(64, 0.25)
    export_grid(correlated_gaussian(g, 2.0, 1.0), tmp_path / "init.csv")
    d = _doc(initial={"builder": "file", "pair": ["1", "2"], "path": "init.csv"})
    s = parse_scenario(json.dumps(d), tmp_path)
    ref = run_scenario(parse_scenario(json.dumps(MINIMAL)))
    got = run_scenario(s)
    assert np.allclose(got.final.amplitude("1", "2").data, ref.final.amplitude("1", "2").data, atol=1e-14)


def test_metrics_document(tmp_path):
    run_scenario(parse_scenario(json.dumps(MINIMAL)), tmp_path)
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert set(m["stages"]) == {"initial", "final"}
    pair = m["stages"]["final"]["pairs"]["1-2"]
    assert set(pair["moments"]) == set(MomentReport.__dataclass_fields__)
    assert pair["probability"] == pytest.approx(1.0)
    assert (tmp_path / "grids" / "1-2_final.csv").is_file()
    assert (tmp_path / "report.txt").read_text().startswith("scenario: minimal")


def test_all_stage_grids(tmp_path):
    d = _doc(outputs={"pairs": [["1", "2"]], "grids": "all", "metrics": ["probability", "schmidt"]})
    rep = run_scenario(from_dict(d), tmp_path)
    names = sorted(p.name for p in (tmp_path / "grids").iterdir())
    assert names == ["1-2_final.csv", "1-2_initial.csv"]
    assert rep.metrics["stages"]["final"]["pairs"]["1-2"]["schmidt_number"] > 1


def test_runs_are_byte_identical(tmp_path):
    s = parse_scenario(json.dumps(_doc(outputs={"pairs": [["1", "2"]], "grids": "all", "metrics": ["moments"]})))
    run_scenario(s, tmp_path / "a")
    run_scenario(s, tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 4
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_element_error_carries_index():
    d = _doc(elements=[
        {"type": "dispersion", "mode": "1", "z": 0.5},
        {"type": "xpm", "pair": ["1", "2"], "eta": 1.0, "L": 1.0, "bandwidth": 1e9},
    ])
    with pytest.raises(ElementError) as e:
        run_scenario(from_dict(d))
    assert e.value.index == 1
    assert "element 1 (xpm)" in str(e.value)


# --------------------------------------------------------------------- CLI

def test_cli_run_ok(tmp_path, capsys):
    p = _write(tmp_path, MINIMAL)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "out")]) == 0
    assert "outputs written" in capsys.readouterr().out
    assert (tmp_path / "out" / "metrics.json").is_file()


def test_cli_grid_override(tmp_path):
    p = _write(tmp_path, MINIMAL)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o"), "--grid-n", "128", "--override", "elements.0.z=1.0"]) == 0
    m = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert m["grid"]["n"] == 128


def test_cli_validation_exit(tmp_path, capsys):
    p = _write(tmp_path, _doc(colour="blue"))
    assert cli.main(["validate", str(p)]) == 1
    assert "colour" in capsys.readouterr().err
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["validate", str(_write(tmp_path, MINIMAL, "ok.json"))]) == 0


def test_cli_runtime_exit(tmp_path):
    d = _doc(elements=[{"type": "xpm", "pair": ["1", "2"], "eta": 1.0, "L": 1.0, "bandwidth": 1e9}])
    assert cli.main(["run", str(_write(tmp_path, d)), "--out", str(tmp_path / "o")]) == 2


def test_cli_reference_exit(tmp_path):
    d = json.loads(builtin_text("hom"))
    d["elements"][0]["kappaL"] = 0.3
    assert cli.main(["run", str(_write(tmp_path, d)), "--out", str(tmp_path / "o")]) == 3
    assert "FAIL coincidence_null" in (tmp_path / "o" / "report.txt").read_text()


def test_cli_builtin_by_name(tmp_path):
    assert cli.main(["run", "hom", "--out", str(tmp_path / "hom")]) == 0


def test_cli_list_builtins(capsys):
    assert cli.main(["list-builtins"]) == 0
    out = capsys.readouterr().out
    assert [line.split()[0] for line in out.splitlines()] == list(BUILTINS)


@pytest.mark.parametrize("name", BUILTINS)
def test_builtin_runs_green(name, builtin_report):
    rep = builtin_report(name)
    assert rep.checks, "every builtin declares a reference check"
    assert rep.passed, [c for c in rep.checks if not c["passed"]]
    assert rep.metrics["stages"]["final"]["total_probability"] == pytest.approx(1.0, abs=1e-6)

import json
import os
import xml.etree.ElementTree as ET

import pytest

from spraysim.cli import OUT_ENV, load_manifest, main, UsageError
from spraysim.field_io import save_field


@pytest.fixture
def field_file(tmp_path, small_field):
    p = tmp_path / "small.json"
    save_field(small_field, p)
    return p


def _manifest(tmp_path, **doc):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_run_writes_tables_and_maps(tmp_path, field_file):
    m = _manifest(tmp_path, fields=[field_file.name], output="out", setups=["M1:multi", "M2:multi"])
    assert main(["run", m]) == 0
    out = tmp_path / "out"
    for name in ("pathlengths.csv", "volumes.csv", "economics.csv", "coverage.csv"):
        assert (out / name).exists()
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert svgs == ["small_M1_multi.svg", "small_M2_multi.svg"]
    ET.parse(out / svgs[0])
    first = (out / "volumes.csv").read_bytes()
    assert main(["run", m, "--no-svg"]) == 0
    assert (out / "volumes.csv").read_bytes() == first


def test_missing_field_keeps_partial_results(tmp_path, field_file, capsys):
    m = _manifest(tmp_path, fields=[field_file.name, "nope.json"], setups=["M1:multi"])
    assert main(["run", m, "--out", str(tmp_path / "o"), "--no-svg"]) == 1
    assert "nope.json" in capsys.readouterr().err
    text = (tmp_path / "o" / "volumes.csv").read_text()
    assert "small" in text


def test_env_var_overrides_output(tmp_path, field_file, monkeypatch):
    m = _manifest(tmp_path, fields=[field_file.name], output="ignored", setups=["M1:one"])
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["run", m, "--no-svg"]) == 0
    assert (tmp_path / "env" / "volumes.csv").exists()
    assert not (tmp_path / "ignored").exists()


@pytest.mark.parametrize("doc", [
    {},
    {"fields": ["a.json"], "setups": ["M3:multi"]},
    {"fields": ["a.json"], "colour": "red"},
    {"fields": ["a.json"], "setups": ["bad"]},
])
def test_bad_manifests_exit_2(tmp_path, doc):
    assert main(["run", _manifest(tmp_path, **doc)]) == 2


def test_bad_invocations_exit_2(tmp_path):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["fig13", "--dg", "0.5,-1"]) == 2
    assert main(["gen-fields", "0"]) == 2
    (tmp_path / "bad.json").write_text("[1]")
    assert main(["run", str(tmp_path / "bad.json")]) == 2


def test_bad_config_exit_2(tmp_path, field_file):
    (tmp_path / "run.cfg").write_text("nozzle_spacing = 0.7\n")
    m = _manifest(tmp_path, fields=[field_file.name], config="run.cfg")
    assert main(["run", m]) == 2


def test_manifest_paths_are_relative_to_manifest(tmp_path):
    m = load_manifest(_manifest(tmp_path, fields=["x.json"], setups=[["M2", "two"]]))
    assert m.fields == [os.path.join(str(tmp_path), "x.json")]
    assert m.setups == [("M2", "two")]
    with pytest.raises(UsageError):
        load_manifest(_manifest(tmp_path, synthetic=0))


def test_gen_fields(tmp_path, capsys):
    assert main(["gen-fields", "3", "--seed", "2", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.glob("*.json")) == ["lshape_02.json", "ngon_01.json", "rectangle_00.json"]
    assert "ha" in capsys.readouterr().out


def test_economics_command(tmp_path, capsys):
    params = tmp_path / "p.txt"
    params.write_text("C_chemical = 10\n")
    assert main(["economics", "--params", str(params), "--out", str(tmp_path)]) == 0
    assert "980,584" in capsys.readouterr().out
    assert len((tmp_path / "table_years.csv").read_text().splitlines()) == 81
    params.write_text("colour = 1\n")
    assert main(["economics", "--params", str(params)]) == 2
    params.write_text("water_ratio = 2\n")
    assert main(["economics", "--params", str(params)]) == 2


def test_fig13_command(tmp_path):
    assert main(["fig13", "--dg", "0.5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "filter_comparison.csv").read_text().count("\n") == 3
    for name in ("filters_grid_dG0.5.svg", "filters_polygon.svg"):
        ET.parse(tmp_path / name)


def test_run_with_synthetic_fields(tmp_path):
    m = _manifest(tmp_path, synthetic=1, seed=1, setups=["M1:multi"])
    assert main(["run", m, "--no-svg"]) == 0
    assert "rectangle_00" in (tmp_path / "out" / "volumes.csv").read_text()

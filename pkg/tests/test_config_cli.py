import json

import numpy as np
import pytest

from smtm.cli import main
from smtm.config import ExperimentConfig, load_config, parse_set_overrides
from smtm.errors import ConfigError, IOFailure, SchemaMismatch, UnknownPreset
from smtm.presets import PRESETS
from smtm.svgplot import Series, render_line_svg, render_svg

MINI_CHAINS = {
    "mode": "chains",
    "target": "gaussian(0,1)^3",
    "radius": 1.7320508075688772,
    "kernels": [
        {"label": "srwm", "kernel": "srwm", "step": 0.6},
        {"label": "smtm-3", "kernel": "smtm", "step": 0.6, "n_candidates": 3, "weight": "gb"},
    ],
    "x0": "stationary",
    "n_seeds": 2,
    "iterations": 80,
    "burn_in": 20,
    "retention": "full",
    "reference": "mean",
}


def test_every_preset_loads():
    assert len(PRESETS) == 8
    for name in PRESETS:
        cfg = load_config(name)
        assert cfg.name == name and cfg.mode in ("chains", "curves", "scaling")


def test_config_file_extends_and_overrides(tmp_path):
    base = tmp_path / "base.json"
    base.write_text(json.dumps(MINI_CHAINS))
    child = tmp_path / "child.json"
    child.write_text(json.dumps({"extends": str(base), "iterations": 50, "name": "child"}))
    cfg = load_config(str(child), overrides={"n_seeds": 3})
    assert cfg.name == "child"
    assert cfg.iterations == 50 and cfg.n_seeds == 3
    assert cfg.target == MINI_CHAINS["target"]  # inherited
    assert isinstance(cfg.kernels, tuple)
    # a file can also extend a built-in preset
    over = tmp_path / "over.json"
    over.write_text(json.dumps({"extends": "large-n", "samples": 5000}))
    cfg2 = load_config(str(over))
    assert cfg2.samples == 5000 and cfg2.mode == load_config("large-n").mode


def test_config_error_paths(tmp_path):
    with pytest.raises(UnknownPreset):
        load_config("no-such-preset")
    bogus = tmp_path / "bogus.json"
    bogus.write_text(json.dumps({**MINI_CHAINS, "frobnicate": 1}))
    with pytest.raises(ConfigError, match="bad config field"):
        load_config(str(bogus))
    notdict = tmp_path / "list.json"
    notdict.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(str(notdict))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(broken))
    loop = tmp_path / "loop.json"
    loop.write_text(json.dumps({"extends": str(loop), "mode": "chains"}))
    with pytest.raises(ConfigError, match="extends chain"):
        load_config(str(loop))


def test_parse_set_overrides():
    out = parse_set_overrides(
        ["iterations=100", "target=gaussian(0,1)^5", 'kernels=[{"label": "a"}]', "lam=null"]
    )
    assert out["iterations"] == 100
    assert out["target"] == "gaussian(0,1)^5"  # not valid JSON, kept as string
    assert out["kernels"] == [{"label": "a"}]
    assert out["lam"] is None
    assert parse_set_overrides(None) == {}
    with pytest.raises(ConfigError):
        parse_set_overrides(["noequals"])
    with pytest.raises(ConfigError):
        parse_set_overrides(["=3"])


def _cfg(**kw):
    base = dict(name="t", mode="chains", kernels=({"label": "a", "kernel": "rwm", "step": 0.5},))
    base.update(kw)
    return ExperimentConfig(**base)


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        _cfg(mode="optimize")
    with pytest.raises(ConfigError):
        _cfg(n_seeds=0)
    with pytest.raises(ConfigError):
        _cfg(iterations=10, burn_in=10)
    with pytest.raises(ConfigError):
        _cfg(kernels=())
    with pytest.raises(ConfigError):
        _cfg(kernels=({"label": "a"}, {"label": "a"}))
    with pytest.raises(ConfigError):
        _cfg(kernels=({"kernel": "rwm"},))
    with pytest.raises(ConfigError):
        _cfg(mode="curves")  # no axis chosen
    with pytest.raises(ConfigError):
        _cfg(mode="curves", centers=(0.1,), lams=(1.0,))
    assert _cfg(mode="curves", n_values=(1, 2)).n_values == (1, 2)
    with pytest.raises(ConfigError):
        _cfg(ell_grid=(0.0, 1.0, 5))
    with pytest.raises(ConfigError):
        _cfg(ell_grid=(1.0, 1.0, 5))
    with pytest.raises(ConfigError):
        _cfg(ell_grid=(0.5, 2.0, 1))
    with pytest.raises(ConfigError):
        _cfg(ell_grid=(0.5, 2.0))
    with pytest.raises(ConfigError):
        _cfg(ell=0.0)


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg_path = tmp_path / "mini.json"
    cfg_path.write_text(json.dumps(MINI_CHAINS))
    out_a = tmp_path / "a"
    code = main(["run", str(cfg_path), "--out", str(out_a), "--set", "iterations=60"])
    assert code == 0
    man = json.loads((out_a / "manifest.json").read_text())
    assert man["config"]["iterations"] == 60
    assert man["outputs"]
    for rel in man["outputs"]:
        assert (out_a / rel).is_file(), rel
    assert "wrote" in capsys.readouterr().out
    # identical config, identical bytes
    out_b = tmp_path / "b"
    assert main(["run", str(cfg_path), "--out", str(out_b), "--set", "iterations=60"]) == 0
    man_b = json.loads((out_b / "manifest.json").read_text())
    assert man["outputs"] == man_b["outputs"]
    # seed override changes the data
    out_c = tmp_path / "c"
    assert main(["run", str(cfg_path), "--out", str(out_c), "--seed", "7"]) == 0
    man_c = json.loads((out_c / "manifest.json").read_text())
    assert man_c["config"]["seed0"] == 7
    assert man_c["outputs"] != man["outputs"]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "no-such-preset"]) == 2
    assert "config error:" in capsys.readouterr().err
    # unwritable output directory is a runtime failure, not a config error
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    cfg_path = tmp_path / "mini.json"
    cfg_path.write_text(json.dumps(MINI_CHAINS))
    assert main(["run", str(cfg_path), "--out", str(blocker)]) == 3
    assert "error:" in capsys.readouterr().err


def test_cli_scaling(capsys):
    code = main(["scaling", "--n", "2", "--weight", "lb",
                 "--samples", "20000", "--grid", "0.5:4.0:6"])
    assert code == 0
    out = capsys.readouterr().out
    assert "ell*=" in out and "acceptance=" in out
    assert main(["scaling", "--grid", "abc"]) == 2
    assert main(["scaling", "--center", "1.5"]) == 2


def test_cli_selftest_filter(capsys):
    assert main(["selftest", "--only", "geometry"]) == 0
    out = capsys.readouterr().out
    assert "PASS geometry-roundtrip" in out
    assert "1/1 checks passed" in out


def test_svg_two_point_polyline(tmp_path):
    out = tmp_path / "p.svg"
    render_line_svg([Series("line", np.array([0.0, 1.0]), np.array([0.0, 1.0]))],
                    "t", "x", "y", out)
    content = out.read_text()
    # plot box is x 76..836, y 462..44: corners land on the box corners
    assert 'points="76.00,462.00 836.00,44.00"' in content
    assert content.count("<polyline") == 1
    out2 = tmp_path / "q.svg"
    render_line_svg([Series("line", np.array([0.0, 1.0]), np.array([0.0, 1.0]))],
                    "t", "x", "y", out2)
    assert out.read_bytes() == out2.read_bytes()


def test_svg_degenerate_inputs(tmp_path):
    out = tmp_path / "empty.svg"
    render_line_svg([], "t", "x", "y", out)
    assert "no data" in out.read_text()
    nan = np.full(3, np.nan)
    render_line_svg([Series("s", nan, nan)], "t", "x", "y", out)
    assert "no data" in out.read_text()
    # constant data must not divide by a zero range
    render_line_svg([Series("s", np.array([1.0, 2.0]), np.array([3.0, 3.0]))],
                    "t", "x", "y", out)
    assert "<polyline" in out.read_text()
    with pytest.raises(IOFailure):
        render_line_svg([], "t", "x", "y", tmp_path / "missing" / "p.svg")


def test_render_svg_from_csv(tmp_path):
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("n,v,k\n1,10,b\n2,5,a\n3,20,b\n")
    out = tmp_path / "g.svg"
    render_svg(csv_path, {"x": "n", "y": "v", "group_by": "k"}, out)
    content = out.read_text()
    assert content.count("<polyline") == 2
    # series are ordered by first appearance in the file
    assert content.index(">b</text>") < content.index(">a</text>")
    render_svg(csv_path, {"x": "n", "y": ["v"], "title": "T"}, out)
    assert ">T</text>" in out.read_text()
    with pytest.raises(SchemaMismatch):
        render_svg(csv_path, {"x": "n"}, out)
    with pytest.raises(SchemaMismatch):
        render_svg(csv_path, {"x": "n", "y": ["v", "k"], "group_by": "k"}, out)
    with pytest.raises(SchemaMismatch):
        render_svg(csv_path, {"x": "n", "y": "missing"}, out)
    with pytest.raises(IOFailure):
        render_svg(tmp_path / "absent.csv", {"x": "n", "y": "v"}, out)

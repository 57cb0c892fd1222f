import csv
import json

import pytest

from minwidth_lab.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, load_config, main, run_all
from minwidth_lab.errors import ConfigInvalid, UnknownExperiment
from minwidth_lab.experiments import (
    EXPERIMENTS,
    KernelCubicConfig,
    PalAreaConfig,
    SlideMonotonicityConfig,
    get_experiment,
    run,
)

SMALL_KERNEL = {"n_identity": 20, "n_kernel": 500, "n_grid": 400}


def test_every_named_experiment_is_registered():
    assert set(EXPERIMENTS) == {
        "cheeger-scan", "pal-area", "torsion-landscape", "vertex-derivative", "trace-compare",
        "hexagon-scan", "slice-symmetry", "kernel-cubic", "slide-monotonicity", "convhull-slide",
        "convergence-study",
    }


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_default_configs_validate_and_round_trip(name):
    cls = get_experiment(name).config
    cfg = cls()
    cfg.validate()
    assert cls.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_unknown_experiment(tmp_path, capsys):
    with pytest.raises(UnknownExperiment):
        get_experiment("no-such-thing")
    assert main(["no-such-thing", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "unknown experiment" in capsys.readouterr().err


def test_unknown_key_and_bad_type_rejected(tmp_path):
    with pytest.raises(ConfigInvalid) as info:
        PalAreaConfig.from_dict({"n_points": "many", "colour": 3})
    msg = str(info.value)
    assert "colour" in msg and "n_points" in msg
    (tmp_path / "c.json").write_text(json.dumps({"bogus": 1}))
    assert main(["pal-area", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_domain_violation_rejected():
    with pytest.raises(ConfigInvalid):
        SlideMonotonicityConfig.from_dict({"theta": 0.1})


def test_override_that_does_not_apply(tmp_path):
    assert main(["pal-area", "--seed", "3", "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(ConfigInvalid):
        load_config("pal-area", None, {"h_mesh": 0.1, "n_arc": None, "seed": None})


def test_overrides_apply(tmp_path):
    (tmp_path / "k.json").write_text(json.dumps(SMALL_KERNEL))
    cfg = load_config("kernel-cubic", tmp_path / "k.json", {"h_mesh": None, "n_arc": None, "seed": 7})
    assert isinstance(cfg, KernelCubicConfig)
    assert cfg.seed == 7 and cfg.n_kernel == 500


def test_pal_area_passes_and_writes_outputs(tmp_path, capsys):
    assert main(["pal-area", "--out", str(tmp_path)]) == EXIT_PASS
    assert "[PASS] pal-area" in capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "pass"
    for name in report["files"]:
        assert (tmp_path / name).exists()
    with open(tmp_path / "pal_area.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) > 1


def test_failed_verification_gives_exit_one(tmp_path):
    # an impossible tolerance turns a passing check into a failure
    (tmp_path / "c.json").write_text(json.dumps({**SMALL_KERNEL, "identity_tol": 1e-20}))
    assert main(["kernel-cubic", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == EXIT_FAIL


def test_csv_output_is_byte_deterministic(tmp_path):
    for d in ("a", "b"):
        run("kernel-cubic", dict(SMALL_KERNEL), tmp_path / d)
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    csvs = [f for f in rep["files"] if f.endswith(".csv")]
    assert csvs
    for name in csvs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "config.json").read_bytes() == (tmp_path / "b" / "config.json").read_bytes()


def test_run_rejects_config_of_wrong_type(tmp_path):
    with pytest.raises(ConfigInvalid):
        run("kernel-cubic", PalAreaConfig(), tmp_path)


def test_run_all_isolates_corrupted_config(tmp_path, capsys):
    cfg_dir = tmp_path / "configs"
    cfg_dir.mkdir()
    (cfg_dir / "pal-area.json").write_text("{}")
    (cfg_dir / "kernel-cubic.json").write_text("{ not json")
    code = main(["run-all", "--config-dir", str(cfg_dir), "--out", str(tmp_path / "out")])
    assert code == EXIT_USAGE
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    status = {row["experiment"]: row["status"] for row in summary}
    assert status == {"kernel-cubic": "error", "pal-area": "pass"}
    assert (tmp_path / "out" / "pal-area" / "report.json").exists()
    assert (tmp_path / "out" / "summary.csv").read_text().startswith("experiment,status")


def test_run_all_empty_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    code, summary = run_all(tmp_path / "empty", tmp_path / "out")
    assert code == EXIT_PASS and summary == []
    assert json.loads((tmp_path / "out" / "summary.json").read_text()) == []


def test_run_all_needs_config_dir(tmp_path):
    assert main(["run-all", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["run-all", "--config-dir", str(tmp_path / "missing"), "--out", str(tmp_path)]) == EXIT_USAGE

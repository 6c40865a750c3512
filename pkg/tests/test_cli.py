from pathlib import Path

import numpy as np
import pytest

from varmetro.cli import main
from varmetro.config import ConfigError, load_config
from varmetro.io import read_csv


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_follow_the_reference_numbers():
    cfg = load_config(text="[phases]\ntriplets = paper:s1\n")
    assert (cfg.events, cfg.probes, cfg.repetitions) == (5000, 50, 30)
    assert (cfg.optimizer.max_fev, cfg.optimizer.restarts) == (20, 3)
    np.testing.assert_array_equal(cfg.triplets[0].phi, [-0.588, 1.302, 0.511])


def test_sweeps_and_random_phases():
    cfg = load_config(text="[circuit]\ndevice = reference\n[noise]\nvisibility = 0.6, 0.8\n"
                           "[phases]\nrandom = 15\n")
    assert len(cfg.noises) == 2 and len(cfg.triplets) == 15
    assert all(0 <= t.phi[0] <= np.pi for t in cfg.triplets)


@pytest.mark.parametrize("text,line", [
    ("[noise]\nvisibility = 1.5\n", 2),
    ("[phases]\ntriplets = paper:s1\n\n[run]\nrepetitions = 0\n", 5),
    ("[phases]\ntriplets = paper:s99\n", 2),
    ("[phases]\ntriplets = paper:s1\n[bogus]\nx = 1\n", 3),
    ("[phases]\ntriplets = paper:s1\n[run]\ncolour = red\n", 4),
    ("[phases]\ntriplets = 0.1 0.2\n", 2),
])
def test_errors_name_the_line(tmp_path, text, line):
    path = write(tmp_path, text)
    with pytest.raises(ConfigError, match=rf"run\.ini:{line}:"):
        load_config(path)


def test_bad_config_exit_code(tmp_path, capsys):
    path = write(tmp_path, "[noise]\noverlap = -1\n")
    assert main(["estimate", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert "run.ini:2" in capsys.readouterr().err


def test_fisher_command_outputs(tmp_path):
    path = write(tmp_path, "[circuit]\ndevice = reference\n[noise]\nvisibility = 0.8\n"
                           "[phases]\ntriplets = 1.0\n[run]\nrepetitions = 4\n[fisher]\nevents = 1000, 100000\n")
    out = tmp_path / "o"
    assert main(["fisher", "--config", path, "--out", str(out), "--seed", "5"]) == 0
    meta, rows = read_csv(out / "fisher.csv")
    assert meta["seed"] == "5" and meta["command"] == "fisher" and len(meta["config_hash"]) == 16
    assert [r["events"] for r in rows] == ["1000", "100000"]
    exact = (1 - 0.64 * np.cos(1.0) ** 2) / (0.64 * np.sin(1.0) ** 2)
    assert abs(float(rows[1]["mean_trace_inverse"]) - exact) < 0.05


def test_optimize_then_explicit_estimate(tmp_path):
    opt = write(tmp_path, "[circuit]\nprobe = single\n[phases]\ntriplets = paper:sbar6\n", "opt.ini")
    out = tmp_path / "o"
    assert main(["optimize", "--config", opt, "--out", str(out), "--analytic"]) == 0
    _, traces = read_csv(out / "optimize_traces.csv")
    assert {r["restart"] for r in traces} == {"0", "1", "2"}
    assert max(sum(1 for r in traces if r["restart"] == k) for k in "012") <= 20
    _, theta = read_csv(out / "optimize_theta.csv")
    assert float(theta[0]["exact_cost"]) < float(theta[0]["start_cost"])

    est = write(tmp_path, "[circuit]\nprobe = single\n[phases]\ntriplets = paper:sbar6\n[run]\n"
                          f"repetitions = 3\n[estimate]\nmodes = explicit\ntheta = file:{out}/optimize_theta.csv\n",
                "est.ini")
    assert main(["estimate", "--config", est, "--out", str(out)]) == 0
    _, summary = read_csv(out / "estimate_summary.csv")
    assert summary[0]["mode"] == "explicit"
    assert float(summary[0]["theta_1"]) == pytest.approx(float(theta[0]["theta_1"]))


def test_hom_single_point_equals_estimate(tmp_path):
    common = "[circuit]\nprobe = two\n[phases]\ntriplets = paper:s1\n[run]\nrepetitions = 2\nprobes = 100\n"
    hom = write(tmp_path, common + "[hom]\noverlaps = 0.5\n", "hom.ini")
    est = write(tmp_path, common.replace("[phases]", "[noise]\noverlap = 0.5\n[phases]"), "est.ini")
    assert main(["hom", "--config", hom, "--out", str(tmp_path / "h")]) == 0
    assert main(["estimate", "--config", est, "--out", str(tmp_path / "e")]) == 0
    _, a = read_csv(tmp_path / "h" / "hom_summary.csv")
    _, b = read_csv(tmp_path / "e" / "estimate_summary.csv")
    assert [r["mean_loss"] for r in a] == [r["mean_loss"] for r in b]
    _, curve = read_csv(tmp_path / "h" / "hom_curve.csv")
    assert float(curve[0]["coincidence"]) == pytest.approx(0.25)


def test_hom_needs_two_photons(tmp_path):
    path = write(tmp_path, "[phases]\ntriplets = paper:sbar1\n")
    assert main(["hom", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    path = write(tmp_path, "[circuit]\ndevice = reference\n[phases]\ntriplets = 1.0\n[run]\nrepetitions = 2\n"
                           "[fisher]\nevents = 100\n")
    monkeypatch.setenv("VARMETRO_OUT", str(tmp_path / "env"))
    assert main(["fisher", "--config", path]) == 0
    assert (tmp_path / "env" / "fisher.csv").exists()


def test_partial_failure_exit_code(tmp_path, monkeypatch):
    import varmetro.cli as cli

    def boom(cfg, ni, ti):
        if cfg.triplets[ti].label == "s2":
            raise RuntimeError("boom")
        return {"rows": {"fisher.csv": []}}

    monkeypatch.setitem(cli.TASKS, "fisher", boom)
    path = write(tmp_path, "[phases]\ntriplets = paper:s1..s2\n")
    assert main(["fisher", "--config", path, "--out", str(tmp_path / "o")]) == 1
    import json

    summary = json.loads((tmp_path / "o" / "fisher_summary.json").read_text())
    assert [f["label"] for f in summary["failures"]] == ["s2"]


def test_parallel_output_matches_serial(tmp_path):
    path = write(tmp_path, "[circuit]\nprobe = two\n[phases]\ntriplets = paper:s1..s3\n[run]\nrepetitions = 3\n"
                           "[fisher]\nevents = 1000\n")
    assert main(["fisher", "--config", path, "--out", str(tmp_path / "a")]) == 0
    assert main(["fisher", "--config", path, "--out", str(tmp_path / "b"), "--jobs", "3"]) == 0
    assert (tmp_path / "a" / "fisher.csv").read_bytes() == (tmp_path / "b" / "fisher.csv").read_bytes()


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.ini")),
                         ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.triplets

import pytest

from blockreg import cli
from blockreg.cli import build_parser, main

SIM_FLAGS = ["--n-haplotypes", "60", "--region-kb", "20", "--causal-block-sizes", "2,1", "--seed", "3"]
SCHEDULE_FLAGS = ["--burn-in", "5", "--iters", "10", "--thin", "2"]


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out)] + SIM_FLAGS) == 0
    return out


def _inputs(sim_dir):
    return ["--genotypes", str(sim_dir / "genotypes.tsv"), "--markers", str(sim_dir / "markers.tsv"),
            "--phenotype", str(sim_dir / "phenotype.tsv"), "--truth", str(sim_dir / "truth.tsv")]


def test_simulate_writes_dataset(simulated):
    for name in ("genotypes.tsv", "markers.tsv", "phenotype.tsv", "truth.tsv", "manifest.txt"):
        assert (simulated / name).is_file()
    manifest = (simulated / "manifest.txt").read_text().splitlines()
    assert "command=simulate" in manifest
    assert "seed=3" in manifest
    assert manifest == sorted(manifest)
    truth = (simulated / "truth.tsv").read_text().splitlines()
    assert sum(line.endswith("\t1") for line in truth[1:]) == 3


def test_simulate_is_byte_identical(tmp_path, simulated):
    again = tmp_path / "again"
    assert main(["simulate", "--out", str(again)] + SIM_FLAGS) == 0
    for name in ("genotypes.tsv", "markers.tsv", "phenotype.tsv", "truth.tsv"):
        assert (again / name).read_bytes() == (simulated / name).read_bytes()


def test_fit_writes_summary_trace_and_curve(tmp_path, simulated, capsys):
    out = tmp_path / "fit"
    assert main(["fit", "--out", str(out)] + _inputs(simulated) + SCHEDULE_FLAGS) == 0
    trace = (out / "trace.tsv").read_text().splitlines()
    assert len(trace) == 1 + 5
    summary = (out / "beta_summary.tsv").read_text().splitlines()
    assert summary[0] == "marker_id\tposition_kb\tp_c\tbeta_mean\tbeta_best\tc_best\trank"
    n_markers = len((simulated / "markers.tsv").read_text().splitlines()) - 1
    assert len(summary) == 1 + n_markers
    assert sorted(int(line.split("\t")[-1]) for line in summary[1:]) == list(range(1, n_markers + 1))
    assert (out / "pr_curve.tsv").is_file()
    assert "AUPRC" in capsys.readouterr().out


def test_fit_reruns_are_byte_identical(tmp_path, simulated):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert main(["fit", "--out", str(out), "--prior", "bernoulli"] + _inputs(simulated) + SCHEDULE_FLAGS) == 0
    for name in ("beta_summary.tsv", "trace.tsv", "pr_curve.tsv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_segmented_fit_writes_one_trace_per_segment(tmp_path, simulated):
    out = tmp_path / "seg"
    assert main(["fit", "--out", str(out), "--segment-size", "4"] + _inputs(simulated) + SCHEDULE_FLAGS) == 0
    assert (out / "trace_segment_000.tsv").is_file()
    assert not (out / "trace.tsv").exists()
    assert "n_segments=" in (out / "manifest.txt").read_text()


@pytest.mark.parametrize("command,extra,table", [
    ("ridge", ["--ridge-reg", "0.5"], "beta_summary.tsv"),
    ("lasso", ["--penalty", "20.0"], "beta_summary.tsv"),
    ("wald", [], "wald.tsv"),
])
def test_baseline_commands(tmp_path, simulated, command, extra, table):
    out = tmp_path / command
    assert main([command, "--out", str(out)] + _inputs(simulated) + extra) == 0
    assert (out / table).is_file()
    assert (out / "pr_curve.tsv").is_file()
    assert f"command={command}" in (out / "manifest.txt").read_text().splitlines()


def test_config_file_supplies_settings(tmp_path, simulated):
    conf = tmp_path / "run.conf"
    conf.write_text("burn-in=5\niters=6\nthin=3\n", encoding="utf-8")
    out = tmp_path / "fit"
    assert main(["fit", "--out", str(out), "--config", str(conf)] + _inputs(simulated)) == 0
    assert len((out / "trace.tsv").read_text().splitlines()) == 1 + 2


@pytest.mark.parametrize("shape,status", [("paper", 0), ("all", 0), ("wide", 1)])
def test_sigma_shape_in_config_file(tmp_path, simulated, monkeypatch, shape, status):
    errors = []
    monkeypatch.setattr(cli.logger, "error", lambda msg, *args, **kwargs: errors.append(msg))
    conf = tmp_path / "run.conf"
    conf.write_text(f"burn-in=2\niters=2\nthin=1\nsigma-shape={shape}\n", encoding="utf-8")
    assert main(["fit", "--out", str(tmp_path / "fit"), "--config", str(conf)] + _inputs(simulated)) == status
    assert all(msg.startswith("Invalid configuration") for msg in errors)
    assert len(errors) == status


def test_missing_input_exits_with_one(tmp_path):
    missing = str(tmp_path / "none.tsv")
    argv = ["wald", "--out", str(tmp_path), "--genotypes", missing, "--markers", missing, "--phenotype", missing]
    assert main(argv) == 1


def test_malformed_input_exits_with_one(tmp_path, simulated):
    (simulated / "phenotype.tsv").write_text("individual_id\tvalue\nind00001\tnot-a-number\n")
    assert main(["ridge", "--out", str(tmp_path / "r")] + _inputs(simulated)) == 1


@pytest.mark.parametrize("argv", [[], ["plot"], ["fit", "--prior", "horseshoe"], ["simulate", "--seed", "x"]])
def test_usage_errors_exit_with_two(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_parser_leaves_unset_flags_out():
    args = vars(build_parser().parse_args(["ridge", "--seed", "4"]))
    assert args == {"command": "ridge", "seed": 4}

import json

import pytest

from radext.cli import (
    EXIT_CONFIG,
    EXIT_INCONCLUSIVE,
    EXIT_PASS,
    EXIT_RUNTIME,
    main,
)

KERNEL = ["kernel-bound", "--n", "2", "--pairs", "100"]


def test_no_arguments_is_a_usage_error(capsys):
    assert main([]) == EXIT_CONFIG
    assert "usage" in capsys.readouterr().err


def test_help_and_version(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert "exit status" in out
    assert main(["--version"]) == 0


def test_bad_flag_value(capsys):
    assert main(["kernel-bound", "--n", "two"]) == EXIT_CONFIG
    assert "invalid" in capsys.readouterr().err


def test_json_report_on_stdout(capsys):
    assert main(KERNEL) == EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["meta"]["seed"] == 0
    assert payload["report"]["experiment"] == "kernel_bound"
    assert payload["report"]["verdict"] == "pass"
    labels = [c["label"] for c in payload["report"]["checks"]]
    assert "kernel_ratio_max" in labels


def test_csv_report(capsys):
    assert main(KERNEL + ["--format", "csv"]) == EXIT_PASS
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "experiment,check,value,reference,stderr,tolerance,verdict"
    assert len(lines) == 4
    assert all(line.startswith("kernel_bound,") for line in lines[1:])


def test_output_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(KERNEL + ["--output", str(out)]) == EXIT_PASS
    assert capsys.readouterr().out == ""
    payload = json.loads(out.read_text())
    assert payload["report"]["experiment"] == "kernel_bound"
    leftovers = [p for p in tmp_path.iterdir() if p.name != "report.json"]
    assert leftovers == []


def test_identical_runs_are_reproducible(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    argv = ["compute-j", "--n", "2", "--samples", "20000", "--format", "csv"]
    main(argv + ["--output", str(a)])
    main(argv + ["--output", str(b)])
    assert a.read_bytes() == b.read_bytes()

    ja = tmp_path / "a.json"
    jb = tmp_path / "b.json"
    main(KERNEL + ["--output", str(ja)])
    main(KERNEL + ["--output", str(jb)])
    da = json.loads(ja.read_text())
    db = json.loads(jb.read_text())
    assert da["meta"].pop("timestamp") != db["meta"].pop("timestamp") or True
    assert da == db


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# kernel scan settings\n"
        "n = 2\n"
        "pairs = 100   # inline comment\n"
        "\n"
        "format = json\n")
    assert main(["kernel-bound", "--config", str(cfg)]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["report"]["samples"] == 100
    # explicit flags win over file entries
    assert main(["kernel-bound", "--config", str(cfg), "--pairs", "60"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["report"]["samples"] == 60


def test_config_file_underscore_keys(tmp_path, capsys):
    cfg = tmp_path / "eps.cfg"
    cfg.write_text("target_radius = 0.5\nprobe = 2000\n")
    assert main(["solve-epsilon", "--config", str(cfg)]) == EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["report"]["params"]["target_radius"] == 0.5


@pytest.mark.parametrize("body,fragment", [
    ("pairs 100\n", "expected 'key = value'"),
    ("pairs =\n", "empty value"),
    ("orbit = 3\n", "unknown key"),
    ("config = other.cfg\n", "do not nest"),
])
def test_config_file_errors(tmp_path, capsys, body, fragment):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 2\n" + body)
    assert main(["kernel-bound", "--config", str(cfg)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert fragment in err
    assert ":2:" in err  # points at the offending line


def test_config_file_missing(tmp_path, capsys):
    assert main(["kernel-bound", "--config",
                 str(tmp_path / "nope.cfg")]) == EXIT_CONFIG
    assert "nope.cfg" in capsys.readouterr().err


def test_seed_sources(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("RSL_SEED", "17")
    assert main(KERNEL) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["meta"]["seed"] == 17
    # an explicit flag beats the environment
    assert main(KERNEL + ["--seed", "3"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["meta"]["seed"] == 3
    monkeypatch.setenv("RSL_SEED", "zebra")
    assert main(KERNEL) == EXIT_CONFIG
    assert "RSL_SEED" in capsys.readouterr().err


def test_precondition_violation_is_config_error(capsys):
    argv = ["operator-sweep", "--n", "2", "--s", "1.5", "--geometry", "cube",
            "--samples", "2000", "--count", "1"]
    assert main(argv) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "s < 1" in err


def test_degenerate_data_is_runtime_error(capsys):
    argv = ["scaling-law", "--n", "2", "--f", "constant", "--j", "1",
            "--samples", "2000"]
    assert main(argv) == EXIT_RUNTIME
    assert "livelier" in capsys.readouterr().err


def test_inconclusive_exit_code(capsys):
    # at this sample count the doubling band is wider than the exactness
    # floor, so the run cannot certify the identity either way
    argv = ["compute-j", "--n", "2", "--samples", "50000"]
    assert main(argv) == EXIT_INCONCLUSIVE
    payload = json.loads(capsys.readouterr().out)
    assert payload["report"]["verdict"] == "inconclusive"

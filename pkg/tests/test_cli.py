import json
import subprocess
import sys
from pathlib import Path

import pytest
from conftest import write_tiny_config

from adspeech.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    return json.loads(err.strip().splitlines()[-1])


def csv_bytes(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.suffix in (".csv", ".dat")}


def test_missing_command_is_a_usage_error(capsys):
    code, _, err = run([], capsys)
    assert code == 1
    assert error_line(err)["error"] == "UsageError" and error_line(err)["exit_code"] == 1


def test_bad_flag_is_a_usage_error(capsys):
    code, _, err = run(["cv", "--no-such-flag"], capsys)
    assert code == 1
    assert error_line(err)["exit_code"] == 1


def test_missing_manifest_names_the_path(tmp_path, capsys):
    cfg = write_tiny_config(tmp_path, tmp_path / "absent.csv")
    code, _, err = run(["cv", "--config", cfg], capsys)
    assert code == 2
    line = error_line(err)
    assert line["error"] == "DataError" and "absent.csv" in line["message"]


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["cv", "--config", tmp_path / "nope.ini"], capsys)
    assert code == 2 and "nope.ini" in error_line(err)["message"]


def test_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[model]\ncolour = blue\n")
    code, _, err = run(["cv", "--config", p], capsys)
    assert code == 1 and "model.colour" in error_line(err)["message"]


def test_init_config_round_trips(tmp_path, capsys):
    from adspeech.config import parse_config

    code, out, _ = run(["init-config"], capsys)
    assert code == 0
    cfg = parse_config(out, tmp_path)
    assert cfg.sweep.depths == (1, 2, 3, 4, 6, 8, 10)
    assert cfg.model.arch == "gcnn" and cfg.feature_set == "IS10"


def test_synth_command(tmp_path, capsys):
    code, out, _ = run(["synth", "--out", tmp_path / "c", "--n-subjects", 2, "--seed", 3], capsys)
    assert code == 0
    manifest = Path(out.strip())
    assert manifest.is_file() and len(manifest.read_text().splitlines()) == 5


def test_synth_rejects_bad_spec(tmp_path, capsys):
    code, _, err = run(["synth", "--out", tmp_path, "--effect-size", 3], capsys)
    assert code == 1 and error_line(err)["error"] == "InvalidSpec"


def test_extract_command(tmp_path, tiny_manifest, capsys):
    code, _, _ = run(["extract", "--manifest", tiny_manifest, "--out", tmp_path / "x", "--format", "csv", "--feature-set", "IS09"], capsys)
    assert code == 0
    header = (tmp_path / "x" / "functionals.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 386
    assert any((tmp_path / "x" / "lld").iterdir())


def test_train_command(tmp_path, tiny_manifest, capsys):
    cfg = write_tiny_config(tmp_path, tiny_manifest)
    code, _, _ = run(["train", "--config", cfg], capsys)
    assert code == 0
    out = tmp_path / "run" / "train"
    assert (out / "model.bin").is_file() and (out / "history.csv").is_file()
    repro = json.loads((out / "reproducibility.json").read_text())
    assert repro["seeds"]["train"] == 0 and "numpy" in repro["versions"]


def test_cv_and_report_are_byte_identical_on_rerun(tmp_path, tiny_manifest, capsys):
    outputs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        cfg = write_tiny_config(d, tiny_manifest)
        code, out, _ = run(["cv", "--config", cfg], capsys)
        assert code == 0 and out.startswith("utterance_acc=")
        assert run(["sweep", "--config", cfg, "--kind", "depth"], capsys)[0] == 0
        assert run(["report", "--run-dir", d / "run"], capsys)[0] == 0
        outputs.append(csv_bytes(d / "run"))
    assert outputs[0] == outputs[1]
    names = set(outputs[0])
    assert {"cv/folds.csv", "cv/summary.csv", "cv/subjects.csv", "cv/folds_plan.csv", "sweep_depth/table.csv",
            "report/table1.csv", "report/orderings.csv"} <= names
    folds = outputs[0]["cv/folds.csv"].decode().splitlines()
    assert folds[0] == "sweep_value,fold,utterance_acc,subject_acc" and len(folds) == 4


def test_report_requires_a_run_dir(tmp_path, capsys):
    code, _, err = run(["report", "--run-dir", tmp_path / "missing"], capsys)
    assert code == 2 and "missing" in error_line(err)["message"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "adspeech", "init-config"], capture_output=True, text=True)
    assert proc.returncode == 0 and "[model]" in proc.stdout


@pytest.mark.parametrize("threads", ["0", "-1"])
def test_thread_count_must_be_positive(threads, capsys):
    code, _, _ = run(["cv", "--config", "x.ini", "--threads", threads], capsys)
    assert code == 1

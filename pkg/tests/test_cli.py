import json
import re
import subprocess
import sys

import numpy as np
import pytest

from slipforge.cli import build_parser, main
from slipforge.datastore import load_manifest, load_model, save_params
from slipforge.matcher import init_model
from slipforge.physics import PhysicsParams

STDERR_LINE = re.compile(r'^error code=\S+ msg=".*"$')


def run_main(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def dataset_path(tmp_path, capsys):
    path = str(tmp_path / "ds.json")
    code, _, _ = run_main(
        ["generate", "--pairs", "4", "--interference", "2", "--seed", "5",
         "--out", path],
        capsys,
    )
    assert code == 0
    return path


@pytest.fixture()
def model_path(tmp_path, dataset_path, capsys):
    path = str(tmp_path / "model.json")
    code, _, _ = run_main(
        ["train", "--dataset", dataset_path, "--epochs", "2", "--seed", "1",
         "--out", path],
        capsys,
    )
    assert code == 0
    return path


class TestGenerate:
    def test_writes_manifest(self, tmp_path, capsys):
        out = str(tmp_path / "ds.json")
        code, stdout, _ = run_main(
            ["generate", "--pairs", "3", "--interference", "2", "--seed", "9",
             "--out", out],
            capsys,
        )
        assert code == 0
        assert "3 pairs" in stdout
        manifest = load_manifest(out)
        assert manifest.n_pairs == 3
        assert len(manifest.fragments) == 8

    def test_custom_params_file(self, tmp_path, capsys):
        params_path = str(tmp_path / "params.json")
        save_params(PhysicsParams(theta_max=0.9).to_dict(), params_path)
        out = str(tmp_path / "ds.json")
        code, _, _ = run_main(
            ["generate", "--pairs", "2", "--params", params_path, "--out", out],
            capsys,
        )
        assert code == 0
        assert load_manifest(out).params["theta_max"] == 0.9

    def test_invalid_count(self, tmp_path, capsys):
        code, _, stderr = run_main(
            ["generate", "--pairs", "0", "--out", str(tmp_path / "x.json")],
            capsys,
        )
        assert code == 4
        assert STDERR_LINE.match(stderr.strip())

    def test_missing_params_file(self, tmp_path, capsys):
        code, _, stderr = run_main(
            ["generate", "--pairs", "2", "--params", str(tmp_path / "nope.json"),
             "--out", str(tmp_path / "x.json")],
            capsys,
        )
        assert code == 3
        assert "missing-file" in stderr


class TestTrain:
    def test_zero_epochs_is_initialization(self, tmp_path, dataset_path, capsys):
        out = str(tmp_path / "model.json")
        code, _, _ = run_main(
            ["train", "--dataset", dataset_path, "--epochs", "0", "--seed", "7",
             "--out", out],
            capsys,
        )
        assert code == 0
        saved = load_model(out)
        fresh = init_model(seed=7)
        for a, b in zip(saved.weights, fresh.weights):
            assert np.array_equal(a, b)
        for a, b in zip(saved.biases, fresh.biases):
            assert np.array_equal(a, b)

    def test_training_records_history(self, model_path):
        model = load_model(model_path)
        assert len(model.training_meta["loss_history"]) == 2

    def test_missing_dataset(self, tmp_path, capsys):
        code, _, stderr = run_main(
            ["train", "--dataset", str(tmp_path / "none.json"),
             "--out", str(tmp_path / "m.json")],
            capsys,
        )
        assert code == 3
        assert STDERR_LINE.match(stderr.strip())


class TestEval:
    def test_table_and_report(self, tmp_path, dataset_path, model_path, capsys):
        report_path = str(tmp_path / "report.json")
        code, stdout, _ = run_main(
            ["eval", "--dataset", dataset_path, "--model", model_path,
             "--methods", "wisepanda,cosine", "--ks", "1,5",
             "--out", report_path],
            capsys,
        )
        assert code == 0
        assert "top-1" in stdout and "top-5" in stdout
        assert "wisepanda" in stdout and "cosine" in stdout
        doc = json.loads(open(report_path).read())
        assert [r["method"] for r in doc["reports"]] == ["wisepanda", "cosine"]
        assert set(doc["reports"][0]["accuracy"]) == {"1", "5"}

    def test_random_needs_no_model(self, dataset_path, capsys):
        code, stdout, _ = run_main(
            ["eval", "--dataset", dataset_path, "--methods", "random",
             "--ks", "1"],
            capsys,
        )
        assert code == 0
        assert "random" in stdout

    def test_unknown_method(self, dataset_path, capsys):
        code, _, stderr = run_main(
            ["eval", "--dataset", dataset_path, "--methods", "psychic",
             "--ks", "1"],
            capsys,
        )
        assert code == 2
        assert "code=usage" in stderr

    @pytest.mark.parametrize("ks", ["0", "a,b", ""])
    def test_bad_ks(self, dataset_path, ks, capsys):
        code, _, stderr = run_main(
            ["eval", "--dataset", dataset_path, "--methods", "random", "--ks", ks],
            capsys,
        )
        assert code == 2
        assert STDERR_LINE.match(stderr.strip())

    def test_corrupt_dataset(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        code, _, stderr = run_main(
            ["eval", "--dataset", str(bad), "--methods", "random", "--ks", "1"],
            capsys,
        )
        assert code == 4
        assert "code=invariant" in stderr

    def test_model_from_environment(self, dataset_path, model_path, capsys, monkeypatch):
        monkeypatch.setenv("SLIPFORGE_MODEL", model_path)
        code, stdout, _ = run_main(
            ["eval", "--dataset", dataset_path, "--methods", "wisepanda",
             "--ks", "1"],
            capsys,
        )
        assert code == 0
        assert "wisepanda" in stdout


class TestMatrix:
    def test_export(self, tmp_path, dataset_path, model_path, capsys):
        out = str(tmp_path / "matrix.json")
        code, stdout, _ = run_main(
            ["matrix", "--dataset", dataset_path, "--model", model_path,
             "--out", out],
            capsys,
        )
        assert code == 0
        doc = json.loads(open(out).read())
        assert len(doc["upper_ids"]) == 4
        assert len(doc["scores"]) == 4
        assert "contrast" in doc


class TestCalibrate:
    def test_quick_run_with_scatter(self, tmp_path, dataset_path, capsys):
        out = str(tmp_path / "fit.json")
        scatter = str(tmp_path / "scatter.json")
        code, stdout, _ = run_main(
            ["calibrate", "--reference", dataset_path, "--generations", "1",
             "--population", "6", "--samples", "24", "--seed", "3",
             "--out", out, "--scatter-out", scatter],
            capsys,
        )
        assert code == 0
        assert "generation" in stdout
        from slipforge.datastore import load_params

        params = PhysicsParams.from_dict(load_params(out))
        params.validate()
        doc = json.loads(open(scatter).read())
        assert len(doc["points"]) == len(doc["labels"])
        assert len(doc["history"]) == 2


class TestServe:
    def test_missing_ledger_is_usage_error(self, dataset_path, model_path, capsys):
        code, _, stderr = run_main(
            ["serve", "--dataset", dataset_path, "--model", model_path],
            capsys,
        )
        assert code == 2
        assert "code=usage" in stderr

    def test_env_defaults_feed_parser(self, monkeypatch):
        monkeypatch.setenv("SLIPFORGE_DATASET", "/env/ds.json")
        monkeypatch.setenv("SLIPFORGE_MODEL", "/env/model.json")
        monkeypatch.setenv("SLIPFORGE_LEDGER", "/env/ledger.jsonl")
        monkeypatch.setenv("SLIPFORGE_ADDR", "0.0.0.0:9999")
        args = build_parser().parse_args(["serve"])
        assert args.dataset == "/env/ds.json"
        assert args.model == "/env/model.json"
        assert args.ledger == "/env/ledger.jsonl"
        assert args.addr == "0.0.0.0:9999"


class TestTopLevel:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert "slipforge" in capsys.readouterr().out

    def test_no_command_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_subprocess_exit_code_and_stderr(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "slipforge.cli", "eval",
             "--dataset", str(tmp_path / "absent.json"),
             "--methods", "random", "--ks", "1"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 3
        assert STDERR_LINE.match(result.stderr.strip())

    def test_subprocess_happy_path(self, tmp_path):
        out = str(tmp_path / "ds.json")
        result = subprocess.run(
            [sys.executable, "-m", "slipforge.cli", "generate",
             "--pairs", "2", "--out", out],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert "2 pairs" in result.stdout

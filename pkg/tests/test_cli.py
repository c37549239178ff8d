"""CLI thin client: exit codes, artifact files, reruns."""

import json

import pytest
from click.testing import CliRunner

from hygraph.cli import EXIT_GEOMETRY, EXIT_USAGE, main


@pytest.fixture
def runner():
    return CliRunner()


HIERARCHY = ["--dataset", "hierarchy", "--depth", "3", "--branching", "3",
             "--classes", "3", "--noise", "2.0", "--feature-dim", "8",
             "--data-seed", "5"]


class TestTrainCommand:
    def test_success_writes_artifacts(self, runner, tmp_path):
        out = tmp_path / "run"
        result = runner.invoke(main, ["train", *HIERARCHY, "--task", "supervised",
                                      "--k", "1", "--layers", "1", "--dim", "8",
                                      "--epochs", "6", "--seed", "2",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "effective config" in result.output and "metrics" in result.output
        for name in ("config.json", "history.jsonl", "params.npz", "metrics.json"):
            assert (out / name).exists(), name

    def test_missing_dataset_exits_2_with_path(self, runner):
        result = runner.invoke(main, ["train", "--dataset", "missing.json",
                                      "--task", "supervised"])
        assert result.exit_code == EXIT_USAGE
        assert "missing.json" in result.output

    def test_rerun_reproduces_history_bit_for_bit(self, runner, tmp_path):
        args = ["train", *HIERARCHY, "--task", "supervised", "--k", "1",
                "--layers", "1", "--dim", "8", "--epochs", "5", "--seed", "9"]
        assert runner.invoke(main, [*args, "--out", str(tmp_path / "a")]).exit_code == 0
        assert runner.invoke(main, [*args, "--out", str(tmp_path / "b")]).exit_code == 0
        a = (tmp_path / "a" / "history.jsonl").read_bytes()
        b = (tmp_path / "b" / "history.jsonl").read_bytes()
        assert a == b


class TestEvalCommand:
    def test_eval_roundtrip(self, runner, tmp_path):
        out = tmp_path / "run"
        train = runner.invoke(main, ["train", *HIERARCHY, "--task", "supervised",
                                     "--k", "1", "--layers", "1", "--dim", "8",
                                     "--epochs", "6", "--out", str(out)])
        assert train.exit_code == 0, train.output
        result = runner.invoke(main, ["eval", *HIERARCHY, "--checkpoint",
                                      str(out / "params.npz")])
        assert result.exit_code == 0, result.output
        assert "micro_f1" in result.output


class TestGeometryCommand:
    def test_passes(self, runner):
        result = runner.invoke(main, ["geometry-check", "--trials", "1000"])
        assert result.exit_code == 0, result.output
        assert "geometry check passed" in result.output

    def test_zero_trials_usage_error(self, runner):
        result = runner.invoke(main, ["geometry-check", "--trials", "0"])
        assert result.exit_code == EXIT_USAGE

    def test_single_model(self, runner):
        result = runner.invoke(main, ["geometry-check", "--model", "lorentz",
                                      "--trials", "500"])
        assert result.exit_code == 0
        assert "poincare_tangent_roundtrip" not in result.output


class TestCurvatureCommand:
    def test_dump(self, runner, tmp_path):
        out = tmp_path / "kappa.csv"
        result = runner.invoke(main, ["curvature-dump", *HIERARCHY,
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.read_text().startswith("i,j,kappa")


class TestAblateCommand:
    def test_small_grid(self, runner, tmp_path):
        result = runner.invoke(main, ["ablate", *HIERARCHY, "--task", "supervised",
                                      "--k-grid", "1,2", "--dim-grid", "6",
                                      "--space-grid", "poincare", "--seeds", "0",
                                      "--epochs", "4", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        csv_text = (tmp_path / "ablation.csv").read_text()
        assert csv_text.startswith("k,dim,space,seed,metric,value,status")

    def test_config_snapshot_reproduces_run(self, runner, tmp_path):
        """config.json + the same binary and seed reproduce the run."""
        out = tmp_path / "run"
        args = ["train", *HIERARCHY, "--task", "supervised", "--k", "1",
                "--layers", "1", "--dim", "8", "--epochs", "4", "--seed", "3",
                "--out", str(out)]
        assert runner.invoke(main, args).exit_code == 0
        snapshot = json.loads((out / "config.json").read_text())
        # replay through the service layer from the snapshot alone
        from hygraph.runners import run_train
        from hygraph.service.schemas import TrainRequest

        snapshot["out_dir"] = str(tmp_path / "replay")
        replay = run_train(TrainRequest.model_validate(snapshot))
        original = (out / "history.jsonl").read_bytes()
        replayed = (tmp_path / "replay" / "history.jsonl").read_bytes()
        assert original == replayed

import json
from pathlib import Path

import pytest

from motionpin.cli import main
from motionpin.pipeline import PipelineConfig, run_pipeline


SMALL = ["--users", "2", "--reps", "2"]


def read_bytes(path):
    return Path(path).read_bytes()


class TestStageCommands:
    def test_synth_ingest_featurize_train_eval(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["synth", "--out", str(out), "--seed", "3", *SMALL]) == 0
        assert (out / "pins.json").exists()
        assert (out / "manifest-synth.json").exists()

        dataset = out / "dataset.json"
        assert main(["ingest", "--sessions", str(out / "sessions"), "--out", str(dataset),
                     "--pins", str(out / "pins.json")]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["violations"] == 0
        assert summary["segments"] == 2 * 2 * 50

        features = out / "features.csv"
        assert main(["featurize", "--dataset", str(dataset), "--out", str(features)]) == 0

        model = out / "model.json"
        assert main(["train", "--features", str(features), "--out", str(model),
                     "--seed", "3", "--hidden", "16", "--max-epochs", "60"]) == 0
        assert model.exists()
        assert (out / "model.history.json").exists()

        report = out / "report.json"
        assert main(["eval", "--model", str(model), "--features", str(features),
                     "--out", str(report)]) == 0
        printed = capsys.readouterr().out
        assert "Attempts" in printed
        doc = json.loads(report.read_text())
        assert set(doc["top_k_rates"]) == {"1", "2", "3"}

    def test_eval_label_space_mismatch_exits_1(self, tmp_path, capsys):
        out = tmp_path / "run"
        result = run_pipeline(PipelineConfig(out_dir=str(out), seed=1, n_users=2, reps=2,
                                             hidden_dim=8, max_epochs=30))
        # forge a feature file with a label outside the model's space
        features = out / "features.csv"
        lines = features.read_text().splitlines()
        lines[1] = "9999x" + lines[1][4:]
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines) + "\n")
        code = main(["eval", "--model", str(out / "model.json"), "--features", str(bad)])
        assert code == 1
        assert "label" in capsys.readouterr().err

    def test_activity_script_and_detection(self, tmp_path, capsys):
        out = tmp_path / "act"
        assert main(["synth", "--out", str(out), "--seed", "2",
                     "--activity-script", "sitting:8,call_event:8,sitting:8"]) == 0
        session = out / "activity-2.jsonl"
        truth = json.loads((out / "activity-2.truth.json").read_text())
        assert [t["activity"] for t in truth] == ["sitting", "call_event", "sitting"]

        labels_out = out / "labels.json"
        assert main(["activity", "--session", str(session), "--out", str(labels_out)]) == 0
        doc = json.loads(labels_out.read_text())
        assert len(doc["events"]) == 1
        assert abs(doc["events"][0]["start_s"] - 8.0) <= 0.5

    def test_survey_monotone_prints_one(self, tmp_path, capsys):
        know = tmp_path / "knowledge.csv"
        concern = tmp_path / "concern.csv"
        know.write_text("gps,camera,gyro,motion\n5,4,2,1\n5,4,2,1\n")
        concern.write_text("gps,camera,gyro,motion\n5,4,2,1\n4,3,2,1\n")
        assert main(["survey", "--knowledge", str(know), "--concern", str(concern)]) == 0
        assert "rho = 1.000" in capsys.readouterr().out

    def test_unreadable_input_exits_nonzero(self, tmp_path, capsys):
        code = main(["featurize", "--dataset", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestPipelineCommand:
    def test_pipeline_writes_all_artifacts(self, tmp_path, capsys):
        out = tmp_path / "pipe"
        assert main(["pipeline", "--out", str(out), "--seed", "5", *SMALL,
                     "--hidden", "8", "--max-epochs", "40"]) == 0
        for name in ("pins.json", "features.csv", "model.json", "history.json",
                     "report.json", "manifest-pipeline.json"):
            assert (out / name).exists(), name
        printed = capsys.readouterr().out
        assert "Attempts" in printed
        manifest = json.loads((out / "manifest-pipeline.json").read_text())
        assert str(out / "model.json") in manifest["outputs"]

    def test_pipeline_deterministic_bytes(self, tmp_path):
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["pipeline", "--out", str(out), "--seed", "11", *SMALL,
                         "--hidden", "8", "--max-epochs", "40"]) == 0
            runs.append(out)
        for artifact in ("features.csv", "model.json", "report.json", "history.json"):
            assert read_bytes(runs[0] / artifact) == read_bytes(runs[1] / artifact), artifact

    def test_shuffle_labels_flag(self, tmp_path):
        out = tmp_path / "ctl"
        assert main(["pipeline", "--out", str(out), "--seed", "5", *SMALL,
                     "--hidden", "8", "--max-epochs", "40", "--shuffle-labels"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["top_k_rates"]["1"] <= 0.3

    def test_digit_mode_pipeline(self, tmp_path):
        out = tmp_path / "digits"
        assert main(["pipeline", "--out", str(out), "--seed", "4", "--users", "2",
                     "--reps", "1", "--mode", "digit10", "--hidden", "8",
                     "--max-epochs", "60"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["mode"] == "digit10"
        assert sorted(report["label_space"]) == [str(d) for d in range(10)]
        # ten well-separated classes with 40 samples each should be easy
        assert report["top_k_rates"]["1"] >= 0.8
        derived = report["baselines"]["derived_pin_success_81_attempts"]
        assert derived == pytest.approx(float(report["top_k_rates"]["3"]) ** 4, abs=1e-12)

import json
import subprocess
import sys

import pytest

from gram.cli import main


def run_synth(tmp_path, count=4, extra=()):
    data = tmp_path / "data"
    rc = main(
        [
            "synth", "--count", str(count), "--min-nodes", "6", "--max-nodes", "6",
            "--canonical", "--out", str(data), *extra,
        ]
    )
    assert rc == 0
    return data


def run_train(tmp_path, data, extra=()):
    out = tmp_path / "run"
    rc = main(
        [
            "train", "--data", str(data), "--features", "degree_onehot",
            "--gcn-layers", "2", "--hidden-dim", "6", "--latent-dim", "3",
            "--epochs", "2", "--out", str(out), *extra,
        ]
    )
    assert rc == 0
    return out


class TestSynth:
    def test_writes_dataset_and_config(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        assert (data / "synthetic" / "synthetic_A.txt").is_file()
        resolved = json.loads((data / "resolved_config.json").read_text())
        assert resolved["command"] == "synth"
        assert resolved["count"] == 4
        assert "wrote 8 graphs" in capsys.readouterr().out

    def test_bad_count_is_usage_error(self, tmp_path, capsys):
        rc = main(["synth", "--count", "0", "--out", str(tmp_path / "d")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_seeded_reruns_identical(self, tmp_path):
        a = run_synth(tmp_path / "a", extra=("--seed", "3"))
        b = run_synth(tmp_path / "b", extra=("--seed", "3"))
        for rel in ("synthetic/synthetic_A.txt", "synthetic/synthetic_graph_labels.txt"):
            assert (a / rel).read_bytes() == (b / rel).read_bytes()


class TestTrain:
    def test_outputs_and_stdout_path(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        capsys.readouterr()
        out = run_train(tmp_path, data)
        captured = capsys.readouterr()
        assert captured.out.strip().endswith("checkpoint.json")
        assert "final mean loss" in captured.err
        assert (out / "checkpoint.json").is_file()
        assert (out / "train_report.json").is_file()
        losses = (out / "train_losses.csv").read_text().splitlines()
        assert losses[0].startswith("epoch,")
        assert len(losses) == 3  # header + 2 epochs

    def test_featureless_without_policy_is_usage_error(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        rc = main(
            ["train", "--data", str(data), "--epochs", "1", "--out", str(tmp_path / "r")]
        )
        assert rc == 1
        assert "--features" in capsys.readouterr().err

    def test_missing_data_dir(self, tmp_path, capsys):
        rc = main(
            ["train", "--data", str(tmp_path / "absent"), "--out", str(tmp_path / "r")]
        )
        assert rc == 1

    def test_corrupt_dataset_is_runtime_error(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        edge_file = data / "synthetic" / "synthetic_A.txt"
        edge_file.write_text("1, nope\n")
        rc = main(
            [
                "train", "--data", str(data), "--features", "degree_onehot",
                "--epochs", "1", "--out", str(tmp_path / "r"),
            ]
        )
        assert rc == 2
        assert "synthetic_A.txt:1" in capsys.readouterr().err

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model.epochs": 1, "model.gcn_layers": 2,
                                   "model.hidden_dim": 4, "model.latent_dim": 2,
                                   "features": "degree_onehot"}))
        out = tmp_path / "run"
        rc = main(
            [
                "train", "--data", str(data), "--config", str(cfg),
                "--hidden-dim", "6", "--out", str(out),
            ]
        )
        assert rc == 0
        resolved = json.loads((out / "resolved_config.json").read_text())
        assert resolved["model.hidden_dim"] == 6  # flag beats config file
        assert resolved["model.epochs"] == 1  # config beats default


class TestScore:
    def test_scores_csv_and_json(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        out = run_train(tmp_path, data)
        capsys.readouterr()
        score_dir = tmp_path / "scores"
        rc = main(
            [
                "score", "--checkpoint", str(out / "checkpoint.json"),
                "--data", str(data), "--features", "degree_onehot",
                "--out", str(score_dir),
            ]
        )
        assert rc == 0
        assert capsys.readouterr().out.strip().endswith("scores.csv")
        lines = (score_dir / "scores.csv").read_text().splitlines()
        assert lines[0] == "graph_id,graph_score,label"
        assert len(lines) == 9  # 8 graphs
        docs = json.loads((score_dir / "scores.json").read_text())
        assert len(docs) == 8
        assert all("node_scores" not in d for d in docs)

    def test_nodes_and_sampled_columns(self, tmp_path):
        data = run_synth(tmp_path)
        out = run_train(tmp_path, data)
        score_dir = tmp_path / "scores"
        rc = main(
            [
                "score", "--checkpoint", str(out / "checkpoint.json"),
                "--data", str(data), "--features", "degree_onehot",
                "--noise-samples", "2", "--nodes", "--out", str(score_dir),
            ]
        )
        assert rc == 0
        header = (score_dir / "scores.csv").read_text().splitlines()[0]
        assert header.endswith(",sampled_mean_score")
        docs = json.loads((score_dir / "scores.json").read_text())
        assert all("node_scores" in d and "sampled_mean_score" in d for d in docs)

    def test_missing_checkpoint(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        rc = main(
            [
                "score", "--checkpoint", str(tmp_path / "no.json"),
                "--data", str(data), "--features", "degree_onehot",
                "--out", str(tmp_path / "s"),
            ]
        )
        assert rc == 1


class TestEval:
    def test_results_files(self, tmp_path, capsys):
        data = run_synth(tmp_path, count=6)
        capsys.readouterr()
        out = tmp_path / "eval"
        rc = main(
            [
                "eval", "--data", str(data), "--features", "degree_onehot",
                "--methods", "gram,reconstruction_baseline", "--seeds", "0",
                "--gcn-layers", "2", "--hidden-dim", "6", "--latent-dim", "3",
                "--epochs", "2", "--train-fraction", "0.6", "--out", str(out),
            ]
        )
        assert rc == 0
        assert (out / "results.json").is_file()
        assert (out / "results.csv").is_file()
        text = (out / "results.txt").read_text()
        assert "gram" in text
        assert capsys.readouterr().out == text

    def test_bad_method_list(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        rc = main(
            [
                "eval", "--data", str(data), "--features", "degree_onehot",
                "--methods", "magic", "--seeds", "0", "--epochs", "1",
                "--out", str(tmp_path / "e"),
            ]
        )
        assert rc == 2  # caught at config construction: runtime error class
        assert "magic" in capsys.readouterr().err

    def test_bad_seed_list(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        rc = main(
            [
                "eval", "--data", str(data), "--features", "degree_onehot",
                "--seeds", "a,b", "--out", str(tmp_path / "e"),
            ]
        )
        assert rc == 1


class TestOracle:
    def test_reference_reproduction_passes(self, tmp_path, capsys):
        out = tmp_path / "oracle"
        rc = main(["oracle", "--out", str(out)])
        assert rc == 0
        text = (out / "oracle.txt").read_text()
        assert "overall: PASS" in text
        doc = json.loads((out / "oracle.json").read_text())
        assert doc["all_pass"] is True
        assert capsys.readouterr().out == text

    def test_off_reference_epsilon_fails(self, tmp_path, capsys):
        rc = main(["oracle", "--epsilon", "0.2", "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "overall: FAIL" in (tmp_path / "o" / "oracle.txt").read_text()

    def test_zero_epsilon_zeroes_every_std(self, tmp_path, capsys):
        out = tmp_path / "o"
        rc = main(["oracle", "--epsilon", "0", "--out", str(out)])
        assert rc == 2  # means survive but the reference stds no longer match
        doc = json.loads((out / "oracle.json").read_text())
        assert all(row["computed"]["std"] == 0.0 for row in doc["rows"])

    def test_monte_carlo_section(self, tmp_path, capsys):
        out = tmp_path / "oracle"
        rc = main(["oracle", "--trials", "200", "--out", str(out)])
        assert rc == 0
        assert "monte carlo (200 trials)" in (out / "oracle.txt").read_text()


class TestTopLevel:
    def test_unknown_flag_is_usage_error(self, tmp_path, capsys):
        rc = main(["oracle", "--bogus", "--out", str(tmp_path / "o")])
        assert rc == 1

    def test_unknown_command_is_usage_error(self, capsys):
        rc = main(["bogus"])
        assert rc == 1

    def test_console_script_installed(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "gram.cli", "oracle", "--out", str(tmp_path / "o")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "overall: PASS" in proc.stdout

import json

import pytest

from trackforge.cli import main
from trackforge.config import ConfigError, load_config
from trackforge.logio import parse_chain_graphs
from trackforge.stride import load_gait_model
from trackforge.synth import WalkScript, WalkSegmentSpec, save_script, write_corpus
from trackforge.stride import Gait


@pytest.fixture(scope="module")
def straight_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("straight")
    script = WalkScript(
        source_id="walk", seed=31,
        segments=[WalkSegmentSpec(floor=1, gait=Gait.NORMAL, heading_rad=0.0, steps=20)],
    )
    write_corpus([script], out)
    return out


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config()
        assert cfg.turn.epsilon_rad == 1.0
        assert cfg.step.buffer_capacity == 10

    def test_file_plus_override_precedence(self, tmp_path):
        path = tmp_path / "tf.conf"
        path.write_text("turn.epsilon_rad = 0.8\nfloor.min_pts = 12\n# comment\n")
        cfg = load_config(path, overrides={"turn.epsilon_rad": "1.3"})
        assert cfg.turn.epsilon_rad == 1.3  # flag wins
        assert cfg.floor.min_pts == 12

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "tf.conf"
        path.write_text("nonsense.key = 3\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "tf.conf"
        path.write_text("floor.cut = 1.7\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_pace_floor_ceiling_consistency(self, tmp_path):
        path = tmp_path / "tf.conf"
        path.write_text("step.pace_floor = 3.0\n")
        with pytest.raises(ConfigError):
            load_config(path)


class TestRunCommand:
    def test_empty_input_dir_exit_2(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["run", "--input", str(empty), "--output", str(tmp_path / "out")]) == 2

    def test_straight_walk_one_graph_two_vertices(self, straight_corpus, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--input", str(straight_corpus), "--output", str(out)]) == 0
        graphs = parse_chain_graphs((out / "walk.graphs.json").read_text())
        assert len(graphs) == 1
        assert len(graphs[0].vertices) == 2
        report = json.loads((out / "report.json").read_text())
        assert report["files"][0]["steps"] == 20
        assert report["totals"]["graphs"] == 1

    def test_report_totals_equal_file_sums(self, straight_corpus, tmp_path):
        out = tmp_path / "out2"
        main(["run", "--input", str(straight_corpus), "--output", str(out)])
        report = json.loads((out / "report.json").read_text())
        for key in ("steps", "segments", "graphs"):
            assert report["totals"][key] == sum(f[key] for f in report["files"])

    def test_unreadable_file_recorded_run_continues(self, straight_corpus, tmp_path):
        bad_dir = tmp_path / "mixed"
        bad_dir.mkdir()
        for p in straight_corpus.glob("*"):
            (bad_dir / p.name).write_bytes(p.read_bytes())
        (bad_dir / "broken.tsl").write_text("ACCE;gibberish\n")
        out = tmp_path / "out3"
        assert main(["run", "--input", str(bad_dir), "--output", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        errors = [f for f in report["files"] if f["error"]]
        assert len(errors) == 1 and errors[0]["name"] == "broken.tsl"


class TestSynthCommand:
    def test_script_rendering(self, tmp_path):
        script = WalkScript(
            source_id="cli-script", seed=17,
            segments=[WalkSegmentSpec(floor=1, gait=Gait.SLOW, heading_rad=0.2, steps=8)],
        )
        spath = tmp_path / "walk.json"
        save_script(script, spath)
        out = tmp_path / "rendered"
        assert main(["synth", "--script", str(spath), "--out", str(out)]) == 0
        assert (out / "cli-script.tsl").exists()
        assert (out / "cli-script.truth.json").exists()

    def test_requires_script_or_default(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "x")]) == 2


class TestEvalCommand:
    def test_straight_walk_eval(self, straight_corpus, tmp_path, capsys):
        out = tmp_path / "eval"
        assert main(["eval", "--input", str(straight_corpus), "--output", str(out)]) == 0
        result = json.loads((out / "eval.json").read_text())
        assert result["floor_accuracy"] == 1.0
        assert result["turning"]["precision"] == 1.0  # no corners, none detected

    def test_default_corpus_end_to_end(self, corpus_dir, tmp_path):
        out = tmp_path / "eval-corpus"
        assert main(["eval", "--input", str(corpus_dir), "--output", str(out)]) == 0
        result = json.loads((out / "eval.json").read_text())
        assert result["floor_count"] == 3
        assert result["floor_accuracy"] == 1.0
        assert result["turning"]["precision"] == 1.0
        run_out = tmp_path / "run-corpus"
        assert main(["run", "--input", str(corpus_dir), "--output", str(run_out)]) == 0
        report = json.loads((run_out / "report.json").read_text())
        assert report["floor_count"] == 3
        assert report["totals"]["errors"] == 0

    def test_missing_truth_fatal(self, tmp_path):
        lonely = tmp_path / "lonely"
        lonely.mkdir()
        (lonely / "a.tsl").write_text("ACCE;0.0;0.0;0;0;9.8;3\n")
        assert main(["eval", "--input", str(lonely)]) == 2


class TestSweepCommand:
    def test_sweep_outputs(self, straight_corpus, tmp_path):
        out = tmp_path / "sweep"
        code = main([
            "sweep", "--input", str(straight_corpus), "--output", str(out),
            "--epsilon-grid", "1.0", "--window-grid", "4",
        ])
        assert code == 0
        table = (out / "sweep.csv").read_text()
        assert table.splitlines()[0] == "epsilon,window,precision,recall,f"
        assert (out / "sweep_plot.json").exists()


class TestTrainGaitCommand:
    def test_train_from_csv(self, tmp_path):
        rows = ["duration,variance,peak,rms,gait"]
        import numpy as np

        rng = np.random.default_rng(0)
        for _ in range(40):
            rows.append(f"{0.8 + rng.normal(0, 0.02):.4f},{0.7 + rng.normal(0, 0.05):.4f},11.0,9.9,slow")
            rows.append(f"{0.4 + rng.normal(0, 0.02):.4f},{8.0 + rng.normal(0, 0.3):.4f},13.8,10.2,fast")
        labels = tmp_path / "labels.csv"
        labels.write_text("\n".join(rows) + "\n")
        model_path = tmp_path / "gait.model"
        assert main(["train-gait", "--labels", str(labels), "--out", str(model_path)]) == 0
        model = load_gait_model(model_path)
        assert model.stride_table[Gait.SLOW] == pytest.approx(0.5)

    def test_bad_labels_fatal(self, tmp_path):
        labels = tmp_path / "labels.csv"
        labels.write_text("not,enough\n")
        assert main(["train-gait", "--labels", str(labels), "--out", str(tmp_path / "m")]) == 2

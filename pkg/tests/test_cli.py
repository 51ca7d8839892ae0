"""CLI behavior: exit codes, library equivalence, byte-determinism."""

import numpy as np
import pytest

from vocl.cli import main
from vocl.metrics import ate, auc
from vocl.surrogate import generate_dataset, ground_truth_anchored, run_training
from vocl.config import RunConfig
from vocl.trajio import parse_trajectory_file, write_trajectory_file

SMALL_CFG = (
    "budget: 40\n"
    "n_sequences: 9\n"
    "seq_length: 12\n"
    "val_cadence: 20\n"
    "patience: 99\n"
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Nine synthetic trajectory files spanning the difficulty range."""
    root = tmp_path_factory.mktemp("corpus")
    seqs, _ = generate_dataset(11, 9, seq_length=15)
    for s in seqs:
        write_trajectory_file(root / f"{s.sequence_id}.txt", ground_truth_anchored(s))
    return root


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_bad_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "a.txt", "b.txt", "--format", "kitti"])
        assert exc.value.code == 1
        capsys.readouterr()

    def test_config_problems_listed_before_any_work(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("mode: warp\nbudget: -3\nextra_knob: 1\n")
        code, _, err = run_cli(capsys, "train", "--config", cfg, "--out", tmp_path)
        assert code == 1
        assert err.count("error:") == 3
        assert not (tmp_path / "runs").exists()

    def test_unparseable_file_is_data_error(self, tmp_path, capsys):
        est = tmp_path / "est.txt"
        est.write_text("0 0 0\n")
        gt = tmp_path / "gt.txt"
        gt.write_text("0 0 0 0 0 0 0 1\n1 1 0 0 0 0 0 1\n")
        code, _, err = run_cli(capsys, "evaluate", est, gt, "--out", tmp_path)
        assert code == 2
        assert "expected 8 fields" in err

    def test_degenerate_alignment_is_numerical_failure(self, tmp_path, capsys):
        est = tmp_path / "est.txt"
        est.write_text("".join(f"{t} 0 0 0 0 0 0 1\n" for t in range(4)))
        gt = tmp_path / "gt.txt"
        gt.write_text("".join(f"{t} {t} 0 0 0 0 0 1\n" for t in range(4)))
        code, _, err = run_cli(capsys, "evaluate", est, gt, "--out", tmp_path)
        assert code == 3
        assert "coincident" in err

    def test_missing_plot_columns_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "x.csv"
        bad.write_text("alpha,beta\n1,2\n")
        code, _, err = run_cli(capsys, "plot", bad, "--kind", "weight_trace",
                               "--out", tmp_path)
        assert code == 2
        assert "missing columns" in err
        assert not (tmp_path / "weight_trace.svg").exists()


class TestDifficultyCommand:
    def test_levels_and_outputs(self, corpus, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "difficulty", corpus, "--out", tmp_path)
        assert code == 0
        assert "level 1: 3 sequences" in out
        manifest = (tmp_path / "manifest.csv").read_text().splitlines()
        assert manifest[0].startswith("sequence_id,max_tx")
        assert len(manifest) == 10
        hist = (tmp_path / "histogram.csv").read_text().splitlines()
        assert hist[0] == "bin_lo,bin_hi,count"
        counts = [int(line.split(",")[2]) for line in hist[1:]]
        assert sum(counts) == 9

    def test_rerun_is_byte_identical(self, corpus, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli(capsys, "difficulty", corpus, "--out", out)[0] == 0
        for name in ("manifest.csv", "histogram.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_threshold_override_pins_cut_points(self, corpus, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "difficulty", corpus, "--out", tmp_path,
                               "--thresholds", "0.44,0.64")
        assert code == 0
        assert "thresholds: 0.44, 0.64" in out
        rows = (tmp_path / "manifest.csv").read_text().splitlines()[1:]
        for row in rows:
            cells = row.split(",")
            score, level = float(cells[7]), int(cells[8])
            expected = 1 if score <= 0.44 else 2 if score <= 0.64 else 3
            assert level == expected

    def test_too_few_files_rejected(self, tmp_path, capsys):
        only = tmp_path / "only"
        only.mkdir()
        (only / "a.txt").write_text("0 0 0 0 0 0 0 1\n1 1 0 0 0 0 0 1\n")
        code, _, err = run_cli(capsys, "difficulty", only, "--out", tmp_path)
        assert code == 2
        assert ">= 3" in err


class TestTrainCommand:
    def test_matches_library_run(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.yaml"
        cfg_file.write_text(SMALL_CFG)
        code, out, _ = run_cli(capsys, "train", "--config", cfg_file,
                               "--seed", "5", "--out", tmp_path / "cli")
        assert code == 0

        cfg = RunConfig(seed=5, budget=40, n_sequences=9, seq_length=12,
                        val_cadence=20, patience=99)
        lib_dir = tmp_path / "lib"
        lib_dir.mkdir()
        result = run_training(cfg, out_dir=lib_dir)
        run_dir = tmp_path / "cli" / cfg.run_dir_name()
        assert (run_dir / "metrics.csv").read_bytes() == (lib_dir / "metrics.csv").read_bytes()
        assert repr(result.final_val_ate) in out

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.yaml"
        cfg_file.write_text(SMALL_CFG)
        outs = []
        for sub in ("a", "b"):
            code, out, _ = run_cli(capsys, "train", "--config", cfg_file,
                                   "--out", tmp_path / sub)
            assert code == 0
            outs.append(out.replace(str(tmp_path / sub), "OUT"))
        assert outs[0] == outs[1]
        run_a = next((tmp_path / "a").iterdir())
        run_b = next((tmp_path / "b").iterdir())
        assert run_a.name == run_b.name
        for name in ("metrics.csv", "checkpoint.json", "config.yaml"):
            assert (run_a / name).read_bytes() == (run_b / name).read_bytes()


class TestEvaluateCommand:
    def make_pair(self, tmp_path, sigma=0.1):
        rng = np.random.default_rng(2)
        gt_rows = [(float(t), rng.normal(size=3)) for t in range(12)]
        est_rows = [(t, p + rng.normal(scale=sigma, size=3)) for t, p in gt_rows]
        for name, rows in (("gt.txt", gt_rows), ("est.txt", est_rows)):
            with open(tmp_path / name, "w") as fh:
                for t, p in rows:
                    x, y, z = (float(v) for v in p)
                    fh.write(f"{t} {x!r} {y!r} {z!r} 0 0 0 1\n")
        return tmp_path / "est.txt", tmp_path / "gt.txt"

    def test_matches_library_call_exactly(self, tmp_path, capsys):
        est_path, gt_path = self.make_pair(tmp_path)
        code, out, _ = run_cli(capsys, "evaluate", est_path, gt_path, "--out", tmp_path)
        assert code == 0
        est = parse_trajectory_file(est_path)
        gt = parse_trajectory_file(gt_path)
        assert f"ATE aligned: {ate(est, gt, align=True)!r} m" in out
        assert f"ATE unaligned: {ate(est, gt, align=False)!r} m" in out

    def test_identical_files_give_zero(self, tmp_path, capsys):
        _, gt_path = self.make_pair(tmp_path)
        code, out, _ = run_cli(capsys, "evaluate", gt_path, gt_path, "--out", tmp_path)
        assert code == 0
        assert "ATE unaligned: 0.0 m" in out
        aligned = float(out.split("ATE aligned: ")[1].split(" m")[0])
        assert aligned < 1e-12

    def test_uniform_shift_aligns_to_zero(self, tmp_path, capsys):
        _, gt_path = self.make_pair(tmp_path)
        gt = parse_trajectory_file(gt_path)
        shifted = tmp_path / "shifted.txt"
        with open(shifted, "w") as fh:
            for pose in gt.poses:
                x, y, z = (float(v) for v in pose.translation + 3.5)
                fh.write(f"{pose.timestamp} {x!r} {y!r} {z!r} 0 0 0 1\n")
        code, out, _ = run_cli(capsys, "evaluate", shifted, gt_path, "--out", tmp_path)
        assert code == 0
        aligned = float(out.split("ATE aligned: ")[1].split(" m")[0])
        assert aligned < 1e-9

    def test_median_over_runs_and_error_list(self, tmp_path, capsys):
        est_path, gt_path = self.make_pair(tmp_path)
        est2 = tmp_path / "est2.txt"
        est2.write_text(est_path.read_text().replace("0 0 0 1\n", "0 0 0 1\n", 1))
        gt = parse_trajectory_file(gt_path)
        values = [ate(parse_trajectory_file(p), gt) for p in (est_path, gt_path, est2)]
        code, out, _ = run_cli(capsys, "evaluate", est_path, gt_path, est2, gt_path,
                               "--runs", "--out", tmp_path)
        assert code == 0
        assert "runs: 3" in out
        assert f"ATE aligned: {float(np.median(values))!r} m" in out
        lines = (tmp_path / "errors.csv").read_text().splitlines()
        assert lines[0] == "sequence_id,ate,ate_unaligned"
        assert len(lines) == 2

    def test_multiple_estimates_require_runs_flag(self, tmp_path, capsys):
        est_path, gt_path = self.make_pair(tmp_path)
        code, _, err = run_cli(capsys, "evaluate", est_path, est_path, gt_path,
                               "--out", tmp_path)
        assert code == 1
        assert "--runs" in err


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("plotrun")
    cfg = RunConfig(seed=1, mode="self_paced", budget=40, n_sequences=9,
                    seq_length=12, val_cadence=20, patience=99)
    run_training(cfg, out_dir=root)
    return root


@pytest.fixture(scope="module")
def ddpg_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("ddpgrun")
    cfg = RunConfig(seed=2, mode="ddpg", budget=60, n_sequences=9,
                    seq_length=12, val_cadence=30, patience=99)
    run_training(cfg, out_dir=root)
    return root


class TestPlotCommand:
    def test_all_kinds_render(self, run_dir, corpus, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "difficulty", corpus, "--out", tmp_path)
        assert code == 0
        errors = tmp_path / "errors.csv"
        errors.write_text("sequence_id,ate,ate_unaligned\na,0.1,0.2\nb,0.4,0.5\nc,1.4,1.5\n")
        for kind, src in (
            ("training_curves", run_dir / "metrics.csv"),
            ("weight_trace", run_dir / "metrics.csv"),
            ("difficulty_hist", tmp_path / "manifest.csv"),
            ("auc_curve", errors),
        ):
            code, _, _ = run_cli(capsys, "plot", src, "--kind", kind, "--out", tmp_path)
            assert code == 0
            svg = (tmp_path / f"{kind}.svg").read_text()
            assert svg.startswith("<svg ") and svg.rstrip().endswith("</svg>")

    def test_auc_label_matches_library(self, tmp_path, capsys):
        errors = tmp_path / "errors.csv"
        errors.write_text("sequence_id,ate,ate_unaligned\na,0.1,0.2\nb,0.4,0.5\n")
        run_cli(capsys, "plot", errors, "--kind", "auc_curve", "--out", tmp_path)
        svg = (tmp_path / "auc_curve.svg").read_text()
        assert f"AUC = {auc([0.1, 0.4]):.4f}" in svg

    def test_rerun_is_byte_identical(self, run_dir, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code, _, _ = run_cli(capsys, "plot", run_dir / "metrics.csv",
                                 "--kind", "weight_trace", "--out", out)
            assert code == 0
        assert (a / "weight_trace.svg").read_bytes() == (b / "weight_trace.svg").read_bytes()
        assert b"<svg" in (a / "weight_trace.svg").read_bytes()


class TestAgentInspect:
    def test_summary_and_trace(self, ddpg_dir, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "agent-inspect", ddpg_dir, "--out", tmp_path)
        assert code == 0
        for name in ("flow", "pose", "rotation"):
            assert f"agent {name}:" in out
        trace = (tmp_path / "weight_trace.csv").read_text().splitlines()
        assert trace[0] == "step,w_f,w_p,w_r"
        assert len(trace) == 61
        metrics = (ddpg_dir / "metrics.csv").read_text().splitlines()
        first = metrics[1].split(",")
        assert trace[1] == ",".join([first[0], first[5], first[6], first[7]])

    def test_rerun_is_byte_identical(self, ddpg_dir, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli(capsys, "agent-inspect", ddpg_dir, "--out", out)[0] == 0
        assert (a / "weight_trace.csv").read_bytes() == (b / "weight_trace.csv").read_bytes()

    def test_non_run_dir_is_data_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "agent-inspect", tmp_path, "--out", tmp_path)
        assert code == 2

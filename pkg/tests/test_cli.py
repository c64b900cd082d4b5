"""Tests for the command-line interface."""

import json

import numpy as np
import pytest

from salientservo.cli import main
from salientservo.metrics import evaluate_directories
from salientservo.saliency import SaliencyMap, save_mask
from salientservo.trace import read_jsonl


class TestRunCommand:
    def test_bundled_reach_scenario(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["run", "--scenario", "reach_ball_topdown", "--seed", "0",
                     "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "success rate: 100%" in printed
        assert "converged" in printed
        summary = json.loads((out / "summary.json").read_text())
        assert summary["success_rate"] == 100.0
        assert summary["statuses"] == ["converged"]
        trace = read_jsonl(out / "trace.jsonl")
        assert trace.scenario == "reach_ball_topdown"

    def test_missing_scenario(self, tmp_path, capsys):
        code = main(["run", "--scenario", str(tmp_path / "nope.yaml")])
        assert code != 0
        assert "scenario not found" in capsys.readouterr().err

    def test_max_iters_zero(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["run", "--scenario", "reach_ball_topdown", "--max-iters", "0",
                     "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["success_rate"] == 0.0
        assert summary["statuses"] == ["iter_budget", "iter_budget"]

    def test_save_masks(self, tmp_path):
        out = tmp_path / "run"
        code = main(["run", "--scenario", "reach_ball_topdown", "--max-iters", "3",
                     "--max-attempts", "1", "--out", str(out), "--save-masks"])
        assert code == 0
        masks = list((out / "masks").glob("*.pgm"))
        assert len(masks) == 4  # steps 0..3, one prompt

    def test_constraints_file_source(self, tmp_path):
        plan = tmp_path / "plan.yaml"
        plan.write_text("reach: [p2p, p2p]\n")
        out = tmp_path / "run"
        code = main(["run", "--scenario", "reach_ball_topdown",
                     "--constraints", str(plan), "--out", str(out)])
        assert code == 0
        trace = read_jsonl(out / "trace.jsonl")
        record = trace.attempts[0].stages[0].records[0]
        assert [f["kind"] for f in record.features] == ["p2p", "p2p"]

    def test_constraints_file_unknown_stage(self, tmp_path, capsys):
        plan = tmp_path / "plan.yaml"
        plan.write_text("warp: [p2p]\n")
        code = main(["run", "--scenario", "reach_ball_topdown",
                     "--constraints", str(plan), "--out", str(tmp_path / "r")])
        assert code != 0
        assert "unknown stage" in capsys.readouterr().err

    def test_propose_source(self, tmp_path):
        out = tmp_path / "run"
        code = main(["run", "--scenario", "reach_ball_topdown", "--propose",
                     "--out", str(out)])
        assert code == 0
        trace = read_jsonl(out / "trace.jsonl")
        record = trace.attempts[0].stages[0].records[0]
        assert [f["kind"] for f in record.features] == ["p2p"]


class TestEvalCommand:
    def write_dirs(self, tmp_path, extra=False):
        pred = tmp_path / "pred"
        gt = tmp_path / "gt"
        pred.mkdir()
        gt.mkdir()
        values = np.zeros((16, 16))
        values[4:12, 4:12] = 1.0
        mask = SaliencyMap(values)
        for d in (pred, gt):
            save_mask(mask, d / "x.png")
            save_mask(mask, d / "y.png")
        if extra:
            save_mask(mask, pred / "z.png")
        return pred, gt

    def test_identical_dirs(self, tmp_path, capsys):
        pred, gt = self.write_dirs(tmp_path)
        report_path = tmp_path / "report.json"
        code = main(["eval", "--pred", str(pred), "--gt", str(gt),
                     "--out", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["aggregate"]["miou"] == 1.0
        assert report["aggregate"]["mae"] == 0.0
        assert "mIoU: 1.0000" in capsys.readouterr().out

    def test_unpaired_file(self, tmp_path, capsys):
        pred, gt = self.write_dirs(tmp_path, extra=True)
        code = main(["eval", "--pred", str(pred), "--gt", str(gt),
                     "--out", str(tmp_path / "r.json")])
        assert code != 0
        assert "z" in capsys.readouterr().err

    def test_report_matches_library(self, tmp_path):
        pred, gt = self.write_dirs(tmp_path)
        report_path = tmp_path / "report.json"
        main(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(report_path)])
        direct = evaluate_directories(pred, gt)
        assert json.loads(report_path.read_text()) == json.loads(
            json.dumps(direct)
        )


class TestKernelsCommand:
    def test_spot_checks_print(self, capsys):
        code = main(["kernels", "--tokens", "3", "--dim", "4", "--seed", "1"])
        assert code == 0
        out = capsys.readouterr().out
        assert "row sums" in out
        assert "masked position: 0.000e+00" in out
        assert "gradient check" in out

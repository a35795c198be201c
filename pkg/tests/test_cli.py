import json
import math
from pathlib import Path

import numpy as np
import pytest

import main
import run_eval
from core.cloud_io import save_cloud
from core.errors import ConfigError
from pipeline.density import DensifyEvent
from pipeline.report import StageReport
from report_checker import (
    check_cloud,
    check_gamma_gates,
    check_perceptual_gates,
    check_results,
    check_run,
    check_stage_gates,
)
from run_ablate import format_table
from run_eval import format_eval_report
from tables import build_table, format_cell, metric_rows, stage_table
from utils import utils
from utils.config import RunConfig, load_config, parse_overrides, write_config

from conftest import random_cloud

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestConfig:

    def test_defaults(self):
        cfg = load_config()
        assert cfg == RunConfig()
        assert cfg.io.resolution == 512
        assert cfg.prior.kind == "gt"
        assert cfg.pixelwise.ref_view_weight == 0.0
        assert [cfg.stage(s).name for s in ("coarse", "viewwise", "pixelwise")] == ["coarse", "viewwise", "pixelwise"]

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[io]\nresolution = 64\n\n[scene]\nstyle = braid\nbase_color = 0.1, 0.2, 0.3\n"
                        "\n[viewwise]\nfixed_gamma = 0.7\n")
        cfg = load_config(str(path), ["io.views=12", "viewwise.fixed_gamma=none"], seed=5)
        assert cfg.io.resolution == 64 and cfg.io.views == 12
        assert cfg.scene.style == "braid"
        assert cfg.scene.base_color == (0.1, 0.2, 0.3)
        assert cfg.viewwise.fixed_gamma is None
        assert cfg.seed == 5
        assert cfg.scene_spec().seed == 5
        assert cfg.rig().width == 64

    @pytest.mark.parametrize("name", [None, "default.ini", "calibration.ini"])
    def test_gradient_descent_is_the_default_optimizer(self, name):
        cfg = load_config(str(CONFIGS / name) if name else None)
        assert [cfg.stage(s).optimizer for s in ("coarse", "viewwise", "pixelwise")] == ["sgd"] * 3
        assert load_config(overrides=["coarse.optimizer=adam"]).coarse.optimizer == "adam"

    def test_ini_round_trip(self, tmp_path):
        cfg = load_config(overrides=["coarse.iters=7", "camera.focal_mm=35", "viewwise.fixed_gamma=0.65",
                                     "run.name=roundtrip"])
        write_config(cfg, tmp_path / "cfg.ini")
        assert load_config(str(tmp_path / "cfg.ini")) == cfg

    @pytest.mark.parametrize("override", [
        "nosuch.key=1",
        "io.nosuch=1",
        "io.resolution=abc",
        "io.resolution=4",
        "scene.style=mohawk",
        "scene.seed=3",
        "coarse.name=other",
        "coarse.optimizer=lbfgs",
        "prior.kind=diffusion",
    ])
    def test_rejected_values(self, override):
        with pytest.raises(ConfigError):
            load_config(overrides=[override])

    def test_malformed_overrides(self):
        assert parse_overrides(["io.views=3", "io.resolution=16"]) == {"io": {"views": "3", "resolution": "16"}}
        for bad in ("io.views", "views=3", ".views=3", "io.=3"):
            with pytest.raises(ConfigError):
                parse_overrides([bad])

    def test_unknown_stage(self):
        with pytest.raises(ConfigError):
            RunConfig().stage("refine")


class TestResults:

    def test_save_and_update(self, tmp_path):
        path = tmp_path / "res" / "eval.json"
        utils.save_result({"views": 2, "mean": {"l1": 0.5, "psnr_db": float("nan")}}, path, "a", 1.23456)
        utils.save_result({"views": 3}, path, "b")
        data = utils.load_results(path)
        assert list(data) == ["a", "b"]
        assert data["a"]["mean"]["psnr_db"] is None
        assert data["a"]["time"] == 1.235
        assert "time" not in data["b"]

    def test_numpy_values_are_written(self, tmp_path):
        path = tmp_path / "r.json"
        utils.save_result({"count": np.int64(4), "rows": [np.float64(0.25)]}, path, "run")
        assert json.loads(path.read_text())["run"] == {"count": 4, "rows": [0.25]}

    def test_missing_or_broken_file(self, tmp_path):
        assert utils.load_results(tmp_path / "absent.json") == {}
        (tmp_path / "bad.json").write_text("{not json")
        assert utils.load_results(tmp_path / "bad.json") == {}


class TestTables:

    def test_best_value_is_bold(self):
        rows = metric_rows([{"l1": 0.2, "psnr_db": 20.0, "perceptual": 0.5},
                            {"l1": 0.1, "psnr_db": 25.0, "perceptual": None}])
        assert rows[0] == r"$L_1$ & 0.2000 & \textbf{0.1000} \\"
        assert rows[1] == r"PSNR & 20.00 & \textbf{25.00} \\"
        assert rows[2] == r"Perceptual & \textbf{0.5000} & N/A \\"

    def test_format_cell(self):
        assert format_cell(None, True) == "N/A"
        assert format_cell(math.nan, False) == "N/A"
        assert format_cell(31.4159, False) == "31.42"

    def test_build_table(self):
        text = build_table(["Metric", "A"], ["x & 1 \\\\"], caption="c", label="tab:x", float_env=False)
        assert text.splitlines() == [r"\begin{tabular}{l|c}", r"Metric & A \\", r"\hline", "x & 1 \\\\",
                                     r"\end{tabular}", r"\caption{c}", r"\label{tab:x}"]

    def test_stage_table_with_missing_stage(self):
        entry = {"stages": {"coarse": {"metrics": {"l1": 0.3, "psnr_db": 15.0, "perceptual": 0.9}}}}
        text = stage_table(entry)
        assert r"\textbf{0.3000} & N/A & N/A" in text


class TestTextReports:

    def test_eval_report(self):
        row = {"l1": 0.5, "psnr_db": 20.0, "perceptual": 0.125}
        text = format_eval_report([row], [3], row)
        assert text == ("view index=3 l1=0.5 psnr_db=20.0 perceptual=0.125\n"
                        "mean views=1 l1=0.5 psnr_db=20.0 perceptual=0.125\n")

    def test_ablation_table(self):
        metrics = {"l1": [0.5, 0.25], "perceptual": [1.0, 2.0], "psnr_db": [20.0, 30.5]}
        assert format_table(["γ=0.5", "γ=0.65"], metrics) == (
            "metric\tγ=0.5\tγ=0.65\nL1\t0.5\t0.25\nPerceptual\t1\t2\nPSNR\t20\t30.5\n")


def _valid_run_dir(path):
    report = StageReport(stage="coarse", iters=2)
    report.add_checkpoint(0, 6, {})
    report.events.append(DensifyEvent(step=1, before=6, splits=1, clones=1, pruned=0, after=8))
    report.add_checkpoint(2, 8, {"loss_view": 0.1})
    report.final_count = 8
    report.save(path / "report_coarse.txt")
    save_cloud(random_cloud(8, seed=0), path / "theta0.gs")


class TestCheck:

    def test_valid_run(self, tmp_path, capsys):
        _valid_run_dir(tmp_path)
        assert check_run(tmp_path)
        assert "Status: INVALID" not in capsys.readouterr().out

    def test_empty_directory(self, tmp_path):
        assert not check_run(tmp_path)

    def test_broken_files(self, tmp_path):
        _valid_run_dir(tmp_path)
        (tmp_path / "theta1.gs").write_bytes(b"GSPL")
        assert isinstance(check_cloud(tmp_path / "theta1.gs"), list)
        assert not check_run(tmp_path)

    def test_unreadable_report(self, tmp_path):
        _valid_run_dir(tmp_path)
        (tmp_path / "report_viewwise.txt").write_text("stage name=viewwise\n")
        assert not check_run(tmp_path)


def _stages(psnr, perc):
    return {"stages": {name: {"metrics": {"l1": 0.1, "psnr_db": p, "perceptual": q}}
                       for name, p, q in zip(("coarse", "viewwise", "pixelwise"), psnr, perc)}}


class TestResultGates:

    def test_improving_stages_pass(self):
        assert check_stage_gates(_stages([20.0, 23.0, 23.05], [3.0, 2.5, 2.54])) == 'Valid stage gates'

    @pytest.mark.parametrize("psnr, perc", [
        ([20.0, 21.0, 21.5], [3.0, 2.5, 2.4]),     # Θ² below the PSNR floor
        ([24.0, 23.0, 24.0], [3.0, 2.5, 2.4]),     # Θ⁰ -> Θ¹ PSNR drop
        ([20.0, 25.0, 24.8], [3.0, 2.5, 2.4]),     # Θ¹ -> Θ² PSNR drop beyond slack
        ([20.0, 23.0, 24.0], [2.5, 2.5, 2.4]),     # no perceptual gain at Θ¹
        ([20.0, 23.0, 24.0], [3.0, 2.5, 2.6]),     # Θ² perceptual beyond tolerance
    ])
    def test_each_stage_gate_can_fail(self, psnr, perc):
        assert isinstance(check_stage_gates(_stages(psnr, perc)), list)

    def test_missing_stage_or_metrics(self):
        entry = _stages([20.0, 23.0, 24.0], [3.0, 2.5, 2.4])
        del entry["stages"]["pixelwise"]
        assert check_stage_gates(entry) == ['Missing stage(s): pixelwise']
        entry = _stages([20.0, None, 24.0], [3.0, 2.5, 2.4])
        assert isinstance(check_stage_gates(entry), list)

    def test_gamma_snapshots(self):
        good = {"steps": [200, 400, 600], "scheduled": {"l1": [0.3, 0.2, 0.2], "perceptual": [2.0, 1.9, 1.8]}}
        assert check_gamma_gates(good) == 'Valid γ ablation'
        bad = {"steps": [200, 400, 600], "scheduled": {"l1": [0.3, 0.2, 0.25], "perceptual": [2.0, 1.9, 1.8]}}
        assert check_gamma_gates(bad) == ['l1 increases at step 600: 0.2 -> 0.25']
        assert isinstance(check_gamma_gates({"scheduled": {"l1": [0.1], "perceptual": [1.0]}}), list)

    def test_perceptual_term(self):
        assert check_perceptual_gates({"metrics": {"perceptual": [2.6, 2.5, 2.4, 2.3]}}) == 'Valid perceptual ablation'
        assert isinstance(check_perceptual_gates({"metrics": {"perceptual": [2.6, 2.5, 2.3, 2.4]}}), list)
        assert isinstance(check_perceptual_gates({"metrics": {"perceptual": [2.6, 2.5]}}), list)

    def test_results_directory(self, tmp_path, capsys):
        assert not check_results(tmp_path)
        utils.save_result(_stages([20.0, 23.0, 24.0], [3.0, 2.5, 2.4]), tmp_path / "reconstruct.json", "calib_seed0")
        assert check_results(tmp_path)
        utils.save_result({"metrics": {"perceptual": [2.6, 2.5, 2.3, 2.4]}}, tmp_path / "ablate_perceptual.json",
                          "calib_seed0")
        assert not check_results(tmp_path)
        assert "ablate_perceptual.json [calib_seed0]" in capsys.readouterr().out


class TestMain:

    def test_check_exit_codes(self, tmp_path):
        assert main.main(["check", str(tmp_path)]) == 1
        _valid_run_dir(tmp_path)
        assert main.main(["check", str(tmp_path)]) == 0
        assert main.main(["check", str(tmp_path), "--res-dir", str(tmp_path / "res")]) == 1
        utils.save_result(_stages([20.0, 23.0, 24.0], [3.0, 2.5, 2.4]), tmp_path / "res" / "reconstruct.json", "run")
        assert main.main(["check", str(tmp_path), "--res-dir", str(tmp_path / "res")]) == 0

    def test_config_error_line(self, tmp_path, capsys):
        code = main.main(["gen", "--out", str(tmp_path), "--set", "io.resolution=abc"])
        assert code == 1
        err = capsys.readouterr().err.strip().splitlines()
        assert err[-1].startswith("error:config:[io] resolution:")

    def test_missing_input_is_a_config_error(self, tmp_path, capsys):
        code = main.main(["reconstruct", "--out", str(tmp_path), "--image", "a.png"])
        assert code == 1
        assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error:config:missing inputs:")

    def test_missing_file_is_an_io_error(self, tmp_path, capsys):
        code = main.main(["eval", "--cloud", str(tmp_path / "absent.gs"), "--manifest", str(tmp_path),
                          "--set", f"io.res_dir={tmp_path}"])
        assert code == 1
        assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error:io:")

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main.main([])

    def test_scene_reproduces_its_own_dataset(self, tmp_path):
        data, res = tmp_path / "data", tmp_path / "res"
        small = ["io.resolution=32", "io.views=1", "io.held_out_views=2",
                 "scene.strand_count=6", "scene.gaussians_per_strand=4", f"io.res_dir={res}"]
        assert main.main(["gen", "--out", str(data), *[a for item in small for a in ("--set", item)]]) == 0

        result = run_eval.main(load_config(overrides=[f"io.res_dir={res}"]), str(data / "scene.gs"),
                               str(data / "held_out"))
        assert result["views"] == 2
        assert result["mean"]["l1"] == 0.0
        assert result["mean"]["psnr_db"] == 100.0


TINY = [
    "io.resolution=16", "io.views=3", "io.held_out_views=2",
    "scene.strand_count=6", "scene.gaussians_per_strand=4",
    "init.points=40",
    "coarse.iters=2", "coarse.batch_views=1", "coarse.checkpoint_interval=1",
    "viewwise.iters=2", "viewwise.batch_views=1", "viewwise.gamma_period=1",
    "pixelwise.iters=2", "pixelwise.batch_views=1",
]


@pytest.mark.slow
def test_gen_reconstruct_eval_check(tmp_path):
    data, run, res = tmp_path / "data", tmp_path / "run", tmp_path / "res"
    common = [arg for item in TINY + [f"io.res_dir={res}"] for arg in ("--set", item)]

    assert main.main(["gen", "--out", str(data), *common]) == 0
    assert (data / "manifest.tsv").exists() and (data / "held_out" / "manifest.tsv").exists()

    assert main.main(["reconstruct", "--data", str(data), "--out", str(run), *common]) == 0
    for name in ("theta0.gs", "theta1.gs", "theta2.gs", "report_coarse.txt", "turntable.png"):
        assert (run / name).exists()

    assert main.main(["eval", "--cloud", str(run / "theta2.gs"), "--manifest", str(data / "held_out"),
                      "--hair", str(data / "hair.gs"), "--report", str(run / "eval.txt"), *common]) == 0
    assert (run / "eval.txt").read_text().splitlines()[-1].startswith("mean views=2 ")

    assert main.main(["check", str(run)]) == 0
    assert set(utils.load_results(res / "reconstruct.json")) == {"run_seed0"}

    assert main.main(["ablate-gamma", "--data", str(data), "--out", str(tmp_path / "gamma"),
                      "--theta0", str(run / "theta0.gs"), "--fixed-gamma", "0.5", *common]) == 0
    entry = utils.load_results(res / "ablate_gamma.json")["run_seed0"]
    assert entry["columns"] == ["γ=0.5", "γ=0.65"]
    assert len(entry["scheduled"]["l1"]) == 2 and len(entry["control"]["l1"]) == 2

"""End-to-end gates on the 128x128 calibration scene (`pytest -m slow`)."""

from pathlib import Path

import pytest

import main
from report_checker import check_gamma_gates, check_perceptual_gates, check_run, check_stage_gates
from utils import utils

CALIBRATION = str(Path(__file__).resolve().parent.parent / "configs" / "calibration.ini")
RUN_KEY = "calibration_seed0"

pytestmark = pytest.mark.slow


def _args(res):
    return ["--config", CALIBRATION, "--seed", "0", "--set", f"io.res_dir={res}"]


@pytest.fixture(scope="module")
def calibration(tmp_path_factory):
    root = tmp_path_factory.mktemp("calibration")
    data, run, res = root / "data", root / "run", root / "res"
    assert main.main(["gen", "--out", str(data), *_args(res)]) == 0
    assert main.main(["reconstruct", "--data", str(data), "--out", str(run), *_args(res)]) == 0
    return {"root": root, "data": data, "run": run, "res": res}


class TestCalibration:

    def test_stages_improve_and_reach_the_psnr_floor(self, calibration):
        entry = utils.load_results(calibration["res"] / "reconstruct.json")[RUN_KEY]
        assert check_stage_gates(entry) == 'Valid stage gates'

    def test_densify_bookkeeping_and_clouds(self, calibration):
        assert check_run(calibration["run"])
        entry = utils.load_results(calibration["res"] / "reconstruct.json")[RUN_KEY]
        assert all(stage["count"] > 0 for stage in entry["stages"].values())

    def test_same_seed_gives_identical_clouds(self, calibration):
        again, res = calibration["root"] / "run_again", calibration["root"] / "res_again"
        assert main.main(["reconstruct", "--data", str(calibration["data"]), "--out", str(again), *_args(res)]) == 0
        for name in ("theta0.gs", "theta1.gs", "theta2.gs"):
            assert (again / name).read_bytes() == (calibration["run"] / name).read_bytes()

    def test_gamma_schedule_never_hurts(self, calibration):
        out = calibration["root"] / "gamma"
        assert main.main(["ablate-gamma", "--data", str(calibration["data"]), "--out", str(out),
                          "--theta0", str(calibration["run"] / "theta0.gs"), *_args(calibration["res"])]) == 0
        entry = utils.load_results(calibration["res"] / "ablate_gamma.json")[RUN_KEY]
        assert entry["steps"] == [200, 400, 600]
        assert check_gamma_gates(entry) == 'Valid γ ablation'

    def test_perceptual_term_lowers_perceptual_error(self, calibration):
        out = calibration["root"] / "perceptual"
        assert main.main(["ablate-perceptual", "--data", str(calibration["data"]), "--out", str(out),
                          "--theta0", str(calibration["run"] / "theta0.gs"), *_args(calibration["res"])]) == 0
        entry = utils.load_results(calibration["res"] / "ablate_perceptual.json")[RUN_KEY]
        assert entry["beta"] == 0.5
        assert check_perceptual_gates(entry) == 'Valid perceptual ablation'

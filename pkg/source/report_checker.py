import argparse
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Union

from core.cloud_io import load_cloud
from core.errors import GsliftError
from pipeline.report import StageReport
from utils import utils
from utils.config import STAGES

# float32 storage of unit quaternions
QUATERNION_TOLERANCE = 1e-5


def fatal_errors(report: StageReport) -> List[str]:
    fatal_errors = []

    if len(report.checkpoints) == 0:
        fatal_errors.append('The report has no checkpoint!!!')
        return fatal_errors

    if report.checkpoints[0].step != 0:
        fatal_errors.append('The first checkpoint must be at step 0!!!')

    if report.final_count <= 0:
        fatal_errors.append('The final primitive count must be positive!!!')

    return fatal_errors


def check_report(report: StageReport) -> Union[str, List[str]]:
    """'Valid report' or the list of broken bookkeeping identities."""
    errors = fatal_errors(report)
    if errors:
        return errors

    steps = [cp.step for cp in report.checkpoints]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        errors.append('Checkpoint steps are not strictly increasing')
    if steps[-1] != report.iters:
        errors.append(f'The last checkpoint is at step {steps[-1]}, not at iters={report.iters}')

    # the primitive count only changes at densify events
    count = report.checkpoints[0].count
    events = sorted(report.events, key=lambda ev: ev.step)
    for ev in events:
        if not ev.consistent():
            errors.append(f'Densify at step {ev.step}: after={ev.after} != before + splits + clones - pruned')
        if ev.before != count:
            errors.append(f'Densify at step {ev.step}: before={ev.before} but the count was {count}')
        count = ev.after
    if count != report.final_count:
        errors.append(f'Final count {report.final_count} does not follow the densify events ({count})')

    for cp in report.checkpoints:
        expected = report.checkpoints[0].count
        for ev in events:
            if ev.step <= cp.step:
                expected = ev.after
        if cp.count != expected:
            errors.append(f'Checkpoint at step {cp.step} reports {cp.count} primitives, expected {expected}')

    return 'Valid report' if len(errors) == 0 else errors


def check_cloud(path: Union[str, Path]) -> Union[str, List[str]]:
    try:
        cloud = load_cloud(path)
    except GsliftError as exc:
        return [f'Unreadable cloud: {exc}']
    errors = []
    if len(cloud) == 0:
        errors.append('The cloud is empty')
    err = cloud.quaternion_norm_error()
    if err > QUATERNION_TOLERANCE:
        errors.append(f'Quaternions are not unit-norm (max error {err:.3g})')
    return 'Valid cloud' if len(errors) == 0 else errors


def check_run(directory: Union[str, Path]) -> bool:
    """Check every report_<stage>.txt and thetaK.gs of a run directory; True when all are valid."""
    directory = Path(directory)
    reports = sorted(f for f in os.listdir(directory) if f.startswith('report_') and f.endswith('.txt'))
    clouds = sorted(f for f in os.listdir(directory) if f.startswith('theta') and f.endswith('.gs'))
    if not reports and not clouds:
        print(f'No reports or clouds in {directory}')
        return False

    all_valid = True
    for f in reports:
        try:
            message = check_report(StageReport.load(directory / f))
        except GsliftError as exc:
            message = [f'Unreadable report: {exc}']
        all_valid &= _print_status(f, message)
    for f in clouds:
        all_valid &= _print_status(f, check_cloud(directory / f))
    return all_valid


# calibration gates over res/*.json entries
MIN_PSNR_DB = 22.0
PSNR_SLACK_DB = 0.1
PERCEPTUAL_SLACK = 0.02


def _stage_metric(stages: Dict, name: str, key: str) -> Optional[float]:
    return stages.get(name, {}).get("metrics", {}).get(key)


def check_stage_gates(entry: Dict) -> Union[str, List[str]]:
    """Θ⁰ → Θ¹ → Θ² must improve on the held-out views, and Θ² must reach MIN_PSNR_DB."""
    stages = entry.get("stages", {})
    missing = [name for name in STAGES if name not in stages]
    if missing:
        return [f'Missing stage(s): {", ".join(missing)}']
    psnr = [_stage_metric(stages, name, "psnr_db") for name in STAGES]
    perc = [_stage_metric(stages, name, "perceptual") for name in STAGES]
    if None in psnr or None in perc:
        return ['Held-out metrics are missing (reconstruct without held-out views?)']

    errors = []
    if psnr[2] < MIN_PSNR_DB:
        errors.append(f'PSNR(Θ²) = {psnr[2]:.2f} dB is below {MIN_PSNR_DB:g} dB')
    if not psnr[0] < psnr[1]:
        errors.append(f'PSNR does not improve from Θ⁰ ({psnr[0]:.2f}) to Θ¹ ({psnr[1]:.2f})')
    if not psnr[1] <= psnr[2] + PSNR_SLACK_DB:
        errors.append(f'PSNR drops from Θ¹ ({psnr[1]:.2f}) to Θ² ({psnr[2]:.2f})')
    if not perc[0] > perc[1]:
        errors.append(f'Perceptual error does not improve from Θ⁰ ({perc[0]:.4g}) to Θ¹ ({perc[1]:.4g})')
    if not perc[1] >= perc[2] - PERCEPTUAL_SLACK * perc[1]:
        errors.append(f'Perceptual error of Θ² ({perc[2]:.4g}) exceeds Θ¹ ({perc[1]:.4g}) beyond tolerance')
    return 'Valid stage gates' if len(errors) == 0 else errors


def check_gamma_gates(entry: Dict) -> Union[str, List[str]]:
    """L1 and perceptual error must not increase from one γ snapshot to the next."""
    scheduled = entry.get("scheduled", {})
    errors = []
    for key in ("l1", "perceptual"):
        values = scheduled.get(key, [])
        if len(values) < 2 or None in values:
            errors.append(f'{key}: need at least two snapshots with metrics, got {values}')
            continue
        steps = entry.get("steps") or list(range(len(values)))
        for i in range(1, len(values)):
            if values[i] > values[i - 1]:
                errors.append(f'{key} increases at step {steps[i]}: {values[i - 1]:.4g} -> {values[i]:.4g}')
    return 'Valid γ ablation' if len(errors) == 0 else errors


def check_perceptual_gates(entry: Dict) -> Union[str, List[str]]:
    """The run with the perceptual term must end with no larger perceptual error than the run without."""
    values = entry.get("metrics", {}).get("perceptual", [])
    if len(values) != 4 or None in values:
        return [f'Expected four perceptual values (Θ¹/Θ² without and with), got {values}']
    without, with_term = values[2], values[3]
    if with_term > without:
        return [f'Perceptual error with the term ({with_term:.4g}) exceeds the run without it ({without:.4g})']
    return 'Valid perceptual ablation'


RESULT_GATES = {
    "reconstruct.json": check_stage_gates,
    "ablate_gamma.json": check_gamma_gates,
    "ablate_perceptual.json": check_perceptual_gates,
}


def check_results(res_dir: Union[str, Path]) -> bool:
    """Apply the calibration gates to every entry of the JSON results in `res_dir`."""
    res_dir = Path(res_dir)
    found = False
    all_valid = True
    for file_name, gate in RESULT_GATES.items():
        for key, entry in utils.load_results(res_dir / file_name).items():
            found = True
            all_valid &= _print_status(f'{file_name} [{key}]', gate(entry))
    if not found:
        print(f'No results in {res_dir}')
        return False
    return all_valid


def _print_status(name: str, message) -> bool:
    status = "VALID" if type(message) == str else "INVALID"
    message_str = '\n\t  '.join(message) if status == "INVALID" else message
    print(f"  File: {name}\n    Status: {status}\n    Reason: {message_str}\n")
    return status == "VALID"


if __name__ == '__main__':

    parser = argparse.ArgumentParser(description="Check the stage reports and clouds of a reconstruction run.")
    parser.add_argument("run_directory", help="Directory holding report_<stage>.txt and thetaK.gs files")
    parser.add_argument("--res-dir", default=None, help="Also apply the calibration gates to the JSON results here")
    args = parser.parse_args()

    valid = check_run(args.run_directory)
    if args.res_dir:
        valid &= check_results(args.res_dir)
    sys.exit(0 if valid else 1)

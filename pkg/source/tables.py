import argparse
import math
import os
from typing import Dict, List, Optional, Sequence

from utils.utils import load_results

"""
LaTeX table generator for the JSON results under res/.

Tables:
  stages      res/reconstruct.json      columns Θ⁰ | Θ¹ | Θ²
  gamma       res/ablate_gamma.json     one column per γ snapshot
  perceptual  res/ablate_perceptual.json  Θ¹/Θ² without and with the perceptual term

Rows are L1, PSNR and Perceptual, measured inside the ground-truth hair mask of
the held-out views. The best value of every row is bold.
"""

ROWS = [("l1", "$L_1$", min), ("psnr_db", "PSNR", max), ("perceptual", "Perceptual", min)]
STAGE_COLUMNS = [("coarse", r"$\Theta^0$"), ("viewwise", r"$\Theta^1$"), ("pixelwise", r"$\Theta^2$")]


# --------------------- Data Loading --------------------- #

def load_run(file_name: str, run_name: Optional[str], base_dir: str = "res") -> Optional[dict]:
    """The named run of a result file, or its last run when no name is given."""
    data = load_results(os.path.join(base_dir, file_name))
    if not data:
        return None
    if run_name is None:
        return data[list(data)[-1]]
    return data.get(run_name)


# --------------------- Cell Extraction --------------------- #

def format_cell(value: Optional[float], best: bool) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "N/A"
    text = f"{value:.4f}" if abs(value) < 10 else f"{value:.2f}"
    return f"\\textbf{{{text}}}" if best else text


def metric_rows(columns: Sequence[Dict[str, Optional[float]]]) -> List[str]:
    body_lines = []
    for key, label, pick in ROWS:
        values = [col.get(key) if col else None for col in columns]
        finite = [v for v in values if v is not None and math.isfinite(v)]
        best = pick(finite) if finite else None
        cells = [label] + [format_cell(v, v is not None and v == best) for v in values]
        body_lines.append(" & ".join(cells) + r" \\")
    return body_lines


# --------------------- Table Construction --------------------- #

def build_table(header: Sequence[str], body_lines: Sequence[str], caption: Optional[str] = None,
                label: Optional[str] = None, float_env: bool = True) -> str:
    alignment = "l|" + "c" * (len(header) - 1)
    lines: List[str] = []
    if float_env:
        lines.append(r"\begin{table}[h!]")
        lines.append(r"\centering")

    lines.append(r"\begin{tabular}{" + alignment + "}")
    lines.append(" & ".join(header) + r" \\")
    lines.append(r"\hline")
    lines.extend(body_lines)
    lines.append(r"\end{tabular}")

    if caption:
        lines.append(f"\\caption{{{caption}}}")
    if label:
        lines.append(f"\\label{{{label}}}")

    if float_env:
        lines.append(r"\end{table}")

    return "\n".join(lines) + "\n"


def stage_table(entry: dict) -> str:
    stages = entry.get("stages", {})
    columns = [stages.get(name, {}).get("metrics") for name, _ in STAGE_COLUMNS]
    header = ["Metric"] + [title for _, title in STAGE_COLUMNS]
    return build_table(header, metric_rows(columns), "Held-out metrics after each stage", "tab:stages")


def _transpose(metrics: Dict[str, List[float]], n: int) -> List[Dict[str, float]]:
    return [{key: metrics[key][i] for key in metrics} for i in range(n)]


def gamma_table(entry: dict) -> str:
    titles = [c.replace("γ", r"$\gamma$") for c in entry["columns"]]
    body = metric_rows(_transpose(entry["scheduled"], len(titles)))
    if "control" in entry:
        body.append(r"\hline")
        body.append(f"\\multicolumn{{{len(titles) + 1}}}{{l}}{{fixed $\\gamma$={entry['fixed_gamma']:g}}}" + r" \\")
        body.extend(metric_rows(_transpose(entry["control"], len(titles))))
    caption = r"View-wise refinement at the end of each $\gamma$ period"
    return build_table(["Metric"] + titles, body, caption, "tab:gamma")


def perceptual_table(entry: dict) -> str:
    titles = [c.replace("Θ¹", r"$\Theta^1$").replace("Θ²", r"$\Theta^2$").replace(" p", " $p$")
              for c in entry["columns"]]
    body = metric_rows(_transpose(entry["metrics"], len(titles)))
    caption = f"Refinement without and with the perceptual term ($\\beta$={entry['beta']:g})"
    return build_table(["Metric"] + titles, body, caption, "tab:perceptual")


TABLES = {
    "stages": ("reconstruct.json", stage_table),
    "gamma": ("ablate_gamma.json", gamma_table),
    "perceptual": ("ablate_perceptual.json", perceptual_table),
}


def write_table(which: str, run_name: Optional[str] = None, base_res_dir: str = "res",
                output_dir: str = "output") -> Optional[str]:
    file_name, builder = TABLES[which]
    entry = load_run(file_name, run_name, base_res_dir)
    if entry is None:
        print(f"Skipping '{which}': no results in {os.path.join(base_res_dir, file_name)}")
        return None
    os.makedirs(output_dir, exist_ok=True)
    out_path = os.path.join(output_dir, f"{which}.tex")
    with open(out_path, "w") as f:
        f.write(builder(entry))
    print(f"Wrote {out_path}")
    return out_path


# --------------------- Main --------------------- #

def main():
    parser = argparse.ArgumentParser(description="Generate LaTeX tables from the JSON results.")
    parser.add_argument("--tables", nargs="+", default=list(TABLES), choices=list(TABLES))
    parser.add_argument("--run", default=None, help="Run key inside the result files (default: the last run).")
    parser.add_argument("--res-dir", type=str, default="res")
    parser.add_argument("--out-dir", type=str, default="output")
    args = parser.parse_args()

    for which in args.tables:
        write_table(which, args.run, args.res_dir, args.out_dir)


if __name__ == "__main__":
    main()

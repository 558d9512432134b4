"""Branch CSV and JSON snapshot emission.

The CSV dialect is fixed: comma separators, '.' decimals, 17 significant
digits, one header row in the canonical column order.  Reruns with identical
inputs produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

from .collocation import CollocationSolution
from .continuation import Branch

BRANCH_COLUMNS = [
    "step", "beta1", "d1", "d2", "lambda_re", "lambda_im", "eps1", "eps2",
    "c1", "c2", "norm_u", "norm_v", "norm_eta", "bnd_minus", "bnd_plus", "special",
]

PARAM_COLUMNS = {"beta1", "d1", "d2", "lambda_re", "lambda_im", "eps1", "eps2", "c1", "c2"}
DIAG_COLUMNS = {"norm_u", "norm_v", "norm_eta", "bnd_minus", "bnd_plus"}


def format_float(x: float) -> str:
    return f"{x:.17g}"


def branch_rows(branch: Branch, active: set[str]) -> list[str]:
    rows = [",".join(BRANCH_COLUMNS)]
    for point in branch.points:
        cells = []
        for col in BRANCH_COLUMNS:
            if col == "step":
                cells.append(str(point.step_index))
            elif col == "special":
                cells.append(point.flag)
            elif col in PARAM_COLUMNS:
                if col in active:
                    cells.append(format_float(point.solution.parameter_values[col]))
                else:
                    cells.append("")
            elif col in DIAG_COLUMNS:
                if col in point.diagnostics:
                    cells.append(format_float(point.diagnostics[col]))
                else:
                    cells.append("")
            else:
                raise KeyError(col)
        rows.append(",".join(cells))
    return rows


def write_branch_csv(path: Path, branch: Branch, active: set[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(branch_rows(branch, active)) + "\n")


def write_snapshot(path: Path, sol: CollocationSolution) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(sol.to_json() + "\n")


def write_summary(path: Path, summary: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")

"""Time-series CSV and summary JSON writers for simulator runs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from regenplan.churn_sim.engine import TIMESERIES_HEADER, SimResult


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_timeseries(result: SimResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMESERIES_HEADER)
        for row in result.timeseries:
            writer.writerow([_cell(v) for v in row])


def summary_document(result: SimResult) -> dict:
    return {
        "seed": result.config.seed,
        "config": result.config.to_dict(),
        "metrics": result.metrics,
    }


def write_summary(result: SimResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary_document(result), indent=2, sort_keys=True) + "\n")


def write_outputs(result: SimResult, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ts, summary = out / "timeseries.csv", out / "summary.json"
    write_timeseries(result, ts)
    write_summary(result, summary)
    return ts, summary

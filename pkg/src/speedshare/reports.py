"""File outputs: CSV curves/tables and a JSON summary, deterministically ordered.

Every writer emits rows in a fixed order with fixed columns so that two runs
with the same config and seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .harness import BaselineComparison, ScenarioReport, SweepPoint
from .protocol import from_fixed


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_summary(report_dict: dict, outdir: Path) -> Path:
    path = outdir / "summary.json"
    path.write_text(json.dumps(report_dict, indent=2) + "\n")
    return path


def write_scenario_outputs(report: ScenarioReport, outdir: Path) -> list[Path]:
    """Write summary.json plus per-round aggregate and local-error CSVs."""
    outdir.mkdir(parents=True, exist_ok=True)
    written = [write_summary(report.to_dict(), outdir)]
    grid = report.config.grid()
    for r in report.rounds:
        if r.recommendation is None:
            continue
        curve = r.recommendation.curve
        deviation = r.privacy.base_deviation
        rows = [
            (
                grid.speeds[j],
                curve[j],
                from_fixed(curve[j]),
                from_fixed(curve[j]) - deviation[j],
                deviation[j],
            )
            for j in range(grid.m)
        ]
        written.append(
            _write_csv(
                outdir / f"round{r.index:03d}_aggregate.csv",
                ("speed_kmh", "aggregate_fixed", "aggregate_real", "true_total", "deviation"),
                rows,
            )
        )
        vids = list(r.active_ids)
        error_rows = [
            (grid.speeds[j], *(r.privacy.local_error[v][j] for v in vids))
            for j in range(grid.m)
        ]
        written.append(
            _write_csv(
                outdir / f"round{r.index:03d}_local_error.csv",
                ("speed_kmh", *(f"error_{v}" for v in vids)),
                error_rows,
            )
        )
    if report.baseline is not None:
        written.extend(write_baseline_outputs(report.baseline, outdir))
    return written


def write_sweep_outputs(
    report_dict: dict, points: Sequence[SweepPoint], outdir: Path
) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = [write_summary(report_dict, outdir)]
    written.append(
        _write_csv(
            outdir / "accuracy_sweep.csv",
            ("m", "recommended_speed_kmh", "accuracy"),
            [(p.m, p.recommended_speed, p.accuracy) for p in points],
        )
    )
    return written


def write_baseline_outputs(comparison: BaselineComparison, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    result = comparison.dp_result
    rows = [
        (k, result.residuals[k], *state)
        for k, state in enumerate(result.trajectory)
    ]
    path = _write_csv(
        outdir / "baseline_trace.csv",
        ("iteration", "gradient_residual", *(f"speed_{v}" for v in comparison.fleet_ids)),
        rows,
    )
    return [path]

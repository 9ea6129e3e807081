"""Result tables and the cross-cell radar normalization.

The radar covers the six axes (fidelity, diversity, sampling speed,
utility, robustness, privacy). Each generator's raw metric values are
averaged across its cells, then positioned by min-max normalization over
all individual cell values; privacy is inverted afterwards so higher is
better on every axis.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .pipeline import FAMILY_ORDER, MetricsRecord

RADAR_METRICS = ("fidelity", "diversity", "sampling_speed", "utility", "robustness", "privacy")
INVERTED_METRICS = ("privacy",)  # lower raw value is better


@dataclass
class RadarRow:
    generator_id: str
    values: dict[str, float]


def _raw_metric(record: MetricsRecord, metric: str) -> float | None:
    if metric == "utility":
        return record.utility["accuracy"] if record.utility else None
    if metric == "robustness":
        return record.robustness["accuracy"] if record.robustness else None
    return getattr(record, metric)


def normalize_for_radar(
    records: list[MetricsRecord], normalize_over: str = "cells"
) -> list[RadarRow]:
    """Per-generator radar positions from a set of metric records.

    With normalize_over="cells" each generator's cross-cell mean is
    positioned against the min/max of all individual cell values; with
    "means" the min/max is taken over the per-generator means instead.
    Constant columns map to 0.5.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records to normalize")
    if normalize_over not in ("cells", "means"):
        raise ValueError("normalize_over must be 'cells' or 'means'")
    generators = sorted({r.generator_id for r in records if r.generator_id is not None})
    if not generators:
        raise ValueError("no generator-bearing records to place on the radar")

    rows = {g: {} for g in generators}
    for metric in RADAR_METRICS:
        cell_values: list[float] = []
        means: dict[str, float] = {}
        for g in generators:
            mine = [
                v
                for r in records
                if r.generator_id == g and (v := _raw_metric(r, metric)) is not None
            ]
            cell_values.extend(mine)
            means[g] = sum(mine) / len(mine) if mine else None
        reference = cell_values if normalize_over == "cells" else [
            m for m in means.values() if m is not None
        ]
        distinct = sorted(set(reference))
        if len(distinct) < 2:
            warnings.warn(
                f"metric {metric!r} has fewer than 2 distinct values; radar column set to 0.5",
                stacklevel=2,
            )
            for g in generators:
                rows[g][metric] = 0.5
            continue
        lo, hi = distinct[0], distinct[-1]
        for g in generators:
            if means[g] is None:
                rows[g][metric] = 0.5
                continue
            norm = (means[g] - lo) / (hi - lo)
            norm = min(max(norm, 0.0), 1.0)
            rows[g][metric] = 1.0 - norm if metric in INVERTED_METRICS else norm
    return [RadarRow(generator_id=g, values=rows[g]) for g in generators]


def _cell(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)  # shortest round-tripping representation
    return str(value)


def _write_table(rows: list[dict], columns: list[str], base: Path) -> list[Path]:
    csv_path = base.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    json_path = base.with_suffix(".json")
    json_path.write_text(json.dumps(rows, indent=2) + "\n")
    return [csv_path, json_path]


def _record_sort_key(r: MetricsRecord):
    return (
        FAMILY_ORDER.index(r.family),
        r.generator_id or "",
        r.multiplier or 0,
    )


def emit_tables(records: list[MetricsRecord], out_dir) -> list[Path]:
    """CSV tables (with JSON mirrors) for the run's records.

    One trilemma+privacy table across datasets, plus one
    utility/robustness table per dataset. Not-applicable cells render as
    "NA" in CSV and null in JSON.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create table directory {out}: {exc}") from exc
    written: list[Path] = []

    trilemma_rows = []
    seen: set[tuple[str, str]] = set()
    for r in sorted(records, key=lambda r: (r.dataset_id, r.generator_id or "")):
        if r.generator_id is None or (r.dataset_id, r.generator_id) in seen:
            continue
        seen.add((r.dataset_id, r.generator_id))
        trilemma_rows.append(
            {
                "dataset": r.dataset_id,
                "model": r.generator_id,
                "fidelity": r.fidelity,
                "diversity": r.diversity,
                "fid": r.fid,
                "privacy": r.privacy,
                "sampling_speed": r.sampling_speed,
            }
        )
    written += _write_table(
        trilemma_rows,
        ["dataset", "model", "fidelity", "diversity", "fid", "privacy", "sampling_speed"],
        out / "trilemma_privacy",
    )

    for dataset in sorted({r.dataset_id for r in records}):
        rows = []
        for r in sorted([r for r in records if r.dataset_id == dataset], key=_record_sort_key):
            rows.append(
                {
                    "experiment": r.family,
                    "model": r.generator_id,
                    "multiplier": r.multiplier,
                    "utility": r.utility["accuracy"] if r.utility else None,
                    "robustness": r.robustness["accuracy"] if r.robustness else None,
                    "utility_top_k": r.utility["top_k_accuracy"] if r.utility else None,
                    "robustness_top_k": r.robustness["top_k_accuracy"] if r.robustness else None,
                }
            )
        written += _write_table(
            rows,
            [
                "experiment",
                "model",
                "multiplier",
                "utility",
                "robustness",
                "utility_top_k",
                "robustness_top_k",
            ],
            out / f"utility_robustness_{dataset}",
        )
    return written

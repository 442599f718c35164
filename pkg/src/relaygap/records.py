"""CSV and JSON persistence for shot records and post-selection curves."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from .harness import CurvePoint, ShotRecord
from .problem import LogicalClass

SHOT_HEADER = [
    "shot",
    "seed",
    "gap",
    "erasure",
    "success",
    "forced_converged",
    "true_class",
    "decoded_class",
]
CURVE_HEADER = ["T", "ps_rate", "ler", "ler_per_round", "ci_low", "ci_high", "n_accepted"]


def format_float(value: float) -> str:
    """Shortest round-tripping text; ``inf`` for infinity."""
    if math.isinf(value) and value > 0:
        return "inf"
    return repr(float(value))


def _parse_flag(text: str, column: str) -> bool:
    if text not in ("0", "1"):
        raise ValueError(f"{column} must be 0 or 1, got {text!r}")
    return text == "1"


def _class_width(text: str) -> int:
    return 0 if text == "-" else 4 * len(text)


def write_shot_records(records: Iterable[ShotRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SHOT_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.shot_index,
                    r.shot_seed,
                    format_float(r.gap),
                    int(r.erasure),
                    int(r.success),
                    r.forced_converged_count,
                    r.true_class.to_hex(),
                    "" if r.decoded_class is None else r.decoded_class.to_hex(),
                ]
            )
    return path


def read_shot_records(path: Path, num_observables: int | None = None) -> list[ShotRecord]:
    """Load records written by :func:`write_shot_records`.

    Args:
        path: CSV file
        num_observables: Class width ``K``; inferred from the hex width
            (``4 * digits``) when omitted

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: On a wrong header or malformed row
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Records file not found: {path}")
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != SHOT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SHOT_HEADER)}, got {header}")
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SHOT_HEADER):
                raise ValueError(f"{path}: row {row_number} has {len(row)} fields")
            shot, seed, gap, erasure, success, forced, true_hex, decoded_hex = row
            k = _class_width(true_hex) if num_observables is None else num_observables
            try:
                records.append(
                    ShotRecord(
                        shot_index=int(shot),
                        shot_seed=int(seed),
                        true_class=LogicalClass.from_hex(true_hex, k),
                        gap=float(gap),
                        erasure=_parse_flag(erasure, "erasure"),
                        decoded_class=LogicalClass.from_hex(decoded_hex, k) if decoded_hex else None,
                        success=_parse_flag(success, "success"),
                        forced_converged_count=int(forced),
                    )
                )
            except ValueError as e:
                raise ValueError(f"{path}: row {row_number}: {e}") from e
    return records


def _curve_row(point: CurvePoint) -> list[str]:
    return [
        format_float(point.threshold),
        format_float(point.ps_rate),
        format_float(point.ler),
        format_float(point.ler_per_round),
        format_float(point.ci_low),
        format_float(point.ci_high),
        str(point.n_accepted),
    ]


def write_curve_csv(points: Iterable[CurvePoint], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        writer.writerows(_curve_row(p) for p in points)
    return path


def read_curve_csv(path: Path) -> list[CurvePoint]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Curve file not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CURVE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CURVE_HEADER)}, got {header}")
        return [
            CurvePoint(
                threshold=float(t),
                ps_rate=float(ps),
                ler=float(ler),
                ler_per_round=float(per_round),
                ci_low=float(low),
                ci_high=float(high),
                n_accepted=int(n),
            )
            for t, ps, ler, per_round, low, high, n in (row for row in reader if row)
        ]


def write_curve_json(
    points: Iterable[CurvePoint],
    path: Path,
    metadata: dict[str, Any] | None = None,
) -> Path:
    """Write the curve as JSON; an infinite threshold is stored as ``"inf"``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "version": "1.0",
        "metadata": metadata or {},
        "points": [
            {
                "T": "inf" if math.isinf(p.threshold) else p.threshold,
                "ps_rate": p.ps_rate,
                "ler": p.ler,
                "ler_per_round": p.ler_per_round,
                "ci_low": p.ci_low,
                "ci_high": p.ci_high,
                "n_accepted": p.n_accepted,
            }
            for p in points
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
    return path

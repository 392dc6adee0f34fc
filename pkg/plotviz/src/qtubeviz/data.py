"""Readers for the trajectory CSV schema and the run manifest.

Both readers validate the declared schema version and fail with a
descriptive message before any figure is touched, so a bad input never
produces an output file.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_SCHEMA = "qtube.trajectory.v1"
MANIFEST_SCHEMA = "qtube.manifest.v1"

# columns each figure kind actually draws
REQUIRED_COLUMNS = {
    "normalized_decay": ("k", "inf_err", "dist2_x1"),
    "projected_single": ("k", "u", "v"),
    "projected_multi": ("k", "u", "v"),
    "qlearn_rotated": ("k", "p", "q"),
}


@dataclass
class Trajectory:
    """One CSV worth of recorded iterates, parsed to arrays."""

    label: str
    columns: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]


def load_trajectory(path, required: tuple[str, ...], label: str = "") -> Trajectory:
    """Parse one records CSV, checking schema, columns, and non-emptiness.

    Raises
    ------
    ValueError
        On a wrong schema line, missing columns, or an empty table.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# schema: {CSV_SCHEMA}":
            raise ValueError(f"{path}: missing or unknown schema line {first!r}")
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [col for col in required if col not in names]
        if missing:
            raise ValueError(f"{path}: missing columns {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    columns = {
        col: np.array([float(row[col]) for row in rows]) for col in required
    }
    return Trajectory(label=label or path.stem, columns=columns)


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: not valid JSON ({err})") from None
    if not isinstance(doc, dict) or doc.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"{path}: missing or unknown manifest schema")
    return doc

"""CSV dataset ingestion/emission and flat key=value config files.

Dataset files carry the header `cluster_id,y,n`. Parse failures report the
offending line number. Numeric CSV output uses 6 significant digits.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .estimation import HistoricalData

DATASET_HEADER = ("cluster_id", "y", "n")


def fmt6(x: float) -> str:
    """6-significant-digit formatting used for all CSV numbers."""
    return f"{float(x):.6g}"


def parse_dataset(lines, source: str = "<memory>") -> HistoricalData:
    """Parse `cluster_id,y,n` rows into HistoricalData, validating as we go."""
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{source}: empty file") from None
    if [h.strip() for h in header] != list(DATASET_HEADER):
        raise DataError(f"{source}:1: expected header 'cluster_id,y,n', got {','.join(header)!r}")
    ids: list[str] = []
    counts: list[int] = []
    offsets: list[float] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise DataError(f"{source}:{lineno}: expected 3 fields, got {len(row)}")
        cid = row[0].strip()
        if cid in seen:
            raise DataError(f"{source}:{lineno}: duplicate cluster_id {cid!r}")
        seen.add(cid)
        try:
            y_val = float(row[1])
        except ValueError:
            raise DataError(f"{source}:{lineno}: count {row[1]!r} is not a number") from None
        if y_val < 0 or y_val != int(y_val):
            raise DataError(f"{source}:{lineno}: count must be a non-negative integer, got {row[1]}")
        try:
            n_val = float(row[2])
        except ValueError:
            raise DataError(f"{source}:{lineno}: offset {row[2]!r} is not a number") from None
        if not (n_val > 0):
            raise DataError(f"{source}:{lineno}: offset must be > 0, got {row[2]}")
        ids.append(cid)
        counts.append(int(y_val))
        offsets.append(n_val)
    if not ids:
        raise DataError(f"{source}: no data rows")
    return HistoricalData(np.array(counts), np.array(offsets), cluster_ids=tuple(ids))


def read_dataset(path: str | Path) -> HistoricalData:
    path = Path(path)
    with open(path, newline="") as fh:
        return parse_dataset(fh, source=str(path))


def write_dataset(stream, data: HistoricalData) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(DATASET_HEADER)
    ids = data.cluster_ids or tuple(f"c{i+1:03d}" for i in range(data.n_clusters))
    for cid, y, n in zip(ids, data.y, data.offsets):
        writer.writerow([cid, int(y), fmt6(n)])


def read_config(path: str | Path) -> dict[str, str]:
    """Flat `key = value` config; '#' starts a comment; keys are lowercased."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            out[key.strip().lower()] = value.strip()
    return out

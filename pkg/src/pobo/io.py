"""File formats: released matrices with JSON sidecars, observation logs,
CSV datasets and benchmark reports.

Every writer goes through :func:`atomic_write` so a failed run never leaves
a partial file under the final name.
"""

from __future__ import annotations

import contextlib
import csv
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .curator import DpParams, InputDataset, TransformedDataset
from .errors import ParseError, SchemaError
from .modeler import ObservationLog

__all__ = [
    "atomic_write",
    "sidecar_path",
    "write_matrix_csv",
    "read_matrix_csv",
    "save_transformed",
    "load_transformed",
    "write_log_csv",
    "read_log_csv",
    "load_csv_dataset",
    "write_json",
    "write_rows_csv",
]

LOG_HEADER = ("t", "row_index", "beta_t", "y_t")


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temporary sibling of ``path`` and rename it on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json") if path.suffix.lower() == ".csv" else path.with_name(path.name + ".json")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload: dict) -> None:
    with atomic_write(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def write_matrix_csv(path, matrix) -> None:
    """Headerless CSV, one row per matrix row, round-trip float precision."""
    A = np.asarray(matrix, dtype=float)
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in A:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}", row=lineno) from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseError(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.array(rows, dtype=float)


def save_transformed(path, released: TransformedDataset, extra: dict | None = None) -> Path:
    """Write ``Z`` as CSV and its provenance as a JSON sidecar; returns the sidecar path."""
    meta = released.metadata()
    if extra:
        meta.update(extra)
    side = sidecar_path(path)
    write_matrix_csv(path, released.rows)
    write_json(side, meta)
    return side


def load_transformed(path) -> TransformedDataset:
    Z = read_matrix_csv(path)
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except FileNotFoundError as exc:
        raise SchemaError(f"missing sidecar {side}") from exc
    missing = {"n", "d", "r", "epsilon", "delta", "omega", "sigma_min", "lifted", "projection_seed"} - meta.keys()
    if missing:
        raise SchemaError(f"{side}: missing fields {sorted(missing)}")
    if Z.shape != (meta["n"], meta["r"]):
        raise SchemaError(f"{path}: shape {Z.shape} disagrees with sidecar ({meta['n']}, {meta['r']})")
    return TransformedDataset(
        rows=Z,
        r=int(meta["r"]),
        dp=DpParams(meta["epsilon"], meta["delta"]),
        omega=float(meta["omega"]),
        lifted=bool(meta["lifted"]),
        sigma_min=float(meta["sigma_min"]),
        projection_seed=meta["projection_seed"],
        source_dim=int(meta["d"]),
    )


def write_log_csv(path, log: ObservationLog) -> None:
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for e in log:
            writer.writerow([e.t, e.row_index, repr(e.beta_t), repr(e.y_t)])


def read_log_csv(path) -> ObservationLog:
    log = ObservationLog()
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LOG_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(LOG_HEADER)}")
        for lineno, rec in enumerate(reader, start=1):
            try:
                log.append(int(rec["t"]), int(rec["row_index"]), float(rec["beta_t"]), float(rec["y_t"]))
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}", row=lineno) from exc
    return log


def load_csv_dataset(path, feature_columns: Sequence[str], target_column: str | None):
    """Read named feature columns (and optionally a target) from a headed CSV.

    Returns ``(InputDataset, targets)``; ``targets`` is None without a target
    column. Row numbers in errors count data rows from 1.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise SchemaError(f"{path}: missing header row")
        wanted = list(feature_columns) + ([target_column] if target_column else [])
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")
        features, targets = [], []
        for row_no, rec in enumerate(reader, start=1):
            vals = []
            for col in wanted:
                cell = rec.get(col)
                try:
                    v = float(cell)
                except (TypeError, ValueError):
                    raise ParseError(
                        f"{path}: row {row_no}, column {col!r}: cannot parse {cell!r} as a number",
                        row=row_no,
                        column=col,
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}: row {row_no}, column {col!r}: non-finite value", row=row_no, column=col)
                vals.append(v)
            features.append(vals[: len(feature_columns)])
            if target_column:
                targets.append(vals[-1])
    if not features:
        raise ParseError(f"{path}: no data rows")
    dataset = InputDataset(np.array(features, dtype=float))
    return dataset, (np.array(targets, dtype=float) if target_column else None)


def write_rows_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])

"""Dataset and sample-batch persistence.

Plain text CSV only: datasets carry a ``d=...,N=...`` header line, batches
carry an ``x0,...,x{d-1}`` column header, and floats are written in their
shortest round-trip form so save/load is bit-exact and reruns are
byte-identical. Lines starting with ``#`` are comments (used to embed the
producing config).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .samplers import SampleBatch
from .scores import Dataset

__all__ = [
    "DatasetFormatError",
    "format_float",
    "save_dataset",
    "load_dataset",
    "save_batch",
    "load_batch",
]


class DatasetFormatError(ValueError):
    """Malformed data file; the message carries the offending location."""


def format_float(value) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(value))


def _data_lines(path: Path):
    # yields (1-based line number, stripped text), skipping blanks and comments
    for i, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield i, line


def save_dataset(dataset: Dataset, path, comments=()) -> None:
    """Write ``d=...,N=...[,seed=...][,source=...]`` then one row per point."""
    path = Path(path)
    header = f"d={dataset.dim},N={dataset.n}"
    if dataset.seed is not None:
        header += f",seed={int(dataset.seed)}"
    if dataset.source:
        header += f",source={dataset.source}"
    lines = [f"# {c}" for c in comments]
    lines.append(header)
    lines.extend(",".join(format_float(v) for v in row) for row in dataset.points)
    path.write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    """Parse a dataset file; errors name the 1-based line that failed."""
    path = Path(path)
    lines = iter(_data_lines(path))
    try:
        header_no, header = next(lines)
    except StopIteration:
        raise DatasetFormatError(f"{path}: file has no header line") from None

    tags: dict[str, str] = {}
    for part in header.split(","):
        key, sep, value = part.partition("=")
        if not sep or not key.strip():
            raise DatasetFormatError(
                f"{path}: line {header_no}: header entry {part!r} is not key=value"
            )
        tags[key.strip()] = value.strip()
    try:
        dim = int(tags["d"])
        count = int(tags["N"])
    except KeyError as missing:
        raise DatasetFormatError(
            f"{path}: line {header_no}: header must declare d and N, missing {missing}"
        ) from None
    except ValueError:
        raise DatasetFormatError(
            f"{path}: line {header_no}: d and N must be integers"
        ) from None
    if dim < 1 or count < 1:
        raise DatasetFormatError(f"{path}: line {header_no}: d and N must be positive")
    seed = None
    if "seed" in tags:
        try:
            seed = int(tags["seed"])
        except ValueError:
            raise DatasetFormatError(
                f"{path}: line {header_no}: seed must be an integer"
            ) from None
    source = tags.get("source", "file")

    rows = np.empty((count, dim))
    filled = 0
    for line_no, line in lines:
        if filled >= count:
            raise DatasetFormatError(
                f"{path}: line {line_no}: more than the declared N={count} rows"
            )
        parts = line.split(",")
        if len(parts) != dim:
            raise DatasetFormatError(
                f"{path}: line {line_no}: expected {dim} columns, got {len(parts)}"
            )
        for j, token in enumerate(parts):
            try:
                value = float(token)
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: line {line_no}: column {j + 1}: not a number: {token!r}"
                ) from None
            if not np.isfinite(value):
                raise DatasetFormatError(
                    f"{path}: line {line_no}: column {j + 1}: non-finite value {token!r}"
                )
            rows[filled, j] = value
        filled += 1
    if filled != count:
        raise DatasetFormatError(
            f"{path}: header declares N={count} rows but found {filled}"
        )
    return Dataset(rows, seed=seed, source=source)


def save_batch(batch, path, comments=()) -> None:
    """Write points as CSV with an ``x0,...,x{d-1}`` header row."""
    pts = batch.points if isinstance(batch, SampleBatch) else np.atleast_2d(
        np.asarray(batch, dtype=float)
    )
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(f"x{j}" for j in range(pts.shape[1])))
    lines.extend(",".join(format_float(v) for v in row) for row in pts)
    path.write_text("\n".join(lines) + "\n")


def load_batch(path) -> np.ndarray:
    """Read a batch CSV written by :func:`save_batch`."""
    path = Path(path)
    lines = iter(_data_lines(path))
    try:
        header_no, header = next(lines)
    except StopIteration:
        raise DatasetFormatError(f"{path}: file has no header line") from None
    columns = header.split(",")
    if not all(c.strip() == f"x{j}" for j, c in enumerate(columns)):
        raise DatasetFormatError(
            f"{path}: line {header_no}: expected columns x0,...,x{{d-1}}, got {header!r}"
        )
    dim = len(columns)
    rows = []
    for line_no, line in lines:
        parts = line.split(",")
        if len(parts) != dim:
            raise DatasetFormatError(
                f"{path}: line {line_no}: expected {dim} columns, got {len(parts)}"
            )
        try:
            rows.append([float(tok) for tok in parts])
        except ValueError:
            raise DatasetFormatError(
                f"{path}: line {line_no}: row contains a non-numeric token"
            ) from None
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)

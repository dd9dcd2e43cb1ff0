"""
On-disk formats for fields, tables and run summaries.

Binary dump: little-endian int64 n, float64 L, then n float64 samples.
Text dump: two tab-separated columns (x, value) with a header row.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd

from wavelab.core.spectral import FieldPair, GridSpec
from wavelab.errors import GridError
from wavelab.logging_config import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

HEADER_N = np.dtype("<i8")
HEADER_L = np.dtype("<f8")
PAYLOAD = np.dtype("<f8")
FLOAT_FORMAT = "%.17g"


def write_field_binary(path: PathLike, values: np.ndarray, grid: GridSpec) -> Path:
    path = Path(path)
    values = np.asarray(values, dtype=PAYLOAD)
    if values.shape != (grid.n,):
        raise GridError(f"field has shape {values.shape}, grid expects ({grid.n},)")
    with open(path, "wb") as fh:
        fh.write(np.array([grid.n], dtype=HEADER_N).tobytes())
        fh.write(np.array([grid.half_length], dtype=HEADER_L).tobytes())
        fh.write(values.tobytes())
    return path


def read_field_binary(path: PathLike):
    """
    Load a binary dump.

    Returns:
        (values, grid)

    Raises:
        GridError: truncated or inconsistent file
    """
    raw = Path(path).read_bytes()
    head = HEADER_N.itemsize + HEADER_L.itemsize
    if len(raw) < head:
        raise GridError(f"{path}: file too short for a field header")
    n = int(np.frombuffer(raw[:HEADER_N.itemsize], dtype=HEADER_N)[0])
    half_length = float(np.frombuffer(raw[HEADER_N.itemsize:head], dtype=HEADER_L)[0])
    payload = np.frombuffer(raw[head:], dtype=PAYLOAD)
    if payload.size != n:
        raise GridError(f"{path}: header announces {n} samples, found {payload.size}")
    return payload.copy(), GridSpec(n, half_length)


def write_field_text(path: PathLike, values: np.ndarray, grid: GridSpec) -> Path:
    path = Path(path)
    frame = pd.DataFrame({"x": grid.x, "value": np.asarray(values, dtype=float)})
    frame.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT)
    return path


def read_field_text(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, sep="\t")


def write_pair(directory: PathLike, stem: str, pair: FieldPair) -> Dict[str, str]:
    """Dump both components as <stem>_eta.bin and <stem>_u.bin."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    eta = write_field_binary(directory / f"{stem}_eta.bin", pair.eta, pair.grid)
    u = write_field_binary(directory / f"{stem}_u.bin", pair.u, pair.grid)
    return {"eta": str(eta), "u": str(u)}


def read_pair(directory: PathLike, stem: str) -> FieldPair:
    directory = Path(directory)
    eta, grid_eta = read_field_binary(directory / f"{stem}_eta.bin")
    u, grid_u = read_field_binary(directory / f"{stem}_u.bin")
    if grid_eta != grid_u:
        raise GridError(f"components of '{stem}' were written on different grids")
    return FieldPair(eta, u, grid_eta)


def write_table(path: PathLike, rows: Union[pd.DataFrame, Iterable[Dict[str, Any]]],
                columns: Optional[Iterable[str]] = None) -> Path:
    """Tab-separated UTF-8 table with a header row and a stable column order."""
    path = Path(path)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    if columns is not None:
        frame = frame.reindex(columns=list(columns))
    frame.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT, encoding="utf-8")
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, sep="\t")


def write_summary(path: PathLike, summary: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=to_jsonable) + "\n", encoding="utf-8")
    logger.info("summary written", path=str(path), passed=summary.get("passed"))
    return path


def to_jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")

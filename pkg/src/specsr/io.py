"""Persistence: JSON-sidecar raw cubes, CSV spectral responses and matrices.

A cube is stored as two files: ``<base>.json`` holding a flat header (bands,
rows, cols, dtype, interleave, byte_order, optional description) and
``<base>.raw`` holding the samples band-sequentially in little-endian order.
Readers reject rather than truncate: every error names the offending file and,
where applicable, the field or row. float64 round-trips are bit-exact; float32
storage rounds each sample once.

CSV matrices are written with 17 significant digits, which preserves float64
values exactly across a write/read cycle.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .types import (
    FloatArray,
    SpectralCube,
    SpectralDictionary,
    SpectralResponse,
    validate_cube,
)

_DTYPES = {"f32": "<f4", "f64": "<f8"}
_REQUIRED_KEYS = ("bands", "rows", "cols", "dtype", "interleave", "byte_order")


@dataclass(frozen=True)
class CubeHeader:
    bands: int
    rows: int
    cols: int
    dtype: str = "f64"
    interleave: str = "bsq"
    byte_order: str = "little-endian"
    description: str | None = None

    def __post_init__(self) -> None:
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        if self.interleave != "bsq":
            raise ValueError(f"interleave must be 'bsq', got {self.interleave!r}")
        if self.byte_order != "little-endian":
            raise ValueError(
                f"byte_order must be 'little-endian', got {self.byte_order!r}"
            )

    def to_json_dict(self) -> dict:
        out = {
            "bands": self.bands,
            "rows": self.rows,
            "cols": self.cols,
            "dtype": self.dtype,
            "interleave": self.interleave,
            "byte_order": self.byte_order,
        }
        if self.description is not None:
            out["description"] = self.description
        return out


def write_cube(
    cube: SpectralCube,
    path_base: str | os.PathLike,
    dtype: str = "f64",
    description: str | None = None,
) -> None:
    """Write ``<path_base>.json`` and ``<path_base>.raw`` for a valid cube."""
    report = validate_cube(cube)
    if not report.ok:
        raise ValueError("refusing to write invalid cube: " + "; ".join(report.violations))
    header = CubeHeader(
        bands=cube.bands,
        rows=cube.rows,
        cols=cube.cols,
        dtype=dtype,
        description=description,
    )
    base = os.fspath(path_base)
    with open(base + ".json", "w") as fh:
        json.dump(header.to_json_dict(), fh, indent=2)
        fh.write("\n")
    cube.data.astype(_DTYPES[dtype]).tofile(base + ".raw")


def _read_header(path: str) -> CubeHeader:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(f"missing header file {path}") from None
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: header must be a JSON object")
    allowed = set(_REQUIRED_KEYS) | {"description"}
    for key in raw:
        if key not in allowed:
            raise ValueError(f"{path}: unknown header field {key!r}")
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ValueError(f"{path}: missing header field {key!r}")
    for key in ("bands", "rows", "cols"):
        v = raw[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ValueError(f"{path}: field {key!r} must be a positive integer, got {v!r}")
    for key in ("dtype", "interleave", "byte_order"):
        if not isinstance(raw[key], str):
            raise ValueError(f"{path}: field {key!r} must be a string, got {raw[key]!r}")
    if "description" in raw and not isinstance(raw["description"], str):
        raise ValueError(f"{path}: field 'description' must be a string")
    try:
        return CubeHeader(**raw)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None


def read_cube(path_base: str | os.PathLike) -> SpectralCube:
    """Inverse of :func:`write_cube`; validates size before reading samples."""
    base = os.fspath(path_base)
    header = _read_header(base + ".json")
    raw_path = base + ".raw"
    if not os.path.exists(raw_path):
        raise FileNotFoundError(f"missing raw file {raw_path}")
    itemsize = np.dtype(_DTYPES[header.dtype]).itemsize
    expected = header.bands * header.rows * header.cols * itemsize
    actual = os.path.getsize(raw_path)
    if actual != expected:
        raise ValueError(
            f"{raw_path}: length mismatch, file has {actual} bytes but header "
            f"implies {expected}"
        )
    data = np.fromfile(raw_path, dtype=_DTYPES[header.dtype])
    return SpectralCube(
        bands=header.bands,
        rows=header.rows,
        cols=header.cols,
        data=data.astype(np.float64),
    )


def read_srf(path: str | os.PathLike) -> SpectralResponse:
    """Parse a spectral response from CSV (one row per output band).

    Lines starting with '#' and blank lines are skipped. Errors cite the file
    and the 1-based line (and cell) that failed.
    """
    path = os.fspath(path)
    rows: list[list[float]] = []
    width: int | None = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            cells = text.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(
                    f"{path}: ragged row at line {lineno} "
                    f"({len(cells)} cells, expected {width})"
                )
            parsed = []
            for col, cell in enumerate(cells):
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell {cell.strip()!r} at line {lineno}, "
                        f"column {col}"
                    ) from None
                if value < 0:
                    raise ValueError(
                        f"{path}: negative weight {value!r} at line {lineno}, column {col}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    weights = np.asarray(rows, dtype=np.float64)
    normalized = bool(np.all(np.abs(weights.sum(axis=1) - 1.0) <= 1e-9))
    try:
        return SpectralResponse(weights=weights, row_normalized=normalized)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None


def export_matrix_csv(matrix: np.ndarray, path: str | os.PathLike) -> None:
    """One CSV row per matrix row at full float64 precision."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected 2-D matrix, got ndim={matrix.ndim}")
    if matrix.size and not np.isfinite(matrix).all():
        raise ValueError("refusing to export non-finite matrix")
    with open(os.fspath(path), "w") as fh:
        for row in matrix:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_matrix_csv(path: str | os.PathLike) -> FloatArray:
    """Inverse of :func:`export_matrix_csv` (bit-exact for float64)."""
    path = os.fspath(path)
    rows: list[list[float]] = []
    width: int | None = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            cells = text.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(
                    f"{path}: ragged row at line {lineno} "
                    f"({len(cells)} cells, expected {width})"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell at line {lineno}") from None
    if not rows:
        return np.zeros((0, 0), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def write_dictionary(dictionary: SpectralDictionary, path: str | os.PathLike) -> None:
    export_matrix_csv(dictionary.columns, path)


def read_dictionary(path: str | os.PathLike) -> SpectralDictionary:
    return SpectralDictionary(columns=read_matrix_csv(path))

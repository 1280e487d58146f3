"""Core array-backed types shared by the whole pipeline.

All numeric payloads are float64 numpy arrays, frozen (non-writeable) after
construction so instances can be shared freely across threads. Pixel ordering
is row-major everywhere: the flattened pixel index of (row, col) is
``row * cols + col``, and cube samples are stored band-sequentially
(band-major, then row, then col).

``SpectralCube`` construction is deliberately permissive: shape and finiteness
problems are reported by :func:`validate_cube` rather than raised, so that
diagnostic tooling can inspect broken cubes. The operator/dictionary types, by
contrast, enforce their invariants at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

# Unit-norm tolerance for dictionary atoms; pairwise coherence above
# 1 - DUPLICATE_TOL marks two atoms as duplicates.
UNIT_NORM_TOL = 1e-9
DUPLICATE_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpectralCube:
    """A (bands x rows x cols) image stored band-sequentially as a flat array."""

    bands: int
    rows: int
    cols: int
    data: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _freeze(np.ravel(self.data)))

    @property
    def pixels(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.bands, self.rows, self.cols)

    def as_matrix(self) -> FloatArray:
        """View the cube as a (bands x pixels) matrix.

        Column j holds the spectrum of pixel j in row-major (row, col) order.
        The result is a view; converting back with :meth:`from_matrix` is
        bit-exact.
        """
        if self.data.size != self.bands * self.rows * self.cols:
            raise ValueError(
                f"cube data length {self.data.size} != "
                f"bands*rows*cols = {self.bands * self.rows * self.cols}"
            )
        return self.data.reshape(self.bands, self.rows * self.cols)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, rows: int, cols: int) -> "SpectralCube":
        """Inverse of :meth:`as_matrix` for a (bands x rows*cols) matrix."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"expected 2-D matrix, got ndim={matrix.ndim}")
        if matrix.shape[1] != rows * cols:
            raise ValueError(
                f"matrix has {matrix.shape[1]} columns, expected rows*cols = {rows * cols}"
            )
        return cls(bands=matrix.shape[0], rows=rows, cols=cols, data=matrix.ravel())


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_cube`: ok, or every violation found."""

    ok: bool
    violations: tuple[str, ...] = ()


def validate_cube(cube: SpectralCube) -> ValidationReport:
    """Check every cube invariant, reporting all violations (never raises)."""
    violations: list[str] = []
    for name in ("bands", "rows", "cols"):
        v = getattr(cube, name)
        if not isinstance(v, (int, np.integer)) or v < 1:
            violations.append(f"{name} must be a positive integer, got {v!r}")
    expected = cube.bands * cube.rows * cube.cols
    if cube.data.size != expected:
        violations.append(
            f"length mismatch: data has {cube.data.size} samples, "
            f"bands*rows*cols = {expected}"
        )
    finite = np.isfinite(cube.data)
    if not finite.all():
        idx = int(np.argmin(finite))
        violations.append(
            f"non-finite value {cube.data[idx]!r} at flat index {idx}"
        )
    return ValidationReport(ok=not violations, violations=tuple(violations))


@dataclass(frozen=True)
class SpectralResponse:
    """Spectral degradation operator: a (out_bands x in_bands) weight matrix.

    Rows are output (multispectral) bands, columns input (hyperspectral)
    bands. Weights are nonnegative and every row must respond to at least one
    input band. ``row_normalized`` asserts each row sums to 1 within 1e-9.
    """

    weights: FloatArray
    row_normalized: bool = False

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got ndim={w.ndim}")
        out_bands, in_bands = w.shape
        if not out_bands < in_bands:
            raise ValueError(
                f"degradation must reduce bands: out_bands={out_bands} "
                f">= in_bands={in_bands}"
            )
        if not np.isfinite(w).all():
            raise ValueError("weights contain non-finite values")
        if (w < 0).any():
            r, c = np.argwhere(w < 0)[0]
            raise ValueError(f"negative weight at row {r}, col {c}")
        row_max = np.abs(w).max(axis=1)
        if (row_max == 0).any():
            raise ValueError(f"row {int(np.argmin(row_max != 0))} is all zero")
        if self.row_normalized:
            sums = w.sum(axis=1)
            bad = np.abs(sums - 1.0) > 1e-9
            if bad.any():
                r = int(np.argmax(bad))
                raise ValueError(
                    f"row_normalized set but row {r} sums to {sums[r]!r}"
                )
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def out_bands(self) -> int:
        return self.weights.shape[0]

    @property
    def in_bands(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class SpectralDictionary:
    """A (bands x atoms) matrix of unit-norm, pairwise-distinct atoms."""

    columns: FloatArray

    def __post_init__(self) -> None:
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim != 2:
            raise ValueError(f"columns must be 2-D, got ndim={cols.ndim}")
        if not np.isfinite(cols).all():
            raise ValueError("dictionary contains non-finite values")
        norms = np.linalg.norm(cols, axis=0)
        off = np.abs(norms - 1.0) > UNIT_NORM_TOL
        if off.any():
            k = int(np.argmax(off))
            raise ValueError(f"atom {k} has norm {norms[k]!r}, expected 1")
        gram = np.abs(cols.T @ cols)
        np.fill_diagonal(gram, 0.0)
        if (gram >= 1.0 - DUPLICATE_TOL).any():
            i, j = np.argwhere(gram >= 1.0 - DUPLICATE_TOL)[0]
            raise ValueError(
                f"atoms {i} and {j} are duplicates (|inner product| = {gram[i, j]!r})"
            )
        object.__setattr__(self, "columns", _freeze(cols))

    @property
    def bands(self) -> int:
        return self.columns.shape[0]

    @property
    def atoms(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class CoefficientMatrix:
    """Sparse codes: a (atoms x samples) matrix, optionally budget-checked.

    When ``max_atoms`` is set it records the sparsity budget the codes were
    produced under, and every column is verified to have at most that many
    nonzeros. ``supports`` optionally carries the per-column support sets in
    selection order.
    """

    values: FloatArray
    max_atoms: int | None = None
    supports: tuple[tuple[int, ...], ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"values must be 2-D, got ndim={v.ndim}")
        if not np.isfinite(v).all():
            raise ValueError("coefficients contain non-finite values")
        if self.max_atoms is not None:
            nnz = np.count_nonzero(v, axis=0)
            if (nnz > self.max_atoms).any():
                j = int(np.argmax(nnz > self.max_atoms))
                raise ValueError(
                    f"column {j} has {nnz[j]} nonzeros, budget is {self.max_atoms}"
                )
        object.__setattr__(self, "values", _freeze(v))

    @property
    def atoms(self) -> int:
        return self.values.shape[0]

    @property
    def samples(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CompensationMatrix:
    """Per-atom additive spectral correction, shaped like the dictionary it
    compensates (bands x atoms)."""

    values: FloatArray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"values must be 2-D, got ndim={v.ndim}")
        if not np.isfinite(v).all():
            raise ValueError("compensation matrix contains non-finite values")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def atoms(self) -> int:
        return self.values.shape[1]

"""Greedy L0 sparse coding (orthogonal matching pursuit).

Two interchangeable kernels implement the coding loop: a Cython extension
(``specsr._omp_kernel``) and a pure-numpy fallback (``specsr._omp_py``). The
compiled kernel is used when importable unless the environment variable
``SPECSR_PURE_PYTHON`` is set to a non-empty value; :func:`active_backend`
reports the choice. Both kernels implement identical semantics (same atom
selection, same SVD refit, same stopping rules); agreement is covered by the
test suite and the ``benchmarks/bench_omp.py`` comparison.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _omp_py
from .types import CoefficientMatrix, SpectralDictionary

try:
    from . import _omp_kernel
except ImportError:  # extension not built; fall back to numpy kernel
    _omp_kernel = None

_FORCE_PY = bool(os.environ.get("SPECSR_PURE_PYTHON"))
_KERNEL = _omp_py if (_omp_kernel is None or _FORCE_PY) else _omp_kernel


def active_backend() -> str:
    """Name of the coding kernel in use: 'compiled' or 'python'."""
    return "python" if _KERNEL is _omp_py else "compiled"


def available_backends() -> dict[str, object]:
    """Importable kernels by name (for benchmarks and agreement tests)."""
    out: dict[str, object] = {"python": _omp_py}
    if _omp_kernel is not None:
        out["compiled"] = _omp_kernel
    return out


@dataclass(frozen=True)
class OmpConfig:
    """Stopping rules for the pursuit: hard atom budget and residual norm.

    An l0 penalty weight has no direct operational form in a greedy pursuit;
    sparsity is controlled through these two rules instead.
    """

    max_atoms: int
    residual_tol: float = 0.0

    def __post_init__(self) -> None:
        if self.max_atoms < 1:
            raise ValueError(f"max_atoms must be >= 1, got {self.max_atoms}")
        if not (np.isfinite(self.residual_tol) and self.residual_tol >= 0):
            raise ValueError(f"residual_tol must be >= 0, got {self.residual_tol!r}")


def code_columns(
    matrix: np.ndarray, signals: np.ndarray, cfg: OmpConfig
) -> tuple[np.ndarray, list[list[int]]]:
    """Code each signal column against the raw columns of ``matrix``.

    Unlike :func:`batch_code` this enforces no dictionary invariants; columns
    need not be unit norm, and all-zero columns are simply never selected.
    Returns the dense (n_columns x n_signals) code matrix and the per-signal
    supports in selection order.
    """
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    signals = np.ascontiguousarray(signals, dtype=np.float64)
    if signals.ndim == 1:
        signals = signals[:, None]
    if matrix.shape[0] != signals.shape[0]:
        raise ValueError(
            f"signal length {signals.shape[0]} != column length {matrix.shape[0]}"
        )
    if cfg.max_atoms > matrix.shape[1]:
        raise ValueError(
            f"max_atoms={cfg.max_atoms} exceeds the {matrix.shape[1]} available atoms"
        )
    return _KERNEL.omp_batch(matrix, signals, cfg.max_atoms, cfg.residual_tol)


def omp(
    dictionary: SpectralDictionary, signal: np.ndarray, cfg: OmpConfig
) -> np.ndarray:
    """Sparse-code one signal; returns a dense length-K coefficient vector.

    At each step the atom with the largest absolute correlation to the current
    residual joins the support (ties to the lower index) and the coefficients
    are refit by least squares on the support, so the residual norm never
    increases.
    """
    signal = np.asarray(signal, dtype=np.float64).ravel()
    codes, _ = code_columns(dictionary.columns, signal, cfg)
    return codes[:, 0]


def batch_code(
    dictionary: SpectralDictionary, signals: np.ndarray, cfg: OmpConfig
) -> CoefficientMatrix:
    """Column-by-column OMP of a (bands x n) signal matrix."""
    codes, supports = code_columns(dictionary.columns, signals, cfg)
    return CoefficientMatrix(
        values=codes,
        max_atoms=cfg.max_atoms,
        supports=tuple(tuple(s) for s in supports),
    )

"""Pure-numpy orthogonal matching pursuit kernel.

Reference implementation of the greedy coding loop; the compiled extension in
``_omp_kernel.pyx`` mirrors these semantics operation for operation. Selection
ties break toward the lower atom index, selected atoms are never re-picked,
and the refit is a full SVD least squares on the current support. If adding
an atom makes the support submatrix numerically rank-deficient (condition
estimate above ``COND_LIMIT``) the atom is rejected and coding stops with the
previous solution.
"""

from __future__ import annotations

import numpy as np

COND_LIMIT = 1e12


def omp_single(
    D: np.ndarray, y: np.ndarray, max_atoms: int, residual_tol: float
) -> tuple[list[int], np.ndarray]:
    """Code one signal; returns (support in selection order, coefficients)."""
    support: list[int] = []
    coef = np.zeros(0, dtype=np.float64)
    residual = y
    for _ in range(max_atoms):
        if np.linalg.norm(residual) <= residual_tol:
            break
        corr = D.T @ residual
        if support:
            corr[support] = 0.0
        k = int(np.argmax(np.abs(corr)))
        if corr[k] == 0.0:
            break
        sub = D[:, support + [k]]
        u, s, vt = np.linalg.svd(sub, full_matrices=False)
        if s[-1] == 0.0 or s[0] / s[-1] > COND_LIMIT:
            break
        support.append(k)
        coef = vt.T @ ((u.T @ y) / s)
        residual = y - sub @ coef
    return support, coef


def omp_batch(
    D: np.ndarray, signals: np.ndarray, max_atoms: int, residual_tol: float
) -> tuple[np.ndarray, list[list[int]]]:
    """Code every column of ``signals``; columns are independent."""
    n_atoms = D.shape[1]
    n = signals.shape[1]
    codes = np.zeros((n_atoms, n), dtype=np.float64)
    supports: list[list[int]] = []
    for j in range(n):
        support, coef = omp_single(D, signals[:, j], max_atoms, residual_tol)
        codes[support, j] = coef
        supports.append(support)
    return codes, supports

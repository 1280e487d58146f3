"""K-SVD dictionary learning over orthogonal matching pursuit coding.

Each iteration sparse-codes the training matrix with the current dictionary,
then sweeps the atoms in index order: atom k is replaced by the leading left
singular vector of the residual restricted to the columns that use it (with
atom k's own contribution added back), and those columns' coefficients by the
matching scaled right singular vector. Updated atoms are sign-flipped so their
largest-magnitude entry is positive. Unused atoms are optionally replaced by
the worst-reconstructed training column, and near-duplicate atoms are always
replaced the same way so the returned dictionary satisfies the
``SpectralDictionary`` invariants after every iteration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .sparse_coding import OmpConfig, code_columns
from .types import CoefficientMatrix, SpectralDictionary

# Construction-time duplicate threshold, slightly stricter than the
# SpectralDictionary invariant so fixed-up dictionaries validate with margin.
_DUP_IP = 1.0 - 1e-8
_ZERO_RESIDUAL = 1e-12


@dataclass(frozen=True)
class KsvdConfig:
    atoms: int
    sparsity: OmpConfig
    iterations: int = 30
    seed: int = 0
    replace_unused: bool = True

    def __post_init__(self) -> None:
        if self.atoms < 1:
            raise ValueError(f"atoms must be >= 1, got {self.atoms}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


@dataclass(frozen=True)
class KsvdResult:
    dictionary: SpectralDictionary
    codes: CoefficientMatrix
    residual_trace: tuple[float, ...]
    degenerate: bool = False


def _is_duplicate(candidate: np.ndarray, atoms: np.ndarray, skip: int = -1) -> bool:
    ips = np.abs(atoms.T @ candidate)
    if 0 <= skip < ips.size:
        ips[skip] = 0.0
    return bool((ips > _DUP_IP).any())


def init_dictionary(training: np.ndarray, K: int, seed: int) -> SpectralDictionary:
    """Seeded initialization: K distinct training columns, unit-normalized.

    Columns are scanned in a seeded random order; zero columns and columns
    that would duplicate an already chosen atom are skipped. If fewer than K
    usable columns exist the remainder are seeded random unit vectors.
    """
    training = np.asarray(training, dtype=np.float64)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    norms = np.linalg.norm(training, axis=0)
    if not (norms > 0).any():
        raise ValueError("no usable training columns (all columns are zero)")
    rng = np.random.default_rng(seed)
    atoms = np.zeros((training.shape[0], K), dtype=np.float64)
    count = 0
    for j in rng.permutation(training.shape[1]):
        if count == K:
            break
        if norms[j] == 0:
            continue
        candidate = training[:, j] / norms[j]
        if count and _is_duplicate(candidate, atoms[:, :count]):
            continue
        atoms[:, count] = candidate
        count += 1
    while count < K:
        candidate = rng.standard_normal(training.shape[0])
        candidate /= np.linalg.norm(candidate)
        if count and _is_duplicate(candidate, atoms[:, :count]):
            continue
        atoms[:, count] = candidate
        count += 1
    return SpectralDictionary(columns=atoms)


def _replacement_column(
    training: np.ndarray,
    residual: np.ndarray,
    atoms: np.ndarray,
    k: int,
    taken: set[int],
    rng: np.random.Generator,
) -> np.ndarray:
    """Worst-reconstructed training column, normalized; random unit fallback."""
    errors = np.linalg.norm(residual, axis=0).copy()
    if taken:
        errors[list(taken)] = -np.inf
    for j in np.argsort(-errors, kind="stable"):
        if errors[j] == -np.inf:
            break
        norm = np.linalg.norm(training[:, j])
        if norm == 0:
            continue
        candidate = training[:, j] / norm
        if not _is_duplicate(candidate, atoms, skip=k):
            taken.add(int(j))
            return candidate
    while True:
        candidate = rng.standard_normal(training.shape[0])
        candidate /= np.linalg.norm(candidate)
        if not _is_duplicate(candidate, atoms, skip=k):
            return candidate


def _flip_sign(atom: np.ndarray, coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if atom[np.argmax(np.abs(atom))] < 0:
        return -atom, -coefs
    return atom, coefs


def ksvd(training: np.ndarray, cfg: KsvdConfig) -> KsvdResult:
    """Learn a dictionary from the columns of ``training``.

    Returns the dictionary, the final sparse codes and the Frobenius residual
    ``||training - D A||_F`` recorded after every full iteration. With
    ``iterations = 0`` the initialization is returned unchanged with all-zero
    codes and an empty trace.
    """
    training = np.ascontiguousarray(training, dtype=np.float64)
    if training.ndim != 2 or training.shape[1] < 1:
        raise ValueError("training must be a (bands x n) matrix with n >= 1")
    if not np.isfinite(training).all():
        raise ValueError("training matrix contains non-finite values")
    if cfg.atoms > training.shape[1]:
        warnings.warn(
            f"K = {cfg.atoms} exceeds the {training.shape[1]} training columns;"
            " unused atoms are likely",
            stacklevel=2,
        )
    rng = np.random.default_rng(cfg.seed)
    D = np.array(init_dictionary(training, cfg.atoms, cfg.seed).columns)
    A = np.zeros((cfg.atoms, training.shape[1]), dtype=np.float64)
    supports: list[list[int]] = [[] for _ in range(training.shape[1])]
    trace: list[float] = []
    degenerate = False

    for _ in range(cfg.iterations):
        A, supports = code_columns(D, training, cfg.sparsity)
        residual = training - D @ A
        if not any(len(s) for s in supports):
            degenerate = True
            warnings.warn("no atom is used by any column; stopping early", stacklevel=2)
            break
        taken: set[int] = set()
        for k in range(cfg.atoms):
            using = np.flatnonzero(A[k, :])
            if using.size == 0:
                if cfg.replace_unused:
                    D[:, k] = _replacement_column(training, residual, D, k, taken, rng)
                continue
            E = residual[:, using] + np.outer(D[:, k], A[k, using])
            if np.linalg.norm(E) < _ZERO_RESIDUAL:
                continue
            u, s, vt = np.linalg.svd(E, full_matrices=False)
            atom, coefs = _flip_sign(u[:, 0], s[0] * vt[0])
            D[:, k] = atom
            A[k, using] = coefs
            residual[:, using] = E - np.outer(atom, coefs)
        _fix_duplicates(training, D, A, taken, rng)
        trace.append(float(np.linalg.norm(training - D @ A)))

    dictionary = SpectralDictionary(columns=D)
    codes = CoefficientMatrix(
        values=A,
        max_atoms=cfg.sparsity.max_atoms,
        supports=tuple(tuple(s) for s in supports),
    )
    return KsvdResult(
        dictionary=dictionary,
        codes=codes,
        residual_trace=tuple(trace),
        degenerate=degenerate,
    )


def _fix_duplicates(
    training: np.ndarray,
    D: np.ndarray,
    A: np.ndarray,
    taken: set[int],
    rng: np.random.Generator,
) -> None:
    """Replace near-duplicate atoms in place (keeps the more-used one)."""
    for _ in range(D.shape[1]):
        gram = np.abs(D.T @ D)
        np.fill_diagonal(gram, 0.0)
        pairs = np.argwhere(gram > _DUP_IP)
        if pairs.size == 0:
            return
        i, j = (int(v) for v in pairs[0])
        drop = j if np.abs(A[j]).sum() <= np.abs(A[i]).sum() else i
        A[drop, :] = 0.0
        residual = training - D @ A
        D[:, drop] = _replacement_column(training, residual, D, drop, taken, rng)

"""Cross-domain dictionary transfer via a closed-form compensation matrix.

The transfer runs in four stages: (1) for every atom of the source dictionary
find the source-scene pixel spectrum closest to it, (2) degrade those matched
spectra to the multispectral band space and find the closest target-image
pixel for each, (3) solve a ridge-regularized least-squares problem for an
additive per-atom compensation that explains the matched target/source gap,
and (4) relearn the dictionary from the compensated matched spectra.

Matching supports two metrics. ``euclidean`` compares unit-normalized spectra
against the (unit-norm) atoms and then keeps the original-scale spectrum, so
the compensation operates on physical-scale columns; ``spectral_angle``
minimizes the angle between raw spectra. For atom matching the two produce
identical rankings (both reduce to maximal cosine); they differ when matching
target pixels, where euclidean is a raw distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dictionary import KsvdConfig, ksvd
from .sparse_coding import OmpConfig
from .types import (
    CompensationMatrix,
    FloatArray,
    SpectralCube,
    SpectralDictionary,
    SpectralResponse,
    _freeze,
)

MatchMetric = Literal["euclidean", "spectral_angle"]
_METRICS = ("euclidean", "spectral_angle")


@dataclass(frozen=True)
class TransferConfig:
    """Knobs for the transfer stage.

    ``eta`` weights the similarity penalty in the compensation solve (must be
    positive; it also makes the normal matrix invertible). ``k_scale`` sets
    the similarity target ``k * z`` for each compensated column; 0 penalizes
    compensation magnitude directly. When ``ksvd`` is None a config is derived
    from the source dictionary at transfer time.
    """

    eta: float = 0.1
    k_scale: float = 0.0
    match_metric: MatchMetric = "euclidean"
    ksvd: KsvdConfig | None = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be > 0, got {self.eta!r}")
        if not np.isfinite(self.k_scale):
            raise ValueError(f"k_scale must be finite, got {self.k_scale!r}")
        if self.match_metric not in _METRICS:
            raise ValueError(
                f"match_metric must be one of {_METRICS}, got {self.match_metric!r}"
            )


@dataclass(frozen=True)
class MatchedSet:
    """Columnwise-corresponding matched spectra across the two domains.

    ``zy_matched`` is exactly the degraded ``z_matched`` (srf applied), and
    ``y_matched`` column i is the target pixel matched to ``zy_matched``
    column i.
    """

    z_matched: FloatArray
    zy_matched: FloatArray
    y_matched: FloatArray
    source_pixel_index: np.ndarray
    target_pixel_index: np.ndarray

    def __post_init__(self) -> None:
        K = self.z_matched.shape[1]
        for name in ("zy_matched", "y_matched"):
            if getattr(self, name).shape[1] != K:
                raise ValueError(f"{name} has a different column count than z_matched")
        if self.zy_matched.shape[0] != self.y_matched.shape[0]:
            raise ValueError("zy_matched and y_matched band counts differ")
        for name in ("source_pixel_index", "target_pixel_index"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            if idx.shape != (K,):
                raise ValueError(f"{name} must have one entry per matched column")
            idx.flags.writeable = False
            object.__setattr__(self, name, idx)
        for name in ("z_matched", "zy_matched", "y_matched"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    @property
    def atoms(self) -> int:
        return self.z_matched.shape[1]


@dataclass(frozen=True)
class TransferResult:
    dictionary: SpectralDictionary
    matched: MatchedSet
    compensation: CompensationMatrix


def _nonzero_pixel_norms(matrix: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=0)
    if not (norms > 0).any():
        raise ValueError(f"{what} has no nonzero pixels to match against")
    return norms


def match_atoms_to_source(
    dict_s: SpectralDictionary, Z: SpectralCube, metric: MatchMetric = "euclidean"
) -> tuple[FloatArray, np.ndarray]:
    """Pick, per atom, the source pixel spectrum closest to it.

    Both metrics rank pixels by the cosine between the unit-normalized pixel
    spectrum and the atom (euclidean distance between unit vectors is a
    monotone function of that cosine). Ties break to the lowest pixel index;
    zero pixels never match. Returns the original-scale matched spectra and
    their pixel indices.
    """
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    Zmat = Z.as_matrix()
    if Zmat.shape[0] != dict_s.bands:
        raise ValueError(
            f"cube has {Zmat.shape[0]} bands, dictionary expects {dict_s.bands}"
        )
    if Zmat.shape[1] == 0:
        raise ValueError("cannot match against an empty cube")
    norms = _nonzero_pixel_norms(Zmat, "source cube")
    valid = norms > 0
    normalized = Zmat[:, valid] / norms[valid]
    cosines = dict_s.columns.T @ normalized  # (K x valid pixels)
    winners = np.argmax(cosines, axis=1)
    original_index = np.flatnonzero(valid)[winners]
    return Zmat[:, original_index].copy(), original_index


def match_target_pixels(
    zy_matched: np.ndarray, Y: SpectralCube, metric: MatchMetric = "euclidean"
) -> tuple[FloatArray, np.ndarray]:
    """Pick, per matched degraded spectrum, the nearest target-image pixel.

    ``euclidean`` is the raw distance between band vectors; ``spectral_angle``
    minimizes the angle (zero-norm pixels are excluded). Ties break to the
    lowest pixel index.
    """
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    zy_matched = np.asarray(zy_matched, dtype=np.float64)
    Ymat = Y.as_matrix()
    if Ymat.shape[0] != zy_matched.shape[0]:
        raise ValueError(
            f"target cube has {Ymat.shape[0]} bands, matched spectra have "
            f"{zy_matched.shape[0]}"
        )
    if Ymat.shape[1] == 0:
        raise ValueError("cannot match against an empty cube")
    K = zy_matched.shape[1]
    index = np.empty(K, dtype=np.int64)
    if metric == "euclidean":
        for i in range(K):
            diff = Ymat - zy_matched[:, i][:, None]
            index[i] = int(np.argmin(np.einsum("bj,bj->j", diff, diff)))
    else:
        norms = _nonzero_pixel_norms(Ymat, "target cube")
        t_norms = np.linalg.norm(zy_matched, axis=0)
        if (t_norms == 0).any():
            raise ValueError(
                "spectral_angle matching undefined for zero-norm matched spectra "
                f"(column {int(np.argmin(t_norms > 0))})"
            )
        safe = np.where(norms > 0, norms, 1.0)
        cosines = (zy_matched.T @ Ymat) / np.outer(t_norms, safe)
        cosines[:, norms == 0] = -np.inf
        index[:] = np.argmax(cosines, axis=1)
    return Ymat[:, index].copy(), index


def compute_compensation(
    matched: MatchedSet, srf: SpectralResponse, eta: float, k_scale: float = 0.0
) -> CompensationMatrix:
    """Closed-form additive compensation for the matched spectra.

    Minimizes ``||y_matched - zy_matched - L Q||_F^2 + eta ||Q - k z||_F^2``
    over Q; the unique minimizer solves the symmetric positive-definite system
    ``(L^T L + eta I) Q = L^T (y_matched - zy_matched) + eta k z``.
    """
    if not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta!r}")
    L = srf.weights
    if L.shape != (matched.zy_matched.shape[0], matched.z_matched.shape[0]):
        raise ValueError(
            f"spectral response shape {L.shape} does not fit matched spectra "
            f"({matched.zy_matched.shape[0]} x {matched.z_matched.shape[0]})"
        )
    normal = L.T @ L + eta * np.eye(L.shape[1])
    rhs = L.T @ (matched.y_matched - matched.zy_matched) + eta * k_scale * matched.z_matched
    q = cho_solve(cho_factor(normal, lower=True), rhs)
    return CompensationMatrix(values=q)


def learn_transferred_dictionary(
    matched: MatchedSet, q: CompensationMatrix, cfg: KsvdConfig
) -> SpectralDictionary:
    """K-SVD on the compensated matched spectra ``z_matched + q``."""
    if q.values.shape != matched.z_matched.shape:
        raise ValueError(
            f"compensation shape {q.values.shape} does not match spectra shape "
            f"{matched.z_matched.shape}"
        )
    return ksvd(matched.z_matched + q.values, cfg).dictionary


def transfer(
    dict_s: SpectralDictionary,
    Z: SpectralCube,
    Y: SpectralCube,
    srf: SpectralResponse,
    cfg: TransferConfig,
) -> TransferResult:
    """Full transfer: match, degrade, compensate, relearn.

    Returns the transferred dictionary along with the matched set and the
    compensation matrix so every intermediate can be inspected or exported.
    """
    if dict_s.bands != srf.in_bands:
        raise ValueError(
            f"dictionary has {dict_s.bands} bands, spectral response expects "
            f"{srf.in_bands}"
        )
    if Y.bands != srf.out_bands:
        raise ValueError(
            f"target cube has {Y.bands} bands, spectral response produces "
            f"{srf.out_bands}"
        )
    z_matched, src_idx = match_atoms_to_source(dict_s, Z, cfg.match_metric)
    zy_matched = srf.weights @ z_matched
    y_matched, tgt_idx = match_target_pixels(zy_matched, Y, cfg.match_metric)
    matched = MatchedSet(
        z_matched=z_matched,
        zy_matched=zy_matched,
        y_matched=y_matched,
        source_pixel_index=src_idx,
        target_pixel_index=tgt_idx,
    )
    q = compute_compensation(matched, srf, cfg.eta, cfg.k_scale)
    ksvd_cfg = cfg.ksvd
    if ksvd_cfg is None:
        ksvd_cfg = KsvdConfig(
            atoms=dict_s.atoms,
            sparsity=OmpConfig(max_atoms=min(4, dict_s.atoms)),
        )
    d_t = learn_transferred_dictionary(matched, q, ksvd_cfg)
    return TransferResult(dictionary=d_t, matched=matched, compensation=q)

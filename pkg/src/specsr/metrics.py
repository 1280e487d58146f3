"""Full-reference quality metrics: MSE, PSNR, SAM, ERGAS.

Conventions: the PSNR peak is the maximum absolute value of the reference
cube (capped at 300 dB once the MSE is negligible against it), SAM is the
mean per-pixel angle in degrees with zero-norm pixels excluded and counted,
and ERGAS uses a caller-supplied resolution ratio (default 1, since spectral
super-resolution leaves the spatial scale unchanged). MSE and therefore the
absolute PSNR depend on the data's native units; no rescaling is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import SpectralCube

PSNR_CAP_DB = 300.0


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr: float
    sam: float
    ergas: float
    sam_skipped_pixels: int = 0

    def csv_row(self) -> str:
        """The four metrics, comma separated, in table column order."""
        return f"{self.mse!r},{self.psnr!r},{self.sam!r},{self.ergas!r}"

    def table(self) -> str:
        header = f"{'MSE':>12} {'PSNR':>12} {'SAM':>12} {'ERGAS':>12}"
        row = f"{self.mse:12.6f} {self.psnr:12.4f} {self.sam:12.6f} {self.ergas:12.6f}"
        return header + "\n" + row


def _paired_matrices(reference: SpectralCube, estimate: SpectralCube):
    if reference.shape != estimate.shape:
        raise ValueError(
            f"shape mismatch: reference {reference.shape} vs estimate {estimate.shape}"
        )
    return reference.as_matrix(), estimate.as_matrix()


def mse(reference: SpectralCube, estimate: SpectralCube) -> float:
    """Mean squared error over every sample (symmetric in its arguments)."""
    ref, est = _paired_matrices(reference, estimate)
    return float(np.mean((ref - est) ** 2))


def psnr(reference: SpectralCube, estimate: SpectralCube) -> float:
    """``10 log10(peak^2 / mse)`` with peak the max |value| of the reference."""
    err = mse(reference, estimate)
    peak = float(np.abs(reference.data).max())
    if err <= peak * peak * 1e-30:
        return PSNR_CAP_DB
    if peak == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(peak * peak / err))


def sam_degrees(
    reference: SpectralCube, estimate: SpectralCube
) -> tuple[float, int]:
    """Mean per-pixel spectral angle in degrees and the skipped-pixel count.

    Pixels where either spectrum has zero norm are excluded; if every pixel is
    excluded (all-zero reference) this is an error.
    """
    ref, est = _paired_matrices(reference, estimate)
    ref_norm = np.linalg.norm(ref, axis=0)
    est_norm = np.linalg.norm(est, axis=0)
    keep = (ref_norm > 0) & (est_norm > 0)
    skipped = int(keep.size - keep.sum())
    if not keep.any():
        raise ValueError("SAM undefined: every pixel has a zero-norm spectrum")
    # angle = arccos(<x, y> / (|x| |y|)) evaluated as 2 asin(|x^ - y^| / 2),
    # which is exact for identical spectra instead of O(sqrt(eps)) off.
    ref_hat = ref[:, keep] / ref_norm[keep]
    est_hat = est[:, keep] / est_norm[keep]
    half_diff = 0.5 * np.linalg.norm(ref_hat - est_hat, axis=0)
    angles = np.degrees(2.0 * np.arcsin(np.clip(half_diff, 0.0, 1.0)))
    return float(angles.mean()), skipped


def ergas(
    reference: SpectralCube, estimate: SpectralCube, ratio: float = 1.0
) -> float:
    """Band-normalized RMSE aggregate: ``100 * ratio * sqrt(mean_b(rmse_b^2 / mean_b^2))``."""
    if not ratio > 0:
        raise ValueError(f"ratio must be > 0, got {ratio!r}")
    ref, est = _paired_matrices(reference, estimate)
    band_means = ref.mean(axis=1)
    if (band_means == 0).any():
        raise ValueError(
            f"ERGAS undefined: reference band {int(np.argmin(band_means != 0))} "
            "has zero mean"
        )
    rmse_sq = np.mean((ref - est) ** 2, axis=1)
    return float(100.0 * ratio * np.sqrt(np.mean(rmse_sq / band_means**2)))


def evaluate_quality(
    reference: SpectralCube, estimate: SpectralCube, ergas_ratio: float = 1.0
) -> QualityReport:
    """All four metrics in one report.

    Raises for shape mismatches and for an all-zero reference (SAM and ERGAS
    are undefined there; :func:`mse` and :func:`psnr` remain individually
    computable).
    """
    sam_value, skipped = sam_degrees(reference, estimate)
    return QualityReport(
        mse=mse(reference, estimate),
        psnr=psnr(reference, estimate),
        sam=sam_value,
        ergas=ergas(reference, estimate, ergas_ratio),
        sam_skipped_pixels=skipped,
    )

"""Spectral degradation forward model with seeded Gaussian noise.

A multispectral observation is the spectral response applied to the
hyperspectral cube plus i.i.d. Gaussian noise. Noise is drawn from numpy's
``default_rng`` (PCG64 bit generator, ziggurat normal transform), filling the
output matrix in flat C order, so a given ``NoiseSpec`` reproduces the same
matrix on every platform and regardless of any column-level parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FloatArray, SpectralCube, SpectralResponse


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviation and seed for an additive Gaussian noise term."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")


def gaussian_noise(shape: tuple[int, int], noise: NoiseSpec) -> FloatArray:
    """i.i.d. normal(0, sigma^2) matrix, deterministic per seed.

    sigma = 0 returns exact zeros.
    """
    if noise.sigma == 0.0:
        return np.zeros(shape, dtype=np.float64)
    rng = np.random.default_rng(noise.seed)
    return rng.normal(0.0, noise.sigma, size=shape)


def degrade(
    cube: SpectralCube, srf: SpectralResponse, noise: NoiseSpec = NoiseSpec()
) -> SpectralCube:
    """Apply the spectral response band-mix to a cube, adding seeded noise.

    With sigma = 0 the output matrix is exactly ``srf.weights @ cube_matrix``.
    Spatial layout is untouched: only the band axis shrinks.
    """
    if cube.bands != srf.in_bands:
        raise ValueError(
            f"band-count mismatch: cube has {cube.bands} bands, "
            f"spectral response expects {srf.in_bands}"
        )
    out = srf.weights @ cube.as_matrix()
    if noise.sigma != 0.0:
        out = out + gaussian_noise(out.shape, noise)
    return SpectralCube.from_matrix(out, cube.rows, cube.cols)

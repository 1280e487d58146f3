"""Seeded synthetic scene pairs with a controlled cross-domain shift.

Scenes follow a linear mixing model: a small set of smooth nonnegative
endmember spectra (sums of 2-4 Gaussian bumps over band index, peak value 1)
mixed per pixel with sum-to-one abundances over a sparse random support. A
scene pair consists of a source scene from the base endmembers and a target
scene built from perturbed endmembers with a per-band gain and offset applied,
so the spectral shift between domains is known by construction.

All randomness goes through ``numpy.random.default_rng``; sub-streams are
derived as ``default_rng([seed, stream])`` so every product of a spec is
independently reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FloatArray, SpectralCube, _freeze

_STREAM_ENDMEMBERS = 0
_STREAM_SOURCE = 1
_STREAM_PERTURB = 2
_STREAM_TARGET = 3


@dataclass(frozen=True)
class DomainShift:
    """Per-band affine shift plus endmember-level Gaussian perturbation."""

    additive_offset: FloatArray
    multiplicative_gain: FloatArray
    endmember_perturbation_sigma: float = 0.0

    def __post_init__(self) -> None:
        offset = np.atleast_1d(np.asarray(self.additive_offset, dtype=np.float64))
        gain = np.atleast_1d(np.asarray(self.multiplicative_gain, dtype=np.float64))
        if offset.shape != gain.shape:
            raise ValueError("offset and gain must have equal band counts")
        if (gain <= 0).any():
            raise ValueError("gains must be > 0")
        if not self.endmember_perturbation_sigma >= 0:
            raise ValueError("endmember_perturbation_sigma must be >= 0")
        object.__setattr__(self, "additive_offset", _freeze(offset))
        object.__setattr__(self, "multiplicative_gain", _freeze(gain))

    @classmethod
    def identity(cls, bands: int) -> "DomainShift":
        return cls(np.zeros(bands), np.ones(bands), 0.0)

    @classmethod
    def constant(
        cls, bands: int, offset: float, gain: float, sigma: float = 0.0
    ) -> "DomainShift":
        return cls(np.full(bands, offset), np.full(bands, gain), sigma)


@dataclass(frozen=True)
class SceneSpec:
    bands: int
    rows: int
    cols: int
    endmember_count: int
    abundance_sparsity: int
    seed: int
    shift: DomainShift | None = None

    def __post_init__(self) -> None:
        for name in ("bands", "rows", "cols"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.endmember_count >= self.abundance_sparsity >= 1:
            raise ValueError(
                f"need endmember_count >= abundance_sparsity >= 1, got "
                f"{self.endmember_count} and {self.abundance_sparsity}"
            )


def generate_endmembers(bands: int, count: int, seed: int) -> FloatArray:
    """(bands x count) matrix of smooth spectra in [0, 1], peak value 1."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng([seed, _STREAM_ENDMEMBERS])
    axis = np.arange(bands, dtype=np.float64)
    out = np.zeros((bands, count), dtype=np.float64)
    # Narrow bumps keep distinct endmembers spectrally localized; the floor
    # bounds the adjacent-band second difference (|d2| < ~0.4 at width 1.5).
    min_width = max(1.5, bands / 20.0)
    max_width = max(min_width + 1.0, bands / 12.0)
    for p in range(count):
        n_bumps = int(rng.integers(2, 5))
        centers = rng.uniform(0.0, bands - 1.0, size=n_bumps)
        widths = rng.uniform(min_width, max_width, size=n_bumps)
        amplitudes = rng.uniform(0.3, 1.0, size=n_bumps)
        spectrum = np.zeros(bands)
        for c, w, a in zip(centers, widths, amplitudes):
            spectrum += a * np.exp(-((axis - c) ** 2) / (2.0 * w * w))
        out[:, p] = spectrum / spectrum.max()
    return out


def generate_scene(endmembers: np.ndarray, spec: SceneSpec) -> SpectralCube:
    """Mix endmembers into a cube: sparse, sum-to-one abundances per pixel."""
    endmembers = np.asarray(endmembers, dtype=np.float64)
    if endmembers.shape != (spec.bands, spec.endmember_count):
        raise ValueError(
            f"endmembers shape {endmembers.shape} does not match spec "
            f"({spec.bands} x {spec.endmember_count})"
        )
    return _scene_from_stream(endmembers, spec, _STREAM_SOURCE)


def apply_domain_shift(Z: SpectralCube, shift: DomainShift) -> SpectralCube:
    """Per-pixel affine shift: ``x = gain * z + offset`` bandwise."""
    if shift.additive_offset.shape[0] != Z.bands:
        raise ValueError(
            f"shift is defined for {shift.additive_offset.shape[0]} bands, "
            f"cube has {Z.bands}"
        )
    mat = Z.as_matrix()
    shifted = shift.multiplicative_gain[:, None] * mat + shift.additive_offset[:, None]
    return SpectralCube.from_matrix(shifted, Z.rows, Z.cols)


@dataclass(frozen=True)
class ScenePair:
    source: SpectralCube
    target: SpectralCube
    endmembers: FloatArray
    shifted_endmembers: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "endmembers", _freeze(self.endmembers))
        object.__setattr__(self, "shifted_endmembers", _freeze(self.shifted_endmembers))


def generate_scene_pair(spec: SceneSpec) -> ScenePair:
    """Source scene plus a shifted target scene with its own spatial layout.

    The target is mixed from endmembers perturbed by the shift's sigma (drawn
    from a derived stream), with a fresh abundance pattern, then the per-band
    gain/offset is applied. ``spec.shift`` of None means an identity shift.
    """
    shift = spec.shift or DomainShift.identity(spec.bands)
    endmembers = generate_endmembers(spec.bands, spec.endmember_count, spec.seed)
    source = generate_scene(endmembers, spec)

    perturbed = endmembers
    if shift.endmember_perturbation_sigma > 0:
        rng = np.random.default_rng([spec.seed, _STREAM_PERTURB])
        perturbed = endmembers + rng.normal(
            0.0, shift.endmember_perturbation_sigma, size=endmembers.shape
        )
    # Separate abundance stream so the two scenes differ spatially.
    raw_target = _scene_from_stream(perturbed, spec, _STREAM_TARGET)
    target = apply_domain_shift(raw_target, shift)
    return ScenePair(
        source=source,
        target=target,
        endmembers=endmembers,
        shifted_endmembers=perturbed,
    )


def _scene_from_stream(
    endmembers: np.ndarray, spec: SceneSpec, stream: int
) -> SpectralCube:
    rng = np.random.default_rng([spec.seed, stream])
    n = spec.rows * spec.cols
    s = spec.abundance_sparsity
    pixels = np.zeros((spec.bands, n), dtype=np.float64)
    alpha = np.ones(s)
    for j in range(n):
        support = rng.choice(spec.endmember_count, size=s, replace=False)
        abundances = rng.dirichlet(alpha)
        pixels[:, j] = endmembers[:, support] @ abundances
    return SpectralCube.from_matrix(pixels, spec.rows, spec.cols)

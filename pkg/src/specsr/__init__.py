"""Spectral super-resolution via compensated dictionary transfer.

Learn a spectral dictionary from a similar-scene hyperspectral image, carry it
into the target domain with a closed-form additive compensation, and
reconstruct a high-resolution hyperspectral cube from a multispectral image by
ADMM coding under joint sparse and low-rank regularization.
"""

from .admm import (
    AdmmConfig,
    AdmmDiagnostics,
    AdmmDivergenceError,
    AdmmState,
    admm_step,
    reconstruct,
    singular_value_threshold,
    soft_threshold,
    solve_coefficients,
)
from .dictionary import KsvdConfig, KsvdResult, init_dictionary, ksvd
from .forward import NoiseSpec, degrade, gaussian_noise
from .metrics import QualityReport, ergas, evaluate_quality, mse, psnr, sam_degrees
from .scenes import (
    DomainShift,
    ScenePair,
    SceneSpec,
    apply_domain_shift,
    generate_endmembers,
    generate_scene,
    generate_scene_pair,
)
from .sparse_coding import OmpConfig, active_backend, batch_code, code_columns, omp
from .transfer import (
    MatchedSet,
    TransferConfig,
    TransferResult,
    compute_compensation,
    learn_transferred_dictionary,
    match_atoms_to_source,
    match_target_pixels,
    transfer,
)
from .types import (
    CoefficientMatrix,
    CompensationMatrix,
    SpectralCube,
    SpectralDictionary,
    SpectralResponse,
    ValidationReport,
    validate_cube,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmDiagnostics",
    "AdmmDivergenceError",
    "AdmmState",
    "CoefficientMatrix",
    "CompensationMatrix",
    "DomainShift",
    "KsvdConfig",
    "KsvdResult",
    "MatchedSet",
    "NoiseSpec",
    "OmpConfig",
    "QualityReport",
    "ScenePair",
    "SceneSpec",
    "SpectralCube",
    "SpectralDictionary",
    "SpectralResponse",
    "TransferConfig",
    "TransferResult",
    "ValidationReport",
    "active_backend",
    "admm_step",
    "apply_domain_shift",
    "batch_code",
    "code_columns",
    "compute_compensation",
    "degrade",
    "ergas",
    "evaluate_quality",
    "gaussian_noise",
    "generate_endmembers",
    "generate_scene",
    "generate_scene_pair",
    "init_dictionary",
    "ksvd",
    "learn_transferred_dictionary",
    "match_atoms_to_source",
    "match_target_pixels",
    "mse",
    "omp",
    "psnr",
    "reconstruct",
    "sam_degrees",
    "singular_value_threshold",
    "soft_threshold",
    "solve_coefficients",
    "transfer",
    "validate_cube",
]

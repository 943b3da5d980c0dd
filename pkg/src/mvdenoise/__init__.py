"""Multichannel signal denoising with MVMD and Mahalanobis-norm DFA."""
from .denoise import (
    BenchmarkResult,
    DenoiseReport,
    ModeScores,
    benchmark,
    denoise,
    noise_targets,
    score_modes,
    select_cut,
    unbalanced_targets,
)
from .dfa import (
    DEFAULT_SCALES,
    FluctuationCurve,
    dfa_univariate,
    fluctuation_curve,
    fluctuation_euclidean,
    fluctuation_mahalanobis,
    fluctuation_univariate,
    mdfa,
    mdfa_euclidean,
    profile,
    scaling_exponent,
    segment,
)
from .errors import DataError, MvDenoiseError, NumericalError
from .linalg import CovarianceMatrix, covariance, mahalanobis_norm, pca_project, pca_select
from .mvmd import BlimfSet, MvmdConfig, mvmd_decompose, reconstruct_from_modes
from .signal import (
    MultichannelSignal,
    NoiseSpec,
    SnrReport,
    add_noise,
    generate_test_signal,
    load_csv,
    make_mixed_surrogate,
    make_quadrivariate,
    save_csv,
    snr,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkResult",
    "DEFAULT_SCALES",
    "DenoiseReport",
    "FluctuationCurve",
    "ModeScores",
    "MultichannelSignal",
    "NoiseSpec",
    "SnrReport",
    "add_noise",
    "benchmark",
    "denoise",
    "dfa_univariate",
    "fluctuation_curve",
    "fluctuation_euclidean",
    "fluctuation_mahalanobis",
    "fluctuation_univariate",
    "generate_test_signal",
    "load_csv",
    "make_mixed_surrogate",
    "make_quadrivariate",
    "mdfa",
    "mdfa_euclidean",
    "noise_targets",
    "profile",
    "save_csv",
    "scaling_exponent",
    "score_modes",
    "segment",
    "select_cut",
    "snr",
    "unbalanced_targets",
    "DataError",
    "MvDenoiseError",
    "NumericalError",
    "CovarianceMatrix",
    "covariance",
    "mahalanobis_norm",
    "pca_project",
    "pca_select",
    "BlimfSet",
    "MvmdConfig",
    "mvmd_decompose",
    "reconstruct_from_modes",
]

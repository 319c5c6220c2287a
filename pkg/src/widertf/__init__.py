"""Wideband relative transfer function estimation exploiting spectral
correlations, with covariance-whitening baseline, Cramér-Rao bounds and a
Monte-Carlo experiment harness."""

from .covariance import (
    SpectralSpatialCovariance,
    estimate_target_covariance,
    phase_adjusted_covariance,
    sample_covariance,
)
from .crb import CrbResult, conditional_crb, rtf_jacobian, unconditional_crb
from .metrics import confidence_interval_95, hermitian_angle, rmse_db, snr_db
from .rtf import Rtf, covariance_whitening, normalize_rtf, svd_direct
from .scenario import (
    FrameBlock,
    ScenarioConfig,
    ScenarioTruth,
    build_equicorrelated,
    build_varcorrelated,
    sample_realizations,
)

__version__ = "0.1.0"

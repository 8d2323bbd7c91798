"""Ghost imaging with Gaussian-state light.

Correlation kernels for thermal and phase-sensitive sources, their
free-space propagation, closed-form and numeric ghost images, lens relays,
classical realizations of prescribed correlations and Monte Carlo
photodetection.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    GhostImagingError,
    GridMismatch,
    InvalidParams,
    NonclassicalState,
    RegimeError,
)
from .grid import TimeGrid, TransverseGrid
from .source_models import (
    Classification,
    CorrelationKernel,
    Flavor,
    GaussianSchellParams,
    Preset,
    SourceState,
    classify_state,
    make_custom_source,
    make_source,
)
from .propagation import PropagationGeometry, fresnel_report, propagate, propagate_pi, propagate_ps
from .masks import MaskSpec, double_slit_mask, point_mask, slit_mask, uniform_mask
from .imaging import (
    DetectionSetup,
    ImageScan,
    analytic_image,
    contrast,
    contrast_closed_form,
    ghost_image,
    measure_psf,
    numeric_image,
)
from .relay import RelayConfig, relay_image
from .construction import PrescribedKernels, construct, svd_decompose, verify_classical
from .montecarlo import run_montecarlo, sample_fields

__all__ = [
    "__version__",
    "ConfigError",
    "GhostImagingError",
    "GridMismatch",
    "InvalidParams",
    "NonclassicalState",
    "RegimeError",
    "TimeGrid",
    "TransverseGrid",
    "Classification",
    "CorrelationKernel",
    "Flavor",
    "GaussianSchellParams",
    "Preset",
    "SourceState",
    "classify_state",
    "make_custom_source",
    "make_source",
    "PropagationGeometry",
    "fresnel_report",
    "propagate",
    "propagate_pi",
    "propagate_ps",
    "MaskSpec",
    "double_slit_mask",
    "point_mask",
    "slit_mask",
    "uniform_mask",
    "DetectionSetup",
    "ImageScan",
    "analytic_image",
    "contrast",
    "contrast_closed_form",
    "ghost_image",
    "measure_psf",
    "numeric_image",
    "RelayConfig",
    "relay_image",
    "PrescribedKernels",
    "construct",
    "svd_decompose",
    "verify_classical",
    "run_montecarlo",
    "sample_fields",
]

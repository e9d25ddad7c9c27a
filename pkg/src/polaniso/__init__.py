"""Azimuth-subaperture anisotropy analysis for polarimetric SAR.

Sublook decomposition plus the 3-D Barakat degree of polarisation, a Wishart
stationarity test across sublooks, and a span-weighted correction of the
volume scattering power.
"""

__version__ = "0.1.0"

from .analysis import Analysis, VolumeCorrector, analyse, extract_transect, quadrant_group
from .correction import adjust_helix, corrected_depolarisation, corrected_volume
from .metrics import MetricRaster, entropy, m_fp, one_minus_m_fp, p_v, rvi, span, span_ratio
from .scene import RegionSpec, SceneSpec, analytic_mfp, simulate
from .slc import (
    AcqMeta,
    CoherencyField,
    SlcImage,
    SlopeRaster,
    boxcar_coherency,
    load_slc,
    pauli_vector,
    save_slc,
    slope_mask,
)
from .stationarity import AnisotropyDetector, classify, flag_anisotropy, ml_ratio
from .sublook import (
    SublookConfig,
    SublookDecomposer,
    azimuth_interval,
    doppler_frequency,
    estimate_weighting,
    extract_sublooks,
)

__all__ = [
    "AcqMeta",
    "Analysis",
    "AnisotropyDetector",
    "CoherencyField",
    "MetricRaster",
    "RegionSpec",
    "SceneSpec",
    "SlcImage",
    "SlopeRaster",
    "SublookConfig",
    "SublookDecomposer",
    "VolumeCorrector",
    "adjust_helix",
    "analyse",
    "analytic_mfp",
    "azimuth_interval",
    "boxcar_coherency",
    "classify",
    "corrected_depolarisation",
    "corrected_volume",
    "doppler_frequency",
    "entropy",
    "estimate_weighting",
    "extract_sublooks",
    "extract_transect",
    "flag_anisotropy",
    "load_slc",
    "m_fp",
    "ml_ratio",
    "one_minus_m_fp",
    "p_v",
    "pauli_vector",
    "quadrant_group",
    "rvi",
    "save_slc",
    "simulate",
    "slope_mask",
    "span",
    "span_ratio",
]

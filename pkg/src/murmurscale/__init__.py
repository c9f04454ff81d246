"""Wavelet multiscale features for heart-sound recordings.

Modules: ``wavelets`` (periodic DWT), ``monofractal`` (spectrum, slope,
entropy), ``multifractal`` (partition function, Legendre spectrum,
descriptors), ``features``, ``stats`` (rank-sum screening), ``classify``,
``io``, ``config`` and ``cli``.
"""

__version__ = "0.1.0"

from .features import FEATURE_NAMES, FeatureConfig, FeatureMatrix, extract_features
from .wavelets import dwt_forward, dwt_inverse, make_filter

__all__ = [
    "__version__",
    "FEATURE_NAMES",
    "FeatureConfig",
    "FeatureMatrix",
    "extract_features",
    "dwt_forward",
    "dwt_inverse",
    "make_filter",
]

"""
metaspline package.

Spline and piecewise-geodesic interpolation of key-frame images in the
fully discrete metamorphosis model, solved with iPALM on a coarse-to-fine
grid hierarchy.
"""

from .logging_config import configure_logging, logger

__version__ = "0.3.0"

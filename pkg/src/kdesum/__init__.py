"""Gaussian kernel summation with hard relative error bounds.

Engines: brute force, centroid dual-tree (DFD), dual-tree fast Gauss transform
(DFGT) and a binned FFT baseline, plus cross-validation on top of them.
"""

from .cv import CvResult, bandwidth_sweep, lkcv_score, lscv_score, pilot_bandwidth
from .dataset import PointFileError, PointSet, gaussian_normalizer, generate, kernel_value, load_points, save_values
from .engine import EngineConfig, KdeResult, ReferenceModel, dfd_kde, dfgt_kde, naive_kde, verify_relative_error
from .gridfft import GridInfeasible, gridfft_auto, gridfft_kde
from .kdtree import KdTree, build_tree

__all__ = [
    "PointSet",
    "PointFileError",
    "load_points",
    "save_values",
    "kernel_value",
    "gaussian_normalizer",
    "generate",
    "KdTree",
    "build_tree",
    "EngineConfig",
    "KdeResult",
    "ReferenceModel",
    "naive_kde",
    "dfd_kde",
    "dfgt_kde",
    "verify_relative_error",
    "gridfft_kde",
    "gridfft_auto",
    "GridInfeasible",
    "CvResult",
    "lkcv_score",
    "lscv_score",
    "bandwidth_sweep",
    "pilot_bandwidth",
]

"""Low-resolution face recognition experiments.

Bicubic and SRCNN upscaling, uniform LBP descriptors (single-scale,
multi-scale, landmark-based), chi-square nearest-neighbour matching and a
closed-set gallery/probe evaluation harness.
"""
from .errors import StageError, ValidationError
from .imgcore import Image, bicubic_resize, load_image, psnr, save_image, to_gray
from .kernels import backend
from .lbp import (FeatureVector, Landmarks, LbpParams, extract_highdim_lbp, extract_lbp,
                  extract_mslbp, pca_fit, pca_project)
from .matcher import DistanceMatrix, chi_square, distance_matrix, rank_gallery
from .protocol import aggregate, build_split, evaluate, load_manifest
from .srcnn import ConvLayer, SrcnnModel, forward, load_weights, save_weights

__all__ = [
    "StageError", "ValidationError",
    "Image", "bicubic_resize", "load_image", "psnr", "save_image", "to_gray",
    "backend",
    "FeatureVector", "Landmarks", "LbpParams", "extract_highdim_lbp", "extract_lbp",
    "extract_mslbp", "pca_fit", "pca_project",
    "DistanceMatrix", "chi_square", "distance_matrix", "rank_gallery",
    "aggregate", "build_split", "evaluate", "load_manifest",
    "ConvLayer", "SrcnnModel", "forward", "load_weights", "save_weights",
]
__version__ = "0.1.0"

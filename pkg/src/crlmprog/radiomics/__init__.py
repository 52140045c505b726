from .discretize import DiscretizationSpec, GrayLevelGrid, as_grid, discretize
from .features import (
    ExtractionSettings,
    RadiomicFeatureSet,
    extract_lesion_features,
    firstorder_features,
    shape_features,
    write_long_csv,
)
from .reproducibility import aggregate_lesions, ccc_filter, concordance_correlation, eroded_mask
from .texture import DIRECTIONS_13, NoPairs, glcm_features, glcm_matrices, glrlm_features, glrlm_matrices, glszm_features, glszm_matrix
from .volume import LesionMask, Volume, VolumeError, make_phantom, read_mask, read_volume, write_mask, write_volume

__all__ = [
    "DIRECTIONS_13",
    "DiscretizationSpec",
    "ExtractionSettings",
    "GrayLevelGrid",
    "LesionMask",
    "NoPairs",
    "RadiomicFeatureSet",
    "Volume",
    "VolumeError",
    "aggregate_lesions",
    "as_grid",
    "ccc_filter",
    "concordance_correlation",
    "discretize",
    "eroded_mask",
    "extract_lesion_features",
    "firstorder_features",
    "glcm_features",
    "glcm_matrices",
    "glrlm_features",
    "glrlm_matrices",
    "glszm_features",
    "glszm_matrix",
    "make_phantom",
    "read_mask",
    "read_volume",
    "shape_features",
    "write_long_csv",
    "write_mask",
    "write_volume",
]

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .volume import LesionMask, Volume

log = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 25.0


@dataclass(frozen=True)
class DiscretizationSpec:
    bin_width: float | None = DEFAULT_BIN_WIDTH
    n_bins: int | None = None

    def __post_init__(self):
        if (self.bin_width is None) == (self.n_bins is None):
            raise ValueError("set exactly one of bin_width and n_bins")
        if self.bin_width is not None and not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if self.n_bins is not None and not self.n_bins >= 1:
            raise ValueError("n_bins must be >= 1")

    @classmethod
    def fixed_count(cls, n_bins: int) -> "DiscretizationSpec":
        return cls(bin_width=None, n_bins=n_bins)


@dataclass(frozen=True)
class GrayLevelGrid:
    """Integer levels 1..n_levels inside the mask, 0 outside."""

    levels: np.ndarray
    n_levels: int
    constant: bool = False


def discretize_values(x: np.ndarray, spec: DiscretizationSpec) -> tuple[np.ndarray, bool]:
    lo, hi = float(x.min()), float(x.max())
    if spec.bin_width is not None:
        return (np.floor((x - lo) / spec.bin_width) + 1).astype(int), hi == lo
    if hi == lo:
        return np.ones(x.shape, dtype=int), True
    lev = np.floor(spec.n_bins * (x - lo) / (hi - lo)).astype(int) + 1
    return np.minimum(lev, spec.n_bins), False


def discretize(volume: Volume, mask: LesionMask, spec: DiscretizationSpec | None = None) -> GrayLevelGrid:
    """Bin masked intensities relative to the masked minimum.

    Fixed width: level = floor((x - min) / width) + 1. Fixed count: ``n_bins``
    equal-width bins spanning [min, max], the maximum falling in the top bin.
    """
    spec = spec or DiscretizationSpec()
    mask.check_matches(volume)
    m = mask.voxels
    lev, constant = discretize_values(volume.voxels[m], spec)
    if constant and spec.n_bins is not None:
        log.warning("lesion %s has a constant intensity; single gray level", mask.lesion_id)
    grid = np.zeros(m.shape, dtype=int)
    grid[m] = lev
    return GrayLevelGrid(grid, int(lev.max()), constant)


def as_grid(levels) -> GrayLevelGrid:
    """Wrap a hand-made integer level array (0 = outside the region); 1-D/2-D inputs are lifted to 3-D."""
    a = np.asarray(levels, dtype=int)
    while a.ndim < 3:
        a = a[..., None]
    if (a < 0).any():
        raise ValueError("levels must be non-negative")
    if not (a > 0).any():
        raise ValueError("grid has no foreground voxels")
    return GrayLevelGrid(a, int(a.max()))

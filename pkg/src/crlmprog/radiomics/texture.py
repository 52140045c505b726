r"""Second-order texture matrices on a gray-level grid: GLCM, GLRLM and GLSZM.

GLCM and GLRLM are built separately for each of the 13 unique 3-D directions
(one of each +/- pair of the 26-neighbourhood); features are computed per
direction and averaged over the directions that contribute at least one
pair/run. GLSZM zones are 26-connected components of equal level.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import ndimage

from .discretize import GrayLevelGrid

DIRECTIONS_13: tuple[tuple[int, int, int], ...] = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0) and next(c for c in d if c != 0) > 0
)


class NoPairs(ValueError):
    """The region has no voxel pair at the requested distance."""


def _shifted_slices(shape, offset):
    src, dst = [], []
    for n, o in zip(shape, offset):
        if abs(o) >= n:
            return None
        src.append(slice(max(0, -o), n - max(0, o)))
        dst.append(slice(max(0, o), n - max(0, -o)))
    return tuple(src), tuple(dst)


# ---------------------------------------------------------------------------
# GLCM


def glcm_matrices(grid: GrayLevelGrid, distance: int = 1, symmetric: bool = True, directions=DIRECTIONS_13):
    """Raw co-occurrence counts, shape (n_directions, Ng, Ng); P[d, i-1, j-1] counts level i at x, j at x+d."""
    g = grid.levels
    ng = grid.n_levels
    out = np.zeros((len(directions), ng, ng))
    for k, d in enumerate(directions):
        sl = _shifted_slices(g.shape, tuple(distance * c for c in d))
        if sl is None:
            continue
        a, b = g[sl[0]], g[sl[1]]
        ok = (a > 0) & (b > 0)
        idx = (a[ok] - 1) * ng + (b[ok] - 1)
        P = np.bincount(idx, minlength=ng * ng).reshape(ng, ng).astype(float)
        out[k] = P + P.T if symmetric else P
    return out


def _glcm_direction_features(P: np.ndarray) -> dict[str, float]:
    p = P / P.sum()
    ng = p.shape[0]
    i, j = np.meshgrid(np.arange(1, ng + 1), np.arange(1, ng + 1), indexing="ij")
    px, py = p.sum(axis=1), p.sum(axis=0)
    lv = np.arange(1, ng + 1)
    mux, muy = (px * lv).sum(), (py * lv).sum()
    sdx = np.sqrt((px * (lv - mux) ** 2).sum())
    sdy = np.sqrt((py * (lv - muy) ** 2).sum())
    autocorr = float((p * i * j).sum())
    if sdx * sdy == 0:
        corr = 1.0  # single populated level: perfectly dependent by convention
    else:
        corr = float((autocorr - mux * muy) / (sdx * sdy))
    nz = p[p > 0]
    diff = np.abs(i - j)
    return {
        "Contrast": float((p * diff**2).sum()),
        "Correlation": corr,
        "JointEntropy": float(-(nz * np.log2(nz)).sum()),
        "Homogeneity": float((p / (1.0 + diff)).sum()),
        "JointEnergy": float((p**2).sum()),
        "DifferenceAverage": float((p * diff).sum()),
        "Autocorrelation": autocorr,
    }


def glcm_features(
    grid: GrayLevelGrid, distance: int = 1, symmetric: bool = True, directions=DIRECTIONS_13
) -> dict[str, float]:
    mats = glcm_matrices(grid, distance, symmetric, directions)
    per_dir = [_glcm_direction_features(P) for P in mats if P.sum() > 0]
    if not per_dir:
        raise NoPairs("no voxel pairs inside the region at this distance")
    return {k: float(np.mean([f[k] for f in per_dir])) for k in per_dir[0]}


# ---------------------------------------------------------------------------
# GLRLM


def _runs_along(g: np.ndarray, d) -> tuple[np.ndarray, np.ndarray]:
    """(levels, lengths) of maximal equal-level runs following direction ``d``."""
    shape = np.array(g.shape)
    d = np.asarray(d)
    coords = np.argwhere(g > 0)
    prev = coords - d
    inb = np.all((prev >= 0) & (prev < shape), axis=1)
    lev = g[tuple(coords.T)]
    prev_lev = np.zeros(len(coords), dtype=g.dtype)
    prev_lev[inb] = g[tuple(prev[inb].T)]
    starts = coords[prev_lev != lev]
    level = g[tuple(starts.T)]
    length = np.ones(len(starts), dtype=int)
    active = np.ones(len(starts), dtype=bool)
    step = 1
    while active.any():
        q = starts + step * d
        inb = np.all((q >= 0) & (q < shape), axis=1)
        same = np.zeros(len(starts), dtype=bool)
        idx = active & inb
        same[idx] = g[tuple(q[idx].T)] == level[idx]
        active &= same
        length += active
        step += 1
    return level, length


def glrlm_matrices(grid: GrayLevelGrid, directions=DIRECTIONS_13) -> np.ndarray:
    """Run counts, shape (n_directions, Ng, max_run); R[d, i-1, l-1] counts runs of level i and length l."""
    g = grid.levels
    max_run = max(g.shape)
    out = np.zeros((len(directions), grid.n_levels, max_run))
    for k, d in enumerate(directions):
        level, length = _runs_along(g, d)
        np.add.at(out[k], (level - 1, length - 1), 1.0)
    return out


def _glrlm_direction_features(R: np.ndarray, n_voxels: int) -> dict[str, float]:
    nr = R.sum()
    j = np.arange(1, R.shape[1] + 1, dtype=float)
    pr = R / nr
    nz = pr[pr > 0]
    return {
        "ShortRunEmphasis": float((R / j**2).sum() / nr),
        "LongRunEmphasis": float((R * j**2).sum() / nr),
        "GrayLevelNonUniformity": float((R.sum(axis=1) ** 2).sum() / nr),
        "RunLengthNonUniformity": float((R.sum(axis=0) ** 2).sum() / nr),
        "RunPercentage": float(nr / n_voxels),
        "RunEntropy": float(-(nz * np.log2(nz)).sum()),
    }


def glrlm_features(grid: GrayLevelGrid, directions=DIRECTIONS_13) -> dict[str, float]:
    n_voxels = int((grid.levels > 0).sum())
    if n_voxels == 0:
        raise ValueError("empty region")
    per_dir = [_glrlm_direction_features(R, n_voxels) for R in glrlm_matrices(grid, directions)]
    return {k: float(np.mean([f[k] for f in per_dir])) for k in per_dir[0]}


# ---------------------------------------------------------------------------
# GLSZM

_CONN26 = np.ones((3, 3, 3), dtype=bool)


def glszm_matrix(grid: GrayLevelGrid) -> np.ndarray:
    """Zone counts, shape (Ng, max_zone); Z[i-1, s-1] counts 26-connected level-i zones of s voxels."""
    g = grid.levels
    n_voxels = int((g > 0).sum())
    Z = np.zeros((grid.n_levels, max(n_voxels, 1)))
    for level in range(1, grid.n_levels + 1):
        labels, n = ndimage.label(g == level, structure=_CONN26)
        if n:
            sizes = np.bincount(labels.ravel())[1:]
            np.add.at(Z[level - 1], sizes - 1, 1.0)
    return Z


def glszm_features(grid: GrayLevelGrid) -> dict[str, float]:
    Z = glszm_matrix(grid)
    n_voxels = int((grid.levels > 0).sum())
    if n_voxels == 0:
        raise ValueError("empty region")
    nz_total = Z.sum()
    s = np.arange(1, Z.shape[1] + 1, dtype=float)
    pz = Z / nz_total
    nz = pz[pz > 0]
    return {
        "SmallAreaEmphasis": float((Z / s**2).sum() / nz_total),
        "LargeAreaEmphasis": float((Z * s**2).sum() / nz_total),
        "ZoneEntropy": float(-(nz * np.log2(nz)).sum()),
        "ZonePercentage": float(nz_total / n_voxels),
        "GrayLevelNonUniformity": float((Z.sum(axis=1) ** 2).sum() / nz_total),
        "SizeZoneNonUniformity": float((Z.sum(axis=0) ** 2).sum() / nz_total),
    }

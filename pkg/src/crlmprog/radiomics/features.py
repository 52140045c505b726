"""Per-lesion feature extraction: first-order, shape and texture classes."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .discretize import DiscretizationSpec, discretize, discretize_values
from .texture import glcm_features, glrlm_features, glszm_features
from .volume import LesionMask, Volume

CATEGORIES = ("firstorder", "shape", "glcm", "glrlm", "glszm")


@dataclass(frozen=True)
class RadiomicFeatureSet:
    lesion_id: str
    values: dict[str, float]
    categories: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        bad = [k for k, v in self.values.items() if not np.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite feature values: {bad}")

    def merged(self, other: "RadiomicFeatureSet") -> "RadiomicFeatureSet":
        return RadiomicFeatureSet(
            self.lesion_id, {**self.values, **other.values}, {**self.categories, **other.categories}
        )


def _named(category: str, feats: dict[str, float], lesion_id: str) -> RadiomicFeatureSet:
    values = {f"original_{category}_{k}": float(v) for k, v in feats.items()}
    return RadiomicFeatureSet(lesion_id, values, {k: category for k in values})


def firstorder_features(
    volume: Volume, mask: LesionMask, spec: DiscretizationSpec | None = None
) -> RadiomicFeatureSet:
    """Intensity statistics over masked voxels (population moments, excess kurtosis, log2 entropy)."""
    mask.check_matches(volume)
    x = volume.voxels[mask.voxels]
    mean = x.mean()
    dev = x - mean
    m2 = float((dev**2).mean())
    m3 = float((dev**3).mean())
    m4 = float((dev**4).mean())
    levels, _ = discretize_values(x, spec or DiscretizationSpec())
    p = np.bincount(levels)[1:] / x.size
    p = p[p > 0]
    feats = {
        "Mean": float(mean),
        "Variance": m2,
        "Skewness": m3 / m2**1.5 if m2 > 0 else 0.0,
        "Kurtosis": m4 / m2**2 - 3.0 if m2 > 0 else 0.0,
        "Energy": float((x**2).sum()),
        "Entropy": float(-(p * np.log2(p)).sum()),
        "Minimum": float(x.min()),
        "Maximum": float(x.max()),
        "Range": float(x.max() - x.min()),
        "Median": float(np.median(x)),
        "RootMeanSquared": float(np.sqrt((x**2).mean())),
    }
    return _named("firstorder", feats, mask.lesion_id)


def _exposed_faces(m: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Surface-voxel flags (>= 1 six-connected background/outside neighbour) and exposed face counts per axis."""
    padded = np.pad(m, 1)
    core = (slice(1, -1),) * 3
    surface = np.zeros(m.shape, dtype=bool)
    faces = []
    for axis in range(3):
        count = 0
        for step in (-1, 1):
            nb = np.roll(padded, step, axis=axis)[core]
            exposed = m & ~nb
            surface |= exposed
            count += int(exposed.sum())
        faces.append(count)
    return surface, faces


def max_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    if len(points) > 1500:
        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            pass  # degenerate (coplanar) set: fall back to all points
    return float(pdist(points).max())


def shape_features(mask: LesionMask, spacing: Sequence[float]) -> RadiomicFeatureSet:
    """Voxel-count volume, exposed-face surface area and surface-voxel maximum 3-D diameter (mm)."""
    sx, sy, sz = (float(s) for s in spacing)
    m = mask.voxels
    volume = float(m.sum()) * sx * sy * sz
    surface, faces = _exposed_faces(m)
    area = faces[0] * sy * sz + faces[1] * sx * sz + faces[2] * sx * sy
    centers = np.argwhere(surface) * np.array([sx, sy, sz])
    feats = {
        "VoxelVolume": volume,
        "SurfaceArea": float(area),
        "SurfaceVolumeRatio": float(area / volume),
        "Sphericity": float(np.pi ** (1 / 3) * (6 * volume) ** (2 / 3) / area),
        "Maximum3DDiameter": max_pairwise_distance(centers),
    }
    return _named("shape", feats, mask.lesion_id)


@dataclass(frozen=True)
class ExtractionSettings:
    discretization: DiscretizationSpec = DiscretizationSpec()
    glcm_distance: int = 1
    glcm_symmetric: bool = True


def extract_lesion_features(
    volume: Volume, mask: LesionMask, settings: ExtractionSettings | None = None
) -> RadiomicFeatureSet:
    """All feature classes for one lesion. Pure; safe to call concurrently."""
    settings = settings or ExtractionSettings()
    mask.check_matches(volume)
    grid = discretize(volume, mask, settings.discretization)
    out = firstorder_features(volume, mask, settings.discretization)
    out = out.merged(shape_features(mask, volume.spacing))
    out = out.merged(_named("glcm", glcm_features(grid, settings.glcm_distance, settings.glcm_symmetric), mask.lesion_id))
    out = out.merged(_named("glrlm", glrlm_features(grid), mask.lesion_id))
    return out.merged(_named("glszm", glszm_features(grid), mask.lesion_id))


def write_long_csv(rows: Sequence[tuple[str, RadiomicFeatureSet]], path: str | Path, header_comment=None) -> None:
    """Long format: patient_id, lesion_id, feature, value, category."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "lesion_id", "feature", "value", "category"])
        for pid, fs in rows:
            for name in sorted(fs.values):
                w.writerow([pid, fs.lesion_id, name, repr(fs.values[name]), fs.categories.get(name, "")])

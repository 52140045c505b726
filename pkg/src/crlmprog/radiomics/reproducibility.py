"""Multi-lesion aggregation and concordance-based reproducibility filtering."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .features import RadiomicFeatureSet
from .volume import LesionMask

DEFAULT_CCC_THRESHOLD = 0.85


def aggregate_lesions(
    per_lesion: Sequence[RadiomicFeatureSet], volumes_mm3: Sequence[float]
) -> tuple[RadiomicFeatureSet, RadiomicFeatureSet]:
    """Return (largest lesion's features, volume-weighted mean features).

    Volume ties resolve to the lexicographically smallest lesion id.
    """
    if len(per_lesion) != len(volumes_mm3):
        raise ValueError(f"{len(per_lesion)} feature sets but {len(volumes_mm3)} volumes")
    if not per_lesion:
        raise ValueError("no lesions to aggregate")
    v = np.asarray(volumes_mm3, dtype=float)
    if (v <= 0).any():
        raise ValueError("lesion volumes must be positive")
    largest = min(range(len(v)), key=lambda i: (-v[i], per_lesion[i].lesion_id))
    names = list(per_lesion[0].values)
    for fs in per_lesion[1:]:
        if set(fs.values) != set(names):
            raise ValueError("lesions carry different feature sets")
    w = v / v.sum()
    weighted = {n: float(sum(wi * fs.values[n] for wi, fs in zip(w, per_lesion))) for n in names}
    if len(per_lesion) == 1:
        weighted = dict(per_lesion[0].values)
    else:
        # keep the weighted mean inside the per-lesion range despite rounding
        for n in names:
            vals = [fs.values[n] for fs in per_lesion]
            weighted[n] = min(max(weighted[n], min(vals)), max(vals))
    return (
        per_lesion[largest],
        RadiomicFeatureSet("weighted", weighted, dict(per_lesion[0].categories)),
    )


def concordance_correlation(a, b) -> float:
    """Lin's CCC with population moments; identical constants give 1."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError("arms must be non-empty and aligned")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = ((a - ma) * (b - mb)).mean()
    denom = va + vb + (ma - mb) ** 2
    if denom == 0:
        return 1.0
    return float(2 * cov / denom)


@dataclass(frozen=True)
class CccReport:
    ccc: dict[str, float]
    threshold: float

    @property
    def retained(self) -> list[str]:
        return [k for k, v in self.ccc.items() if v >= self.threshold]


def ccc_filter(features_a, features_b, names: Sequence[str], threshold: float = DEFAULT_CCC_THRESHOLD) -> CccReport:
    """Per-feature CCC between two aligned (patients x features) arms; retain CCC >= threshold."""
    A = np.asarray(features_a, dtype=float)
    B = np.asarray(features_b, dtype=float)
    if A.shape != B.shape or A.shape[1] != len(names):
        raise ValueError(f"arms must be aligned with {len(names)} features; got {A.shape} and {B.shape}")
    return CccReport({n: concordance_correlation(A[:, j], B[:, j]) for j, n in enumerate(names)}, threshold)


def eroded_mask(mask: LesionMask) -> LesionMask:
    """One-voxel six-connected erosion used as the perturbed segmentation arm.

    Lesions too thin to survive erosion keep their original mask.
    """
    eroded = ndimage.binary_erosion(mask.voxels, structure=ndimage.generate_binary_structure(3, 1))
    if not eroded.any():
        return mask
    return LesionMask(eroded, mask.lesion_id)

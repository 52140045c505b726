"""HU volumes, lesion masks, their raw+JSON container and a synthetic liver phantom."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class VolumeError(ValueError):
    pass


@dataclass(frozen=True)
class Volume:
    voxels: np.ndarray  # shape (nx, ny, nz), HU
    spacing: tuple[float, float, float]  # mm

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=float)
        if v.ndim != 3 or min(v.shape) < 1:
            raise VolumeError(f"volume must be 3-D with positive dims, got shape {v.shape}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise VolumeError(f"spacing must be three positive numbers, got {self.spacing}")
        object.__setattr__(self, "voxels", v)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.voxels.shape)


@dataclass(frozen=True)
class LesionMask:
    voxels: np.ndarray  # bool, shape (nx, ny, nz)
    lesion_id: str

    def __post_init__(self):
        m = np.asarray(self.voxels)
        if m.ndim != 3:
            raise VolumeError("mask must be 3-D")
        if not np.isin(m, (0, 1)).all():
            raise VolumeError("mask voxels must be 0 or 1")
        m = m.astype(bool)
        if not m.any():
            raise VolumeError(f"mask {self.lesion_id!r} has no foreground voxels")
        object.__setattr__(self, "voxels", m)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.voxels.shape)

    def check_matches(self, volume: Volume) -> None:
        if self.dims != volume.dims:
            raise VolumeError(f"mask {self.lesion_id!r} dims {self.dims} do not match volume dims {volume.dims}")


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def write_raw(array: np.ndarray, path: str | Path, spacing, hu_offset: float = 0.0) -> None:
    """Write little-endian float32 voxels (C order) plus a JSON sidecar {dims, spacing, hu_offset}."""
    path = Path(path)
    data = (np.asarray(array, dtype=float) - hu_offset).astype("<f4")
    path.write_bytes(data.tobytes(order="C"))
    meta = {"dims": list(array.shape), "spacing": [float(s) for s in spacing], "hu_offset": float(hu_offset)}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_raw(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    dims = tuple(int(d) for d in meta["dims"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != int(np.prod(dims)):
        raise VolumeError(f"{path}: {raw.size} voxels on disk, sidecar declares dims {dims}")
    arr = raw.reshape(dims).astype(float) + float(meta.get("hu_offset", 0.0))
    return arr, tuple(meta["spacing"])


def read_volume(path: str | Path) -> Volume:
    arr, spacing = read_raw(path)
    return Volume(arr, spacing)


def read_mask(path: str | Path, lesion_id: str | None = None) -> LesionMask:
    arr, _ = read_raw(path)
    return LesionMask(arr, lesion_id or Path(path).stem)


def write_volume(volume: Volume, path: str | Path, hu_offset: float = 0.0) -> None:
    write_raw(volume.voxels, path, volume.spacing, hu_offset)


def write_mask(mask: LesionMask, path: str | Path, spacing) -> None:
    write_raw(mask.voxels.astype(float), path, spacing)


def make_phantom(
    seed: int,
    shape: tuple[int, int, int] = (40, 40, 24),
    spacing: tuple[float, float, float] = (0.8, 0.8, 2.5),
    n_lesions: int = 2,
    liver_hu: float = 55.0,
) -> tuple[Volume, list[LesionMask]]:
    """Noisy liver-like background with ``n_lesions`` non-overlapping ellipsoidal hypodense lesions.

    Voxel values are rounded to whole HU so phantoms survive the float32 container exactly.
    """
    rng = np.random.default_rng(seed)
    vol = rng.normal(liver_hu, 8.0, shape)
    grid = np.indices(shape).astype(float)
    taken = np.zeros(shape, dtype=bool)
    masks = []
    for k in range(n_lesions):
        for _ in range(100):
            radii = rng.uniform(2.5, 6.0, 3) / np.array([1.0, 1.0, spacing[2] / spacing[0]])
            radii = np.maximum(radii, 1.0)
            center = [rng.uniform(r + 1, s - r - 2) for r, s in zip(radii, shape)]
            inside = sum(((g - c) / r) ** 2 for g, c, r in zip(grid, center, radii)) <= 1.0
            if inside.any() and not (inside & taken).any():
                break
        else:
            raise VolumeError("could not place non-overlapping lesions; use a larger phantom")
        taken |= inside
        lesion_hu = rng.uniform(20.0, 45.0)
        texture = rng.normal(0.0, rng.uniform(6.0, 18.0), shape)
        vol = np.where(inside, lesion_hu + texture, vol)
        masks.append(LesionMask(inside, f"L{k + 1}"))
    return Volume(np.round(vol), spacing), masks

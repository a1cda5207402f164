"""Voxel grids, element kinds, and neighborhood geometry.

A :class:`Volume` is a dense 3-D grid with physical voxel spacing in mm.
In memory the payload is a C-contiguous numpy array indexed ``[x, y, z]``;
whenever a flat cell index is needed (randomness, file payloads) the
x-fastest linearization ``lin = x + nx * (y + ny * z)`` is used.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import ShapeError, ValidationError


class ElementKind(Enum):
    """What a voxel value means, and how it is stored on disk."""

    HU = "hu"              # CT intensity, Hounsfield units
    LABEL = "label"        # binary mask, {0, 1}
    LEVEL = "level"        # quantized tissue level, 0..4
    STATE = "state"        # tumor cell population, -1..10
    PRESSURE = "pressure"  # accumulated invasion pressure, >= 0
    REAL = "real"          # real-valued scratch data (textures)

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(_KIND_DTYPES[self])

    @property
    def value_range(self) -> tuple[int, int] | None:
        """Inclusive legal value range, or None if unconstrained."""
        return _KIND_RANGES.get(self)


_KIND_DTYPES = {
    ElementKind.HU: np.int16,
    ElementKind.LABEL: np.uint8,
    ElementKind.LEVEL: np.uint8,
    ElementKind.STATE: np.int8,
    ElementKind.PRESSURE: np.uint16,
    ElementKind.REAL: np.float32,
}

_KIND_RANGES = {
    ElementKind.LABEL: (0, 1),
    ElementKind.LEVEL: (0, 4),
    ElementKind.STATE: (-1, 10),
}


@dataclass
class Volume:
    """Dense 3-D voxel grid with spacing metadata.

    data:
        C-contiguous numpy array of shape (nx, ny, nz) with the dtype
        mandated by ``kind``.
    spacing:
        physical voxel size (sx, sy, sz) in millimetres, all > 0.
    kind:
        element semantics; fixes the dtype and (for masks, levels, states)
        the legal value range.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]
    kind: ElementKind

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data)
        if self.data.ndim != 3:
            raise ShapeError(f"volume data must be 3-D, got shape {self.data.shape}")
        if self.data.dtype != self.kind.dtype:
            raise ValidationError(
                f"{self.kind.value} volume requires dtype {self.kind.dtype}, got {self.data.dtype}"
            )
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(not (s > 0.0) for s in self.spacing):
            raise ValidationError(f"spacing must be three positive numbers, got {self.spacing}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def validate_range(self) -> None:
        """Check every voxel against the kind's legal range (O(n))."""
        rng = self.kind.value_range
        if rng is None:
            return
        lo, hi = rng
        mn = int(self.data.min()) if self.data.size else lo
        mx = int(self.data.max()) if self.data.size else hi
        if mn < lo or mx > hi:
            raise ValidationError(
                f"{self.kind.value} volume has values in [{mn}, {mx}], legal range is [{lo}, {hi}]"
            )

    def copy(self) -> "Volume":
        return Volume(self.data.copy(), self.spacing, self.kind)

    def like(self, data: np.ndarray, kind: ElementKind | None = None) -> "Volume":
        """New volume with the same spacing (and kind, unless overridden)."""
        return Volume(data, self.spacing, kind or self.kind)

    @classmethod
    def zeros(cls, dims, spacing, kind: ElementKind) -> "Volume":
        return cls(np.zeros(dims, dtype=kind.dtype), spacing, kind)


def check_same_grid(*volumes: Volume) -> None:
    """Raise ShapeError unless all volumes share dims and spacing."""
    first = volumes[0]
    for v in volumes[1:]:
        if v.dims != first.dims:
            raise ShapeError(f"shape mismatch: volume dims {first.dims} vs {v.dims}")
        if v.spacing != first.spacing:
            raise ShapeError(f"shape mismatch: volume spacing {first.spacing} vs {v.spacing}")


def _make_offsets() -> np.ndarray:
    offs = []
    for dz in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0 and dz == 0:
                    continue
                offs.append((dx, dy, dz))
    return np.array(offs, dtype=np.int64)


#: The 26 Moore-neighborhood offsets as (dx, dy, dz) rows, in ascending
#: lexicographic order of (dz, dy, dx).  Every neighbor enumeration and the
#: direction-choice stream index into this fixed order, and it is
#: antisymmetric: OFFSETS_26[k] == -OFFSETS_26[25 - k].
OFFSETS_26 = _make_offsets()
OFFSETS_26.setflags(write=False)


def neighborhood26(index: tuple[int, int, int], dims: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    """In-bounds 26-neighbors of ``index``, in the fixed offset order."""
    x, y, z = index
    nx, ny, nz = dims
    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
        raise ShapeError(f"index {index} outside grid of dims {dims}")
    out = []
    for dx, dy, dz in OFFSETS_26:
        tx, ty, tz = x + dx, y + dy, z + dz
        if 0 <= tx < nx and 0 <= ty < ny and 0 <= tz < nz:
            out.append((int(tx), int(ty), int(tz)))
    return out


def linear_index(x, y, z, dims) -> int:
    """x-fastest flat index: lin = x + nx * (y + ny * z)."""
    nx, ny, _ = dims
    return x + nx * (y + ny * z)


def linear_to_xyz(lin, dims):
    """Inverse of :func:`linear_index`; works on scalars and arrays."""
    nx, ny, _ = dims
    x = lin % nx
    y = (lin // nx) % ny
    z = lin // (nx * ny)
    return x, y, z


def flat_x_fastest(data: np.ndarray) -> np.ndarray:
    """Flatten an [x, y, z]-indexed array so position lin holds voxel (x,y,z)."""
    return data.ravel(order="F")


def boundary_shell(mask: Volume, thickness: int = 1) -> Volume:
    """Voxels of ``mask`` within Chebyshev distance ``thickness`` of the outside.

    A mask voxel belongs to the shell iff some voxel outside the mask (or
    outside the grid) lies within ``thickness`` steps in the 26-connected
    metric.  Implemented as mask minus its erosion by a (3,3,3) structuring
    element applied ``thickness`` times, with the out-of-grid region treated
    as background.
    """
    if mask.kind != ElementKind.LABEL:
        raise ValidationError(f"boundary_shell expects a label volume, got {mask.kind.value}")
    if thickness < 1:
        raise ValidationError(f"shell thickness must be >= 1, got {thickness}")
    m = mask.data.astype(bool)
    core = ndimage.binary_erosion(
        m, structure=np.ones((3, 3, 3), dtype=bool), iterations=thickness, border_value=0
    )
    return mask.like((m & ~core).astype(np.uint8))

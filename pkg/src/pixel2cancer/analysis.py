"""Morphology and intensity statistics for generated tumors.

The tumor region is every voxel with population != 0 — dead voxels count,
since the necrotic core is clinically part of the tumor.  Roundness is
reported as sphericity computed from exposed voxel faces; the staircase
surface overestimates the area of smooth shapes, so sphericity is biased
low, and discretization wobble above 1 is clamped to 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTumorError, ValidationError
from .grid import ElementKind, Volume, check_same_grid


@dataclass
class TumorStats:
    voxel_count: int
    volume_mm3: float
    equivalent_diameter_mm: float
    sphericity: float
    mean_hu: float
    dead_fraction: float

    CSV_HEADER = "voxel_count,volume_mm3,eq_diam_mm,sphericity,mean_hu,dead_fraction"

    def csv_row(self) -> str:
        return (
            f"{self.voxel_count},{self.volume_mm3:.6g},{self.equivalent_diameter_mm:.6g},"
            f"{self.sphericity:.6g},{self.mean_hu:.6g},{self.dead_fraction:.6g}"
        )

    def text(self) -> str:
        """Line-oriented key=value rendering (one stat per line)."""
        return "\n".join(
            [
                f"voxel_count={self.voxel_count}",
                f"volume_mm3={self.volume_mm3:.6g}",
                f"eq_diam_mm={self.equivalent_diameter_mm:.6g}",
                f"sphericity={self.sphericity:.6g}",
                f"mean_hu={self.mean_hu:.6g}",
                f"dead_fraction={self.dead_fraction:.6g}",
            ]
        )


def surface_area_mm2(tumor: np.ndarray, spacing: tuple[float, float, float]) -> float:
    """Total area of voxel faces between tumor and non-tumor.

    Faces on the grid border count as exposed; each axis contributes faces
    of area equal to the product of the two perpendicular spacings.
    """
    t = np.asarray(tumor, dtype=bool)
    sx, sy, sz = spacing
    face_areas = (sy * sz, sx * sz, sx * sy)
    total = 0.0
    for axis, area in enumerate(face_areas):
        lead = [slice(None)] * 3
        trail = [slice(None)] * 3
        lead[axis] = slice(1, None)
        trail[axis] = slice(None, -1)
        between = int(np.count_nonzero(t[tuple(lead)] != t[tuple(trail)]))
        first = [slice(None)] * 3
        last = [slice(None)] * 3
        first[axis] = 0
        last[axis] = -1
        border = int(np.count_nonzero(t[tuple(first)])) + int(np.count_nonzero(t[tuple(last)]))
        total += (between + border) * area
    return total


def compute_stats(
    population: Volume,
    synthetic_hu: Volume,
    spacing: tuple[float, float, float] | None = None,
) -> TumorStats:
    """Statistics over the tumor region of a run.

    ``spacing`` defaults to the population volume's own spacing; passing it
    explicitly supports stats over raw arrays re-wrapped from files.
    """
    if population.kind != ElementKind.STATE:
        raise ValidationError(f"population must be a state volume, got {population.kind.value}")
    if synthetic_hu.kind != ElementKind.HU:
        raise ValidationError(f"synthetic_hu must be an hu volume, got {synthetic_hu.kind.value}")
    check_same_grid(population, synthetic_hu)
    if spacing is None:
        spacing = population.spacing
    sx, sy, sz = (float(s) for s in spacing)

    s = population.data
    tumor = s != 0
    count = int(np.count_nonzero(tumor))
    if count == 0:
        raise EmptyTumorError("population map has no tumor voxels (all healthy)")

    volume = count * sx * sy * sz
    eq_diam = (6.0 * volume / math.pi) ** (1.0 / 3.0)
    area = surface_area_mm2(tumor, (sx, sy, sz))
    sphericity = min(1.0, math.pi ** (1.0 / 3.0) * (6.0 * volume) ** (2.0 / 3.0) / area)
    mean_hu = float(synthetic_hu.data[tumor].mean(dtype=np.float64))
    dead = int(np.count_nonzero(s == -1))
    return TumorStats(
        voxel_count=count,
        volume_mm3=volume,
        equivalent_diameter_mm=eq_diam,
        sphericity=sphericity,
        mean_hu=mean_hu,
        dead_fraction=dead / count,
    )


def growth_curve(snapshots, spacing=None) -> list[tuple[int, float]]:
    """(iteration, tumor volume in mm³) per snapshot, in snapshot order."""
    curve = []
    for state in snapshots:
        sp = spacing if spacing is not None else state.population.spacing
        vox = float(sp[0]) * float(sp[1]) * float(sp[2])
        n = int(np.count_nonzero(state.population.data != 0))
        curve.append((state.iteration, n * vox))
    return curve

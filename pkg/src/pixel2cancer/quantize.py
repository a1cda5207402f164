"""Organ quantization: CT intensities -> discrete tissue hardness levels.

An organ voxel gets level 0 if it sits on the organ boundary shell or looks
like a vessel (bright on venous phase), otherwise a level in 1..4 from an
equal-width binning of its HU value between ``hu_low`` and ``hu_high``:

    level = clamp(1 + floor(4 * (hu - hu_low) / (hu_high - hu_low)), 1, 4)

Level 0 and level 4 are "hard" for the automaton (invaded only via
pressure); levels 1..3 are soft tissue.  Voxels outside the organ mask are
level 0 and not simulable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import ElementKind, Volume, boundary_shell, check_same_grid


@dataclass
class QuantizationParams:
    """Thresholds controlling the HU -> level mapping.

    hu_low / hu_high:
        typical lowest/highest parenchyma intensity for the organ; the four
        levels split this range into equal-width bins (values outside are
        clamped to level 1 or 4).
    vessel_hu_threshold:
        organ voxels at or above this HU are treated as vessels (level 0).
        May be >= hu_high; a very large value (e.g. 32767) disables vessel
        detection entirely.
    boundary_thickness:
        Chebyshev thickness in voxels of the level-0 organ-boundary shell.
    """

    hu_low: int = 80
    hu_high: int = 160
    vessel_hu_threshold: int = 180
    boundary_thickness: int = 1

    def __post_init__(self):
        for name in ("hu_low", "hu_high", "vessel_hu_threshold", "boundary_thickness"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            setattr(self, name, int(v))
        if not self.hu_low < self.hu_high:
            raise ValidationError(
                f"hu_low must be < hu_high, got hu_low={self.hu_low}, hu_high={self.hu_high}"
            )
        if self.boundary_thickness < 1:
            raise ValidationError(f"boundary_thickness must be >= 1, got {self.boundary_thickness}")


@dataclass
class QuantifiedOrgan:
    """Automaton environment: per-voxel hardness levels plus simulable mask.

    levels:    Volume<Level>, 0..4 (0 outside the organ as well).
    simulable: Volume<Label>, 1 exactly on organ-mask voxels.
    """

    levels: Volume
    simulable: Volume

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.levels.dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.levels.spacing


def quantize_organ(
    ct: Volume,
    organ_mask: Volume,
    params: QuantizationParams,
    vessel_mask: Volume | None = None,
) -> QuantifiedOrgan:
    """Build the quantified organ for a CT volume and its organ mask.

    If ``vessel_mask`` is given it overrides HU thresholding as the vessel
    source (useful when a real vessel segmentation is available).
    """
    if ct.kind != ElementKind.HU:
        raise ValidationError(f"ct must be an hu volume, got {ct.kind.value}")
    if organ_mask.kind != ElementKind.LABEL:
        raise ValidationError(f"organ_mask must be a label volume, got {organ_mask.kind.value}")
    organ_mask.validate_range()
    vols = [ct, organ_mask]
    if vessel_mask is not None:
        if vessel_mask.kind != ElementKind.LABEL:
            raise ValidationError(f"vessel_mask must be a label volume, got {vessel_mask.kind.value}")
        vessel_mask.validate_range()
        vols.append(vessel_mask)
    check_same_grid(*vols)

    inside = organ_mask.data != 0
    shell = boundary_shell(organ_mask, params.boundary_thickness).data != 0
    if vessel_mask is not None:
        vessels = inside & (vessel_mask.data != 0)
    else:
        vessels = inside & (ct.data >= params.vessel_hu_threshold)

    # Equal-width binning with exact integer arithmetic (floor division
    # matches floor() for the negative numerators of sub-hu_low voxels).
    width = params.hu_high - params.hu_low
    num = 4 * (ct.data.astype(np.int64) - params.hu_low)
    soft = np.clip(1 + num // width, 1, 4)

    levels = np.zeros(ct.dims, dtype=np.uint8)
    np.copyto(levels, soft.astype(np.uint8), where=inside)
    levels[shell | vessels] = 0

    return QuantifiedOrgan(
        levels=ct.like(levels, ElementKind.LEVEL),
        simulable=ct.like(inside.astype(np.uint8), ElementKind.LABEL),
    )

"""Map a simulated cell population back into CT intensities.

Growing tumor is a linear blend between the host HU and a Gaussian tumor
texture, weighted by population fraction s/10 — the denser the population,
the darker (more tumor-like) the voxel.  Dead voxels take an independent
necrosis texture.  Healthy voxels pass through bit-exactly.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ValidationError
from .grid import ElementKind, Volume, check_same_grid


@dataclass
class MappingParams:
    """CT rendering parameters.

    Texture means are venous-phase values: tumors are hypo-intense, so
    tumor_hu_mean sits below organ parenchyma, and the necrotic core is
    darker still.  ``mask_threshold`` is the minimum population at which a
    voxel counts as tumor in the exported label (dead voxels always count).
    """

    tumor_hu_mean: int = 60
    tumor_hu_std: float = 15.0
    necrosis_hu_mean: int = 30
    necrosis_hu_std: float = 10.0
    texture_seed: int = 0
    mask_threshold: int = 1

    def __post_init__(self):
        for name in ("tumor_hu_mean", "necrosis_hu_mean"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            setattr(self, name, int(v))
        for name in ("tumor_hu_std", "necrosis_hu_std"):
            try:
                v = float(getattr(self, name))
            except (TypeError, ValueError):
                raise ValidationError(f"{name} must be a number, got {getattr(self, name)!r}") from None
            if not v >= 0.0:
                raise ValidationError(f"{name} must be >= 0, got {v}")
            setattr(self, name, v)
        if isinstance(self.texture_seed, bool) or not isinstance(self.texture_seed, (int, np.integer)):
            raise ValidationError(f"texture_seed must be an integer, got {self.texture_seed!r}")
        self.texture_seed = int(self.texture_seed)
        if isinstance(self.mask_threshold, bool) or not isinstance(self.mask_threshold, (int, np.integer)):
            raise ValidationError(f"mask_threshold must be an integer, got {self.mask_threshold!r}")
        self.mask_threshold = int(self.mask_threshold)
        if not 1 <= self.mask_threshold <= 10:
            raise ValidationError(f"mask_threshold must be in [1, 10], got {self.mask_threshold}")


def generate_texture(
    dims: tuple[int, int, int],
    mean: float,
    std: float,
    seed: int,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> Volume:
    """Per-voxel independent Gaussian texture, deterministic in (dims, seed).

    Each voxel draws via its x-fastest linear index from the same
    counter-hash scheme as the automaton (Box-Muller over two hash
    streams), so textures are reproducible across platforms and worker
    counts.
    """
    nx, ny, nz = dims
    n = nx * ny * nz
    if n <= 0:
        raise ValidationError(f"texture dims must be positive, got {dims}")
    lin = np.arange(n, dtype=np.uint64)
    vals = rng.gaussian_array(seed, lin, float(mean), float(std)).astype(np.float32)
    return Volume(vals.reshape(dims, order="F"), spacing, ElementKind.REAL)


def map_to_ct(ct: Volume, population: Volume, params: MappingParams) -> Volume:
    """Render the population map into the host CT.

    population = 0  -> host HU unchanged (bit-exact)
    population = s  -> round(hu + (s/10) * (T - hu)) for the tumor texture T
    population = -1 -> round(N) for the necrosis texture N
    Output clamped to the signed 16-bit range.
    """
    if ct.kind != ElementKind.HU:
        raise ValidationError(f"ct must be an hu volume, got {ct.kind.value}")
    if population.kind != ElementKind.STATE:
        raise ValidationError(f"population must be a state volume, got {population.kind.value}")
    check_same_grid(ct, population)

    s = population.data
    tumor = s >= 1
    dead = s == -1
    out = ct.data.astype(np.float64)
    if tumor.any():
        tex = generate_texture(ct.dims, params.tumor_hu_mean, params.tumor_hu_std,
                               params.texture_seed, ct.spacing).data
        frac = s[tumor].astype(np.float64) / 10.0
        hu = out[tumor]
        out[tumor] = hu + frac * (tex[tumor].astype(np.float64) - hu)
    if dead.any():
        necro = generate_texture(ct.dims, params.necrosis_hu_mean, params.necrosis_hu_std,
                                 (params.texture_seed + 1) & rng.MASK64, ct.spacing).data
        out[dead] = necro[dead]
    result = np.clip(np.rint(out), -32768, 32767).astype(np.int16)
    return ct.like(result)


def extract_mask(population: Volume, params: MappingParams) -> Volume:
    """Binary label: population >= mask_threshold, or dead (-1)."""
    if population.kind != ElementKind.STATE:
        raise ValidationError(f"population must be a state volume, got {population.kind.value}")
    s = population.data
    label = ((s >= params.mask_threshold) | (s == -1)).astype(np.uint8)
    return population.like(label, ElementKind.LABEL)

"""Shared fixture builders for randomized test instances."""

import numpy as np

from pixel2cancer import quantize
from pixel2cancer.automaton import SimulationParams
from pixel2cancer.grid import ElementKind, Volume


def random_organ(rs: np.random.Generator, dims=(16, 16, 16), spacing=(1.0, 1.0, 1.0)):
    """Random CT + blobby organ mask -> (ct, mask, QuantifiedOrgan).

    The mask is a random box with a few random holes so boundary, interior,
    and non-simulable voxels all occur; HU noise spans all four levels and
    the vessel threshold.
    """
    nx, ny, nz = dims
    hu = rs.normal(120.0, 45.0, size=dims)
    ct = Volume(np.clip(np.rint(hu), -200, 400).astype(np.int16), spacing, ElementKind.HU)

    mask = np.zeros(dims, dtype=np.uint8)
    lo = [int(rs.integers(0, 3)) for _ in range(3)]
    hi = [int(rs.integers(d - 3, d)) + 1 for d in dims]
    mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = 1
    for _ in range(int(rs.integers(0, 3))):  # carve a hole
        cx, cy, cz = (int(rs.integers(0, d)) for d in dims)
        r = int(rs.integers(1, 3))
        mask[max(0, cx - r):cx + r, max(0, cy - r):cy + r, max(0, cz - r):cz + r] = 0
    organ = Volume(mask, spacing, ElementKind.LABEL)

    qp = quantize.QuantizationParams(
        hu_low=int(rs.integers(60, 100)),
        hu_high=int(rs.integers(140, 181)),
        vessel_hu_threshold=int(rs.integers(150, 220)),
        boundary_thickness=int(rs.integers(1, 3)),
    )
    q = quantize.quantize_organ(ct, organ, qp)
    return ct, organ, q


def random_params(rs: np.random.Generator, max_steps=12, **overrides) -> SimulationParams:
    kwargs = dict(
        seed=int(rs.integers(0, 2**63)),
        max_steps=max_steps,
        p_grow=float(rs.uniform(0.3, 1.0)),
        p_invade_by_level=(
            float(rs.uniform(0.3, 0.95)),
            float(rs.uniform(0.2, 0.8)),
            float(rs.uniform(0.1, 0.6)),
        ),
        pressure_threshold_boundary=int(rs.integers(2, 25)),
        pressure_threshold_dense=int(rs.integers(2, 15)),
        p_death=float(rs.uniform(0.0, 0.3)),
    )
    kwargs.update(overrides)
    return SimulationParams(**kwargs)


def uniform_organ(dims=(9, 9, 9), level_hu=120, spacing=(1.0, 1.0, 1.0), margin=0):
    """Fully simulable organ with constant HU (level 3 by default params).

    With margin=0 even border voxels are simulable; the boundary shell
    still makes the outermost mask layer level 0, so tests that need soft
    tissue at specific sites should pass margin >= 1 and stay interior.
    """
    ct = Volume(np.full(dims, level_hu, np.int16), spacing, ElementKind.HU)
    mask = np.zeros(dims, dtype=np.uint8)
    if margin:
        mask[margin:-margin, margin:-margin, margin:-margin] = 1
    else:
        mask[:] = 1
    organ = Volume(mask, spacing, ElementKind.LABEL)
    q = quantize.quantize_organ(ct, organ, quantize.QuantizationParams())
    return ct, organ, q


def make_state(q, pop_array, press_array=None, iteration=0):
    """TumorState from raw arrays on the organ's grid."""
    from pixel2cancer.automaton import TumorState

    pop = Volume(np.asarray(pop_array, dtype=np.int8), q.spacing, ElementKind.STATE)
    if press_array is None:
        press = Volume.zeros(q.dims, q.spacing, ElementKind.PRESSURE)
    else:
        press = Volume(np.asarray(press_array, dtype=np.uint16), q.spacing, ElementKind.PRESSURE)
    return TumorState(population=pop, pressure=press, iteration=iteration)

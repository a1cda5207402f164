"""Volumes, the fixed 26-neighborhood, and boundary shells."""

import itertools

import numpy as np
import pytest

from pixel2cancer.errors import ShapeError, ValidationError
from pixel2cancer.grid import (
    OFFSETS_26,
    ElementKind,
    Volume,
    boundary_shell,
    check_same_grid,
    flat_x_fastest,
    linear_index,
    linear_to_xyz,
    neighborhood26,
)


# --- Volume ---------------------------------------------------------------

def test_volume_dtype_must_match_kind():
    with pytest.raises(ValidationError):
        Volume(np.zeros((2, 2, 2), np.float64), (1, 1, 1), ElementKind.HU)


def test_volume_must_be_3d():
    with pytest.raises(ShapeError):
        Volume(np.zeros((2, 2), np.int16), (1, 1, 1), ElementKind.HU)


@pytest.mark.parametrize("spacing", [(0, 1, 1), (1, -2, 1), (1, 1)])
def test_volume_spacing_must_be_positive_triple(spacing):
    with pytest.raises(ValidationError):
        Volume(np.zeros((2, 2, 2), np.int16), spacing, ElementKind.HU)


def test_volume_range_validation():
    bad = Volume(np.full((2, 2, 2), 9, np.uint8), (1, 1, 1), ElementKind.LEVEL)
    with pytest.raises(ValidationError):
        bad.validate_range()
    ok = Volume(np.full((2, 2, 2), 4, np.uint8), (1, 1, 1), ElementKind.LEVEL)
    ok.validate_range()


def test_element_kind_dtypes():
    assert ElementKind.HU.dtype == np.int16
    assert ElementKind.LABEL.dtype == np.uint8
    assert ElementKind.LEVEL.dtype == np.uint8
    assert ElementKind.STATE.dtype == np.int8
    assert ElementKind.PRESSURE.dtype == np.uint16
    assert ElementKind.REAL.dtype == np.float32


def test_check_same_grid_messages_name_shape_mismatch():
    a = Volume(np.zeros((2, 2, 2), np.int16), (1, 1, 1), ElementKind.HU)
    b = Volume(np.zeros((2, 2, 3), np.int16), (1, 1, 1), ElementKind.HU)
    with pytest.raises(ShapeError, match="shape mismatch"):
        check_same_grid(a, b)
    c = Volume(np.zeros((2, 2, 2), np.int16), (1, 1, 2.0), ElementKind.HU)
    with pytest.raises(ShapeError, match="shape mismatch"):
        check_same_grid(a, c)


def test_voxel_volume():
    v = Volume(np.zeros((2, 2, 2), np.int16), (0.5, 0.7, 1.3), ElementKind.HU)
    assert v.voxel_volume_mm3 == pytest.approx(0.455)


# --- offsets and neighborhoods -------------------------------------------

def test_offsets_are_the_26_nonzero_unit_cube_offsets():
    rows = {tuple(r) for r in OFFSETS_26}
    assert len(OFFSETS_26) == 26
    assert len(rows) == 26
    assert (0, 0, 0) not in rows
    assert rows == {t for t in itertools.product((-1, 0, 1), repeat=3)} - {(0, 0, 0)}


def test_offsets_order_is_lexicographic_in_dz_dy_dx():
    keys = [(dz, dy, dx) for dx, dy, dz in OFFSETS_26]
    assert keys == sorted(keys)


def test_offsets_antisymmetry():
    for k in range(26):
        assert tuple(OFFSETS_26[k]) == tuple(-OFFSETS_26[25 - k])


def test_neighborhood26_interior_has_26_in_fixed_order():
    nbrs = neighborhood26((2, 2, 2), (5, 5, 5))
    assert len(nbrs) == 26
    expected = [(2 + dx, 2 + dy, 2 + dz) for dx, dy, dz in OFFSETS_26]
    assert nbrs == expected


def test_neighborhood26_corner_has_7():
    assert len(neighborhood26((0, 0, 0), (5, 5, 5))) == 7


def test_neighborhood26_face_center_has_17():
    # Brute-force oracle: count in-bounds unit-cube neighbors directly.
    idx, dims = (2, 2, 0), (5, 5, 5)
    expected = [
        (idx[0] + dx, idx[1] + dy, idx[2] + dz)
        for dx, dy, dz in OFFSETS_26
        if 0 <= idx[0] + dx < 5 and 0 <= idx[1] + dy < 5 and 0 <= idx[2] + dz < 5
    ]
    assert len(expected) == 17
    assert neighborhood26(idx, dims) == expected


def test_neighborhood26_rejects_out_of_grid_index():
    with pytest.raises(ShapeError):
        neighborhood26((5, 0, 0), (5, 5, 5))


@pytest.mark.parametrize("idx", [(0, 2, 2), (4, 4, 4), (2, 0, 4), (1, 0, 0)])
def test_neighborhood26_border_lists_keep_offset_order(idx):
    dims = (5, 5, 5)
    expected = [
        (idx[0] + dx, idx[1] + dy, idx[2] + dz)
        for dx, dy, dz in OFFSETS_26
        if 0 <= idx[0] + dx < 5 and 0 <= idx[1] + dy < 5 and 0 <= idx[2] + dz < 5
    ]
    assert neighborhood26(idx, dims) == expected


# --- linear indexing ------------------------------------------------------

def test_linear_index_is_x_fastest():
    dims = (3, 4, 5)
    lin = 0
    for z in range(5):
        for y in range(4):
            for x in range(3):
                assert linear_index(x, y, z, dims) == lin
                assert linear_to_xyz(lin, dims) == (x, y, z)
                lin += 1


def test_flat_x_fastest_matches_linear_index():
    dims = (3, 4, 5)
    data = np.arange(60, dtype=np.int16).reshape(dims)
    flat = flat_x_fastest(data)
    for x, y, z in [(0, 0, 0), (2, 1, 3), (1, 3, 4)]:
        assert flat[linear_index(x, y, z, dims)] == data[x, y, z]


# --- boundary shell -------------------------------------------------------

def _chebyshev_shell_oracle(mask: np.ndarray, thickness: int) -> np.ndarray:
    """Direct definition: mask voxels within Chebyshev distance `thickness`
    of a background (or out-of-grid) voxel."""
    nx, ny, nz = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if not mask[x, y, z]:
                    continue
                near_background = False
                for dx in range(-thickness, thickness + 1):
                    for dy in range(-thickness, thickness + 1):
                        for dz in range(-thickness, thickness + 1):
                            tx, ty, tz = x + dx, y + dy, z + dz
                            if not (0 <= tx < nx and 0 <= ty < ny and 0 <= tz < nz):
                                near_background = True
                            elif not mask[tx, ty, tz]:
                                near_background = True
                out[x, y, z] = near_background
    return out


def test_boundary_shell_of_grid_filling_cube():
    # 5x5x5 solid cube filling the whole grid: everything except the 3x3x3
    # core touches the outside within one step -> 125 - 27 = 98 voxels.
    mask = Volume(np.ones((5, 5, 5), np.uint8), (1, 1, 1), ElementKind.LABEL)
    shell = boundary_shell(mask, 1)
    assert int(shell.data.sum()) == 98
    assert shell.data[2, 2, 2] == 0


def test_boundary_shell_of_embedded_cube():
    m = np.zeros((9, 9, 9), np.uint8)
    m[2:7, 2:7, 2:7] = 1
    shell = boundary_shell(Volume(m, (1, 1, 1), ElementKind.LABEL), 1)
    assert int(shell.data.sum()) == 98


@pytest.mark.parametrize("thickness", [1, 2])
def test_boundary_shell_matches_chebyshev_oracle(thickness):
    rs = np.random.default_rng(2024 + thickness)
    for _ in range(5):
        mask = (rs.random((8, 8, 8)) < 0.6).astype(np.uint8)
        vol = Volume(mask, (1, 1, 1), ElementKind.LABEL)
        got = boundary_shell(vol, thickness).data.astype(bool)
        want = _chebyshev_shell_oracle(mask, thickness)
        assert np.array_equal(got, want)


def test_boundary_shell_validates_inputs():
    hu = Volume(np.zeros((3, 3, 3), np.int16), (1, 1, 1), ElementKind.HU)
    with pytest.raises(ValidationError):
        boundary_shell(hu, 1)
    mask = Volume(np.ones((3, 3, 3), np.uint8), (1, 1, 1), ElementKind.LABEL)
    with pytest.raises(ValidationError):
        boundary_shell(mask, 0)

"""Bit-exact volume serialization and run-configuration loading.

Primary on-disk format is a raw little-endian payload (``<name>.vol``,
x-fastest voxel order) next to a human-readable key-value sidecar
(``<name>.volhdr``) — trivially inspectable and byte-stable.  A minimal
NIfTI-1 subset (single file, magic ``n+1\\0``, datatypes int16/uint8,
little-endian) is provided for interop with standard CT tooling.  Presets
are YAML files mapping onto the parameter dataclasses.
"""

import gzip
import struct
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np
import yaml

from .automaton import SimulationParams
from .errors import CorruptFileError, UnsupportedFormatError, ValidationError
from .grid import ElementKind, Volume
from .mapper import MappingParams
from .quantize import QuantizationParams

_KIND_BY_TAG = {k.value: k for k in ElementKind}

# On-disk little-endian dtypes per element kind.
_DISK_DTYPES = {
    ElementKind.HU: "<i2",
    ElementKind.LABEL: "|u1",
    ElementKind.LEVEL: "|u1",
    ElementKind.STATE: "|i1",
    ElementKind.PRESSURE: "<u2",
    ElementKind.REAL: "<f4",
}


# ---------------------------------------------------------------------------
# raw .vol / .volhdr
# ---------------------------------------------------------------------------

def _sidecar_path(path: Path) -> Path:
    path = Path(path)
    if path.suffix == ".vol":
        return path.with_suffix(".volhdr")
    return Path(str(path) + ".volhdr")


def write_volume(path, volume: Volume) -> None:
    """Write payload + sidecar; write/read round-trips are byte-identical."""
    path = Path(path)
    nx, ny, nz = volume.dims
    sx, sy, sz = volume.spacing
    header = (
        f"dims: {nx} {ny} {nz}\n"
        f"spacing: {sx} {sy} {sz}\n"
        f"kind: {volume.kind.value}\n"
        f"order: little-endian\n"
    )
    payload = volume.data.astype(_DISK_DTYPES[volume.kind], copy=False).tobytes(order="F")
    path.write_bytes(payload)
    _sidecar_path(path).write_text(header)


def read_volume(path) -> Volume:
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not path.exists():
        raise CorruptFileError(f"missing payload file: {path}")
    if not sidecar.exists():
        raise CorruptFileError(f"missing header sidecar: {sidecar}")

    entries = {}
    for ln, line in enumerate(sidecar.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise CorruptFileError(f"{sidecar}:{ln}: expected 'key: value', got {line!r}")
        key, _, value = line.partition(":")
        entries[key.strip()] = value.strip()

    for key in ("dims", "spacing", "kind", "order"):
        if key not in entries:
            raise CorruptFileError(f"{sidecar}: missing header key {key!r}")
    if entries["order"] != "little-endian":
        raise UnsupportedFormatError(f"{sidecar}: unsupported byte order {entries['order']!r}")
    kind = _KIND_BY_TAG.get(entries["kind"])
    if kind is None:
        raise UnsupportedFormatError(f"{sidecar}: unknown element kind {entries['kind']!r}")
    try:
        dims = tuple(int(v) for v in entries["dims"].split())
        spacing = tuple(float(v) for v in entries["spacing"].split())
    except ValueError as exc:
        raise CorruptFileError(f"{sidecar}: malformed dims/spacing: {exc}") from None
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise CorruptFileError(f"{sidecar}: dims must be three positive integers, got {dims}")
    if len(spacing) != 3:
        raise CorruptFileError(f"{sidecar}: spacing must have three entries, got {spacing}")

    dtype = np.dtype(_DISK_DTYPES[kind])
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    payload = path.read_bytes()
    if len(payload) != expected:
        raise CorruptFileError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(payload, dtype=dtype)
    data = flat.reshape(dims, order="F").astype(kind.dtype)  # astype copies -> writable
    return Volume(data, spacing, kind)


# ---------------------------------------------------------------------------
# NIfTI-1 subset
# ---------------------------------------------------------------------------

_NIFTI_MAGIC = b"n+1\x00"
_DT_UINT8 = 2
_DT_INT16 = 4
_NIFTI_DTYPES = {_DT_INT16: ("<i2", ElementKind.HU), _DT_UINT8: ("|u1", ElementKind.LABEL)}
_NIFTI_CODES = {ElementKind.HU: _DT_INT16, ElementKind.LABEL: _DT_UINT8, ElementKind.LEVEL: _DT_UINT8}


def write_nifti(path, volume: Volume) -> None:
    """Single-file uncompressed NIfTI-1; int16 for HU, uint8 for labels/levels."""
    code = _NIFTI_CODES.get(volume.kind)
    if code is None:
        raise UnsupportedFormatError(
            f"{volume.kind.value} volumes have no NIfTI datatype in this subset; use .vol"
        )
    nx, ny, nz = volume.dims
    sx, sy, sz = volume.spacing
    dtype = np.dtype(_NIFTI_DTYPES[code][0])

    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)                      # sizeof_hdr
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)   # dim
    struct.pack_into("<h", hdr, 70, code)                    # datatype
    struct.pack_into("<h", hdr, 72, dtype.itemsize * 8)      # bitpix
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)  # pixdim
    struct.pack_into("<f", hdr, 108, 352.0)                  # vox_offset
    struct.pack_into("<f", hdr, 112, 1.0)                    # scl_slope
    struct.pack_into("<f", hdr, 116, 0.0)                    # scl_inter
    descrip = b"pixel2cancer"
    hdr[148:148 + len(descrip)] = descrip
    struct.pack_into("<h", hdr, 254, 1)                      # sform_code
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, 0.0)     # srow_x
    struct.pack_into("<4f", hdr, 296, 0.0, sy, 0.0, 0.0)     # srow_y
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, 0.0)     # srow_z
    hdr[344:348] = _NIFTI_MAGIC

    payload = volume.data.astype(dtype, copy=False).tobytes(order="F")
    with open(path, "wb") as fh:
        fh.write(bytes(hdr))
        fh.write(b"\x00\x00\x00\x00")                        # no extensions
        fh.write(payload)


def read_nifti(path, kind: ElementKind | None = None) -> Volume:
    """Read a single-file NIfTI-1 volume (gzip transparently accepted).

    ``kind`` overrides the default element kind inferred from the datatype
    (int16 -> hu, uint8 -> label); it must agree with the stored dtype.
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 352:
        raise CorruptFileError(f"{path}: file shorter than a NIfTI-1 header")
    if raw[344:348] != _NIFTI_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {raw[344:348]!r}, expected {_NIFTI_MAGIC!r}")
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != 348:
        if sizeof_hdr == struct.unpack("<i", struct.pack(">i", 348))[0]:
            raise UnsupportedFormatError(f"{path}: big-endian NIfTI is not supported")
        raise CorruptFileError(f"{path}: sizeof_hdr is {sizeof_hdr}, expected 348")

    dim = struct.unpack_from("<8h", raw, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise CorruptFileError(f"{path}: dim[0] is {ndim}, expected 1..7")
    shape = [max(1, d) for d in dim[1:1 + ndim]]
    if any(d != 1 for d in shape[3:]):
        raise UnsupportedFormatError(f"{path}: only 3-D volumes are supported, got dim {shape}")
    dims = tuple(shape[:3] + [1] * (3 - len(shape[:3])))

    (datatype,) = struct.unpack_from("<h", raw, 70)
    if datatype not in _NIFTI_DTYPES:
        raise UnsupportedFormatError(f"{path}: datatype {datatype} not in supported subset (2, 4)")
    disk_dtype, default_kind = _NIFTI_DTYPES[datatype]

    pixdim = struct.unpack_from("<8f", raw, 76)
    spacing = tuple(float(p) for p in pixdim[1:4])
    if any(not (s > 0) for s in spacing):
        raise CorruptFileError(f"{path}: nonpositive pixdim spacing {spacing}")

    (vox_offset_f,) = struct.unpack_from("<f", raw, 108)
    vox_offset = int(vox_offset_f)
    if vox_offset < 348:
        raise CorruptFileError(f"{path}: vox_offset {vox_offset} overlaps the header")
    slope, inter = struct.unpack_from("<2f", raw, 112)
    if slope not in (0.0, 1.0) or inter != 0.0:
        raise UnsupportedFormatError(
            f"{path}: intensity scaling (slope {slope}, inter {inter}) is not supported"
        )

    if kind is None:
        kind = default_kind
    if np.dtype(_DISK_DTYPES[kind]).itemsize != np.dtype(disk_dtype).itemsize or (
        kind.dtype.kind != np.dtype(disk_dtype).kind
    ):
        raise ValidationError(
            f"{path}: stored datatype {datatype} cannot carry {kind.value} voxels"
        )

    dtype = np.dtype(disk_dtype)
    n = dims[0] * dims[1] * dims[2]
    end = vox_offset + n * dtype.itemsize
    if len(raw) < end:
        raise CorruptFileError(f"{path}: payload truncated ({len(raw)} < {end} bytes)")
    flat = np.frombuffer(raw[vox_offset:end], dtype=dtype)
    data = flat.reshape(dims, order="F").astype(kind.dtype)
    return Volume(data, spacing, kind)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

@dataclass
class PresetFile:
    """One organ's fully resolved run configuration."""

    organ: str
    quantization: QuantizationParams
    simulation: SimulationParams
    mapping: MappingParams


_SECTION_TYPES = {
    "quantization": QuantizationParams,
    "simulation": SimulationParams,
    "mapping": MappingParams,
}

# Fields that must be integers; integral YAML floats (e.g. "80.0") are
# accepted and coerced for convenience.
_INT_FIELDS = {
    "hu_low", "hu_high", "vessel_hu_threshold", "boundary_thickness",
    "seed", "max_steps", "pressure_threshold_boundary", "pressure_threshold_dense",
    "tumor_hu_mean", "necrosis_hu_mean", "texture_seed", "mask_threshold",
}


def _coerce(name: str, value):
    if name in _INT_FIELDS and isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, list):
        return tuple(value)
    return value


def _build_section(section: str, raw: dict, warnings: list[str]):
    cls = _SECTION_TYPES[section]
    known = {f.name for f in dataclass_fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            warnings.append(f"{section}.{key}: unknown field ignored")
            continue
        kwargs[key] = _coerce(key, value)
    defaults = cls()
    for name in sorted(known - set(kwargs)):
        warnings.append(f"{section}.{name}: missing, using default {getattr(defaults, name)!r}")
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{section}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{section}: malformed field ({exc})") from None


def load_preset(path) -> tuple[PresetFile, list[str]]:
    """Parse a preset; returns the resolved preset and a warning record.

    Missing fields fall back to the engine defaults (each fallback adds a
    warning); out-of-range values raise a validation error naming the
    field.  Key order in the file is irrelevant.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid preset syntax: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: preset must be a mapping of sections, got {type(raw).__name__}")

    warnings: list[str] = []
    organ = raw.get("organ")
    if organ is None:
        organ = "unknown"
        warnings.append("organ: missing, using 'unknown'")
    elif not isinstance(organ, str):
        raise ValidationError(f"organ: must be a string, got {organ!r}")

    sections = {}
    for section in _SECTION_TYPES:
        body = raw.get(section)
        if body is None:
            body = {}
            warnings.append(f"{section}: section missing, using all defaults")
        elif not isinstance(body, dict):
            raise ValidationError(f"{section}: must be a mapping, got {type(body).__name__}")
        sections[section] = _build_section(section, body, warnings)

    for key in raw:
        if key not in _SECTION_TYPES and key != "organ":
            warnings.append(f"{key}: unknown section ignored")

    preset = PresetFile(
        organ=organ,
        quantization=sections["quantization"],
        simulation=sections["simulation"],
        mapping=sections["mapping"],
    )
    return preset, warnings

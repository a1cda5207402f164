"""pixel2cancer: cellular-automaton tumor synthesis in CT volumes.

The pipeline quantizes an organ (CT intensities + masks -> discrete tissue
levels), grows a tumor with a stochastic cellular automaton on the voxel
grid, and maps the final cell population back to Hounsfield units so the
tumor blends into the source scan.  All randomness is counter-based, so
results are bit-identical for a given seed regardless of worker count.
"""

import os as _os

# The parallel step kernel must be able to run with up to 8 workers even on
# hosts with fewer cores (worker count is part of the determinism contract,
# not a performance hint).  Numba fixes its thread pool size from this
# variable at import time, so it has to be set before numba is imported
# anywhere in the process.  An explicit user setting always wins.
_os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, _os.cpu_count() or 1)))
# Prefer OpenMP, fall back to the built-in pool; skipping TBB avoids a
# version-compatibility warning and changes nothing about results.
_os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

from .errors import (  # noqa: E402
    CorruptFileError,
    DeterminismError,
    EmptyOrganError,
    EmptyTumorError,
    Pixel2CancerError,
    ShapeError,
    UnsupportedFormatError,
    ValidationError,
)
from .grid import ElementKind, Volume, boundary_shell, neighborhood26  # noqa: E402
from .quantize import QuantifiedOrgan, QuantizationParams, quantize_organ  # noqa: E402
from .automaton import (  # noqa: E402
    SimulationParams,
    TumorState,
    seed_tumor,
    set_worker_count,
    simulate,
    step,
    step_reference,
)
from .mapper import MappingParams, extract_mask, generate_texture, map_to_ct  # noqa: E402
from .analysis import TumorStats, compute_stats, growth_curve  # noqa: E402
from .io import PresetFile, load_preset, read_nifti, read_volume, write_nifti, write_volume  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "CorruptFileError",
    "DeterminismError",
    "ElementKind",
    "EmptyOrganError",
    "EmptyTumorError",
    "MappingParams",
    "Pixel2CancerError",
    "PresetFile",
    "QuantifiedOrgan",
    "QuantizationParams",
    "ShapeError",
    "SimulationParams",
    "TumorState",
    "TumorStats",
    "UnsupportedFormatError",
    "ValidationError",
    "Volume",
    "boundary_shell",
    "compute_stats",
    "extract_mask",
    "generate_texture",
    "growth_curve",
    "load_preset",
    "map_to_ct",
    "neighborhood26",
    "quantize_organ",
    "read_nifti",
    "read_volume",
    "seed_tumor",
    "set_worker_count",
    "simulate",
    "step",
    "step_reference",
    "write_nifti",
    "write_volume",
    "__version__",
]

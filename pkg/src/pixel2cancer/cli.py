"""Command-line pipeline: quantize -> simulate -> map -> analyze.

Commands
    quantize   CT + organ mask -> level volume + simulable mask
    synth      full pipeline -> synthetic CT, tumor mask, population maps
    stats      statistics of a finished run (stdout and optional CSV)
    bench      synthetic-workload scaling benchmark across worker counts

Every command is deterministic given its inputs and seed; worker count
(--threads, env PIXEL2CANCER_THREADS, default: host parallelism) never
changes results.  Exit codes: 0 success, 2 invalid input, 3 empty organ,
4 empty tumor, 5 internal determinism violation.
"""

import argparse
import os
import sys
import time
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analysis, automaton, io, mapper, quantize
from .errors import (
    CorruptFileError,
    DeterminismError,
    EmptyOrganError,
    EmptyTumorError,
    Pixel2CancerError,
    ShapeError,
    UnsupportedFormatError,
    ValidationError,
)
from .grid import ElementKind, Volume
from . import rng

_NIFTI_SUFFIXES = (".nii", ".nii.gz")


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _is_nifti(path: Path) -> bool:
    name = path.name.lower()
    return any(name.endswith(s) for s in _NIFTI_SUFFIXES)


def _read_input(path, kind: ElementKind) -> Volume:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    if _is_nifti(path):
        return io.read_nifti(path, kind)
    return io.read_volume(path)


def _packaged_presets() -> dict[str, Path]:
    root = resources.files("pixel2cancer") / "presets"
    return {p.name[: -len(".yaml")]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml")}


def _resolve_preset(ref: str) -> tuple[str, Path]:
    """Accept a packaged preset name (liver/pancreas/kidney) or a file path."""
    p = Path(ref)
    if p.suffix in (".yaml", ".yml") or os.sep in ref or p.exists():
        if not p.exists():
            raise ValidationError(f"preset file not found: {p}")
        return (p.stem, p)
    shipped = _packaged_presets()
    if ref in shipped:
        return (ref, shipped[ref])
    raise ValidationError(
        f"unknown preset {ref!r}; shipped presets: {', '.join(sorted(shipped))} "
        "(or pass a .yaml path)"
    )


def _load_preset(ref: str) -> tuple[str, Path, io.PresetFile]:
    name, path = _resolve_preset(ref)
    preset, warnings = io.load_preset(path)
    for w in warnings:
        _warn(f"preset {path}: {w}")
    return name, path, preset


def _resolve_threads(args) -> tuple[int, int]:
    """(requested, effective) worker count from flag, env, or host default."""
    requested = getattr(args, "threads", None)
    if requested is None:
        env = os.environ.get("PIXEL2CANCER_THREADS")
        if env is not None:
            try:
                requested = int(env)
            except ValueError:
                raise ValidationError(
                    f"PIXEL2CANCER_THREADS must be an integer, got {env!r}"
                ) from None
    if requested is None:
        requested = os.cpu_count() or 1
    effective = automaton.set_worker_count(requested)
    if effective != requested:
        _warn(f"requested {requested} workers, running with {effective}")
    return requested, effective


def _plain(obj):
    """Recursively convert to YAML-safe plain types."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _write_manifest(out_dir: Path, manifest: dict) -> Path:
    """Atomic write: the manifest appears only after a successful run."""
    target = out_dir / "manifest.yaml"
    tmp = out_dir / "manifest.yaml.tmp"
    tmp.write_text(yaml.safe_dump(_plain(manifest), sort_keys=True))
    os.replace(tmp, target)
    return target


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_quantize(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings = {}

    t0 = time.perf_counter()
    ct = _read_input(args.ct, ElementKind.HU)
    organ_mask = _read_input(args.organ_mask, ElementKind.LABEL)
    vessel_mask = _read_input(args.vessel_mask, ElementKind.LABEL) if args.vessel_mask else None
    preset_name, preset_path, preset = _load_preset(args.preset)
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    q = quantize.quantize_organ(ct, organ_mask, preset.quantization, vessel_mask)
    timings["quantize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    outputs = {
        "levels": out_dir / "levels.vol",
        "levels_nifti": out_dir / "levels.nii",
        "simulable": out_dir / "simulable.vol",
        "simulable_nifti": out_dir / "simulable.nii",
    }
    io.write_volume(outputs["levels"], q.levels)
    io.write_nifti(outputs["levels_nifti"], q.levels)
    io.write_volume(outputs["simulable"], q.simulable)
    io.write_nifti(outputs["simulable_nifti"], q.simulable)
    timings["write"] = time.perf_counter() - t0

    manifest = {
        "command": "quantize",
        "engine_version": __version__,
        "inputs": {
            "ct": str(Path(args.ct).resolve()),
            "organ_mask": str(Path(args.organ_mask).resolve()),
            "vessel_mask": str(Path(args.vessel_mask).resolve()) if args.vessel_mask else None,
        },
        "preset": {"name": preset_name, "path": str(preset_path.resolve())},
        "params": {"quantization": asdict(preset.quantization)},
        "outputs": {k: str(v.resolve()) for k, v in outputs.items()},
        "timings_s": timings,
    }
    _write_manifest(out_dir, manifest)
    print(f"quantized {args.ct}: levels + simulable written to {out_dir}")
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    requested, effective = _resolve_threads(args)
    timings = {}

    t0 = time.perf_counter()
    ct = _read_input(args.ct, ElementKind.HU)
    organ_mask = _read_input(args.organ_mask, ElementKind.LABEL)
    vessel_mask = _read_input(args.vessel_mask, ElementKind.LABEL) if args.vessel_mask else None
    preset_name, preset_path, preset = _load_preset(args.preset)
    timings["load"] = time.perf_counter() - t0

    # The run seed drives both the simulation and the texture streams.
    sim = replace(preset.simulation, seed=args.seed)
    if args.steps is not None:
        if args.steps < 1:
            raise ValidationError(f"--steps must be >= 1, got {args.steps}")
        sim = replace(sim, max_steps=args.steps)
    if args.snapshots is not None:
        sim = replace(sim, snapshot_steps=tuple(_parse_int_list(args.snapshots, "--snapshots")))
    mapping = replace(preset.mapping, texture_seed=args.seed)

    t0 = time.perf_counter()
    q = quantize.quantize_organ(ct, organ_mask, preset.quantization, vessel_mask)
    timings["quantize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final, snapshots = automaton.simulate(q, sim, n_seeds=args.n_seeds)
    timings["simulate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    synthetic = mapper.map_to_ct(ct, final.population, mapping)
    tumor_mask = mapper.extract_mask(final.population, mapping)
    timings["map"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    outputs = {
        "synthetic_ct": out_dir / "synthetic_ct.vol",
        "synthetic_ct_nifti": out_dir / "synthetic_ct.nii",
        "tumor_mask": out_dir / "tumor_mask.vol",
        "tumor_mask_nifti": out_dir / "tumor_mask.nii",
        "population": out_dir / "population.vol",
    }
    io.write_volume(outputs["synthetic_ct"], synthetic)
    io.write_nifti(outputs["synthetic_ct_nifti"], synthetic)
    io.write_volume(outputs["tumor_mask"], tumor_mask)
    io.write_nifti(outputs["tumor_mask_nifti"], tumor_mask)
    io.write_volume(outputs["population"], final.population)
    snapshot_paths = []
    for snap in snapshots:
        p = out_dir / f"snapshot_{snap.iteration:04d}.vol"
        io.write_volume(p, snap.population)
        snapshot_paths.append(p)
    stats = analysis.compute_stats(final.population, synthetic)
    stats_path = out_dir / "stats.txt"
    stats_path.write_text(stats.text() + "\n")
    timings["write"] = time.perf_counter() - t0

    manifest = {
        "command": "synth",
        "engine_version": __version__,
        "inputs": {
            "ct": str(Path(args.ct).resolve()),
            "organ_mask": str(Path(args.organ_mask).resolve()),
            "vessel_mask": str(Path(args.vessel_mask).resolve()) if args.vessel_mask else None,
        },
        "preset": {"name": preset_name, "path": str(preset_path.resolve())},
        "seed": args.seed,
        "n_seeds": args.n_seeds,
        "threads": {"requested": requested, "effective": effective},
        "params": {
            "quantization": asdict(preset.quantization),
            "simulation": asdict(sim),
            "mapping": asdict(mapping),
        },
        "outputs": {
            **{k: str(v.resolve()) for k, v in outputs.items()},
            "snapshots": [str(p.resolve()) for p in snapshot_paths],
            "stats": str(stats_path.resolve()),
        },
        "timings_s": timings,
    }
    _write_manifest(out_dir, manifest)
    print(f"synthesized tumor (seed {args.seed}, {sim.max_steps} steps) into {out_dir}")
    print(stats.text())
    return 0


def cmd_stats(args) -> int:
    population = _read_input(args.population, ElementKind.STATE)
    synthetic = _read_input(args.synthetic_ct, ElementKind.HU)
    stats = analysis.compute_stats(population, synthetic)
    print(stats.text())
    if args.csv:
        csv_path = Path(args.csv)
        new_file = not csv_path.exists() or csv_path.stat().st_size == 0
        with open(csv_path, "a") as fh:
            if new_file:
                fh.write(analysis.TumorStats.CSV_HEADER + "\n")
            fh.write(stats.csv_row() + "\n")
    return 0


def _bench_workload(size: int, steps: int, seed: int):
    """Deterministic synthetic organ: noisy parenchyma, sprinkled vessels."""
    dims = (size, size, size)
    n = size ** 3
    u = rng.uniform_array(seed, np.arange(n, dtype=np.uint64), 0, rng.TAG_BENCH_LEVEL)
    hu = (80.0 + u * 120.0).astype(np.int16).reshape(dims, order="F")
    ct = Volume(np.ascontiguousarray(hu), (1.0, 1.0, 1.0), ElementKind.HU)
    mask = np.zeros(dims, dtype=np.uint8)
    mask[1:-1, 1:-1, 1:-1] = 1
    organ = Volume(mask, (1.0, 1.0, 1.0), ElementKind.LABEL)
    qp = quantize.QuantizationParams(hu_low=80, hu_high=160, vessel_hu_threshold=190,
                                     boundary_thickness=1)
    q = quantize.quantize_organ(ct, organ, qp)
    params = automaton.SimulationParams(
        seed=seed, max_steps=steps, p_grow=0.7, p_invade_by_level=(0.5, 0.35, 0.25),
        pressure_threshold_boundary=30, pressure_threshold_dense=20, p_death=0.05,
    )
    n_seeds = max(1, n // 4096)
    return q, params, n_seeds


def cmd_bench(args) -> int:
    if args.size < 8:
        raise ValidationError(f"--size must be >= 8, got {args.size}")
    if args.steps < 1:
        raise ValidationError(f"--steps must be >= 1, got {args.steps}")
    counts = _parse_int_list(args.threads, "--threads")
    if not counts or any(c < 1 for c in counts):
        raise ValidationError(f"--threads expects positive integers, got {args.threads!r}")

    q, params, n_seeds = _bench_workload(args.size, args.steps, args.seed)
    print(f"bench: {args.size}^3 volume, {args.steps} steps, {n_seeds} seeds, "
          f"thread counts {counts}")

    # Equality pass: identical output bits at every thread count, checked
    # before any timing is reported.
    reference = None
    for c in counts:
        automaton.set_worker_count(c)
        final, _ = automaton.simulate(q, params, n_seeds=n_seeds)
        result = (final.population.data, final.pressure.data)
        if reference is None:
            reference = result
        elif not (
            np.array_equal(reference[0], result[0]) and np.array_equal(reference[1], result[1])
        ):
            raise DeterminismError(
                f"bench outputs differ between {counts[0]} and {c} workers"
            )
    print("equality check: identical outputs at all thread counts")

    times = {}
    for c in counts:
        automaton.set_worker_count(c)
        t0 = time.perf_counter()
        automaton.simulate(q, params, n_seeds=n_seeds)
        times[c] = time.perf_counter() - t0
    base = times.get(1, times[counts[0]])
    for c in counts:
        dt = times[c]
        print(f"threads={c} time_s={dt:.3f} steps_per_s={args.steps / dt:.2f} "
              f"speedup={base / dt:.2f}")
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixel2cancer",
        description="Synthesize tumors in CT volumes with a deterministic cellular automaton.",
    )
    parser.add_argument("--version", action="version", version=f"pixel2cancer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    pq = sub.add_parser("quantize", help="quantize an organ into hardness levels")
    pq.add_argument("--ct", required=True, help="CT volume (.vol or .nii[.gz])")
    pq.add_argument("--organ-mask", required=True, help="binary organ mask volume")
    pq.add_argument("--vessel-mask", help="optional binary vessel mask (overrides HU threshold)")
    pq.add_argument("--preset", required=True, help="preset name (liver/pancreas/kidney) or path")
    pq.add_argument("--out-dir", required=True, help="output directory")
    pq.set_defaults(func=cmd_quantize)

    ps = sub.add_parser("synth", help="synthesize a tumor end to end")
    ps.add_argument("--ct", required=True, help="CT volume (.vol or .nii[.gz])")
    ps.add_argument("--organ-mask", required=True, help="binary organ mask volume")
    ps.add_argument("--vessel-mask", help="optional binary vessel mask (overrides HU threshold)")
    ps.add_argument("--preset", required=True, help="preset name (liver/pancreas/kidney) or path")
    ps.add_argument("--seed", required=True, type=int,
                    help="run seed; drives simulation and textures")
    ps.add_argument("--steps", type=int, help="override preset max_steps")
    ps.add_argument("--snapshots", help="comma-separated iteration indices to export")
    ps.add_argument("--n-seeds", type=int, default=1, help="number of initial tumor cells")
    ps.add_argument("--threads", type=int, help="worker count (default: host parallelism)")
    ps.add_argument("--out-dir", required=True, help="output directory")
    ps.set_defaults(func=cmd_synth)

    pt = sub.add_parser("stats", help="statistics of a generated tumor")
    pt.add_argument("--population", required=True, help="population map (.vol)")
    pt.add_argument("--synthetic-ct", required=True, help="synthetic CT (.vol or .nii[.gz])")
    pt.add_argument("--csv", help="append a CSV row to this file")
    pt.set_defaults(func=cmd_stats)

    pb = sub.add_parser("bench", help="scaling benchmark on a synthetic organ")
    pb.add_argument("--size", type=int, default=256, help="cubic volume edge length")
    pb.add_argument("--steps", type=int, default=50, help="simulation steps")
    pb.add_argument("--threads", default="1", help="comma-separated worker counts")
    pb.add_argument("--seed", type=int, default=0, help="workload seed")
    pb.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EmptyOrganError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EmptyTumorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DeterminismError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (ValidationError, CorruptFileError, UnsupportedFormatError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Pixel2CancerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()

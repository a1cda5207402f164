"""Stochastic cellular automaton for tumor growth.

State per voxel: a population count in -1..10 (0 healthy, 1..10 growing
tumor, -1 dead/necrotic) plus an invasion-pressure counter used against
hard targets (levels 0 and 4).  One synchronous step applies three rules,
all reading the previous state only:

R1 growth:   0 < pop(v) < 10 -> with probability p_grow, pop(v) += 1.
R2 invasion: pop(v) >= 1 picks one neighbor t uniformly among its in-bounds
             26-neighbors.  If t is simulable and pop(t) not in {10, -1}:
             soft t (level 1..3) is invaded with probability
             (pop(v) / 10.0) * p_invade_by_level[level(t)] (pop(t) += 1);
             hard t (level 0 or 4) is only pressured, and only by full
             sources (pop(v) = 10): pressure(t) += 1, and when the summed
             pressure reaches the level's threshold, pop(t) += 1 and the
             pressure resets to 0.
R3 death:    pop(v) = 10, v has a full 26-neighborhood (not at the grid
             border) all of whose members are in {10, -1} -> with
             probability p_death, pop(v) = -1 (absorbing).

Merge semantics for simultaneous events at one voxel are fixed so the
result is independent of evaluation order: however many invaders hit one
target in a step, invasion advances it by at most 1; pressure
contributions are summed before the single threshold test (overshoot is
absorbed by the reset); growth and invasion can stack, clamped at 10;
death wins at its voxel (it excludes increments by the rule guards).
Pressure is cleared whenever a voxel reaches population 10 or dies, so
stored pressure only ever belongs to uninvaded hard targets.

Every random decision is a counter hash of (seed, voxel, iteration,
purpose) — see :mod:`pixel2cancer.rng` — which makes a step a pure
function of the previous state.  ``step`` runs a two-phase parallel
kernel (decide per source, then gather per target) whose output is
bit-identical for any worker count; ``step_reference`` is an
independently written sequential scatter implementation of the same
contract, kept as the equivalence oracle.
"""

import os
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from . import rng
from .errors import EmptyOrganError, ValidationError
from .grid import OFFSETS_26, ElementKind, Volume, check_same_grid, linear_to_xyz
from .quantize import QuantifiedOrgan


@dataclass
class SimulationParams:
    """Rule probabilities, thresholds, and budget for one simulation run.

    All values are engine defaults unless a preset overrides them; see the
    shipped preset files for per-organ choices.
    """

    seed: int = 0
    max_steps: int = 100
    p_grow: float = 0.6
    p_invade_by_level: tuple[float, float, float] = (0.5, 0.35, 0.2)
    pressure_threshold_boundary: int = 40
    pressure_threshold_dense: int = 25
    p_death: float = 0.02
    snapshot_steps: tuple[int, ...] = ()

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        self.seed = int(self.seed)
        if not isinstance(self.max_steps, (int, np.integer)) or isinstance(self.max_steps, bool):
            raise ValidationError(f"max_steps must be an integer, got {self.max_steps!r}")
        self.max_steps = int(self.max_steps)
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")
        for name in ("p_grow", "p_death"):
            try:
                v = float(getattr(self, name))
            except (TypeError, ValueError):
                raise ValidationError(
                    f"{name} must be a probability, got {getattr(self, name)!r}"
                ) from None
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {v}")
            setattr(self, name, v)
        try:
            inv = tuple(float(v) for v in self.p_invade_by_level)
        except (TypeError, ValueError):
            raise ValidationError(
                f"p_invade_by_level must be three probabilities, got {self.p_invade_by_level!r}"
            ) from None
        if len(inv) != 3:
            raise ValidationError(
                f"p_invade_by_level must have exactly 3 entries (levels 1..3), got {len(inv)}"
            )
        for i, v in enumerate(inv):
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"p_invade_by_level[{i}] must be in [0, 1], got {v}")
        self.p_invade_by_level = inv
        for name in ("pressure_threshold_boundary", "pressure_threshold_dense"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            v = int(v)
            # Upper bound keeps accumulated pressure well inside uint16.
            if not 1 <= v <= 60000:
                raise ValidationError(f"{name} must be in [1, 60000], got {v}")
            setattr(self, name, v)
        try:
            snaps = tuple(sorted({int(s) for s in self.snapshot_steps}))
        except (TypeError, ValueError):
            raise ValidationError(
                f"snapshot_steps must be a list of integers, got {self.snapshot_steps!r}"
            ) from None
        if snaps and snaps[0] < 0:
            raise ValidationError(f"snapshot_steps must be >= 0, got {snaps[0]}")
        self.snapshot_steps = snaps


@dataclass
class TumorState:
    """Synchronous CA state: population map, pressure map, step counter."""

    population: Volume
    pressure: Volume
    iteration: int = 0

    def __post_init__(self):
        if self.population.kind != ElementKind.STATE:
            raise ValidationError(
                f"population must be a state volume, got {self.population.kind.value}"
            )
        if self.pressure.kind != ElementKind.PRESSURE:
            raise ValidationError(
                f"pressure must be a pressure volume, got {self.pressure.kind.value}"
            )
        check_same_grid(self.population, self.pressure)
        if self.iteration < 0:
            raise ValidationError(f"iteration must be >= 0, got {self.iteration}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.population.dims

    def copy(self) -> "TumorState":
        return TumorState(self.population.copy(), self.pressure.copy(), self.iteration)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

_C1 = np.uint64(rng.MIX_C1)
_C2 = np.uint64(rng.MIX_C2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0 ** -53

_TG_GROW = np.uint64(rng.TAG_GROW)
_TG_DIR = np.uint64(rng.TAG_DIR)
_TG_INVADE = np.uint64(rng.TAG_INVADE)
_TG_DEATH = np.uint64(rng.TAG_DEATH)

# Attempt codes written by the decision pass: ATT_NONE, or the offset index
# k of the chosen target (0..25 = soft invasion roll succeeded,
# ATT_HARD + k = pressure attempt by a full source).
ATT_NONE = np.int8(-1)
ATT_HARD = 32


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@njit(inline="always")
def _udraw(base2, tag):
    return np.float64(_mix(base2 ^ tag) >> _S11) * _INV53


@njit(parallel=True, cache=True)
def _decide_kernel(pop, levels, simulable, offs, seed_g, it_u,
                   p_grow, p_inv1, p_inv2, p_inv3, p_death,
                   x0, x1, y0, y1, z0, z1, grow, die, att):
    """Pass 1: per-source decisions, written only at the source voxel."""
    nx, ny, nz = pop.shape
    for x in prange(x0, x1):
        for y in range(y0, y1):
            for z in range(z0, z1):
                p = pop[x, y, z]
                if p <= 0:  # healthy and dead voxels take no actions
                    continue
                lin = np.uint64(x + nx * (y + ny * z))
                base2 = _mix(_mix(seed_g ^ lin) ^ it_u)
                interior = 0 < x < nx - 1 and 0 < y < ny - 1 and 0 < z < nz - 1

                if p < 10:
                    if _udraw(base2, _TG_GROW) < p_grow:
                        grow[x, y, z] = 1
                elif interior:
                    crowded = True
                    for k in range(26):
                        q = pop[x + offs[k, 0], y + offs[k, 1], z + offs[k, 2]]
                        if q != 10 and q != -1:
                            crowded = False
                            break
                    if crowded and _udraw(base2, _TG_DEATH) < p_death:
                        die[x, y, z] = 1

                # Invasion: uniform choice among in-bounds neighbors.
                if interior:
                    m = 26
                else:
                    m = 0
                    for k in range(26):
                        tx = x + offs[k, 0]
                        ty = y + offs[k, 1]
                        tz = z + offs[k, 2]
                        if 0 <= tx < nx and 0 <= ty < ny and 0 <= tz < nz:
                            m += 1
                if m == 0:  # degenerate 1-voxel-wide grids
                    continue
                j = int(_udraw(base2, _TG_DIR) * m)
                if j >= m:
                    j = m - 1
                if interior:
                    k_sel = j
                else:
                    k_sel = -1
                    seen = 0
                    for k in range(26):
                        tx = x + offs[k, 0]
                        ty = y + offs[k, 1]
                        tz = z + offs[k, 2]
                        if 0 <= tx < nx and 0 <= ty < ny and 0 <= tz < nz:
                            if seen == j:
                                k_sel = k
                                break
                            seen += 1
                tx = x + offs[k_sel, 0]
                ty = y + offs[k_sel, 1]
                tz = z + offs[k_sel, 2]
                tp = pop[tx, ty, tz]
                if simulable[tx, ty, tz] == 0 or tp == 10 or tp == -1:
                    continue
                lv = levels[tx, ty, tz]
                if lv == 1 or lv == 2 or lv == 3:
                    if lv == 1:
                        p_inv = p_inv1
                    elif lv == 2:
                        p_inv = p_inv2
                    else:
                        p_inv = p_inv3
                    if _udraw(base2, _TG_INVADE) < (p / 10.0) * p_inv:
                        att[x, y, z] = np.int8(k_sel)
                elif p == 10:
                    att[x, y, z] = np.int8(ATT_HARD + k_sel)


@njit(parallel=True, cache=True)
def _merge_kernel(pop, press, levels, offs, thr_boundary, thr_dense,
                  x0, x1, y0, y1, z0, z1, grow, die, att, new_pop, new_press):
    """Pass 2: per-target gather of attempts plus local rule results.

    A source's attempt at offset k lands on the target whose reverse offset
    index is 25 - k (the offset table is antisymmetric), so each target can
    collect every attempt aimed at it by scanning its own neighbors.
    """
    nx, ny, nz = pop.shape
    for x in prange(x0, x1):
        for y in range(y0, y1):
            for z in range(z0, z1):
                p = pop[x, y, z]
                if p == -1:
                    continue  # absorbing; buffers carry the old values
                if p == 10:
                    if die[x, y, z] == 1:
                        new_pop[x, y, z] = -1
                    continue  # full voxels cannot be targeted

                inc = 0  # invasion advances a target by at most 1 per step
                padds = 0
                for k in range(26):
                    sx = x + offs[k, 0]
                    sy = y + offs[k, 1]
                    sz = z + offs[k, 2]
                    if 0 <= sx < nx and 0 <= sy < ny and 0 <= sz < nz:
                        c = att[sx, sy, sz]
                        if c >= 0:
                            back = 25 - k
                            if c == back:
                                inc = 1
                            elif c == ATT_HARD + back:
                                padds += 1

                pr = new_press[x, y, z]
                if padds > 0:
                    tot = int(pr) + padds
                    thr = thr_boundary if levels[x, y, z] == 0 else thr_dense
                    if tot >= thr:
                        inc = 1
                        tot = 0
                    if tot > 65535:
                        tot = 65535
                    pr = np.uint16(tot)

                total = int(p) + inc
                if grow[x, y, z] == 1:
                    total += 1
                if total > 10:
                    total = 10
                if total == 10:
                    pr = np.uint16(0)
                new_pop[x, y, z] = np.int8(total)
                new_press[x, y, z] = pr


@njit(cache=True)
def _reference_kernel(pop, press, levels, simulable, seed_g, it_u,
                      p_grow, p_inv1, p_inv2, p_inv3,
                      thr_boundary, thr_dense, p_death,
                      new_pop, new_press):
    """Sequential scatter-style implementation of one step (the oracle).

    Full-grid sweep, no active-region optimization, neighbor enumeration by
    direct (dz, dy, dx) loops: deliberately a different code shape from the
    parallel gather kernels while implementing the same update contract.
    """
    nx, ny, nz = pop.shape
    soft_hits = np.zeros((nx, ny, nz), dtype=np.int32)
    press_adds = np.zeros((nx, ny, nz), dtype=np.int32)
    grew = np.zeros((nx, ny, nz), dtype=np.uint8)
    died = np.zeros((nx, ny, nz), dtype=np.uint8)

    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                p = pop[x, y, z]
                if p <= 0:
                    continue
                base2 = _mix(_mix(seed_g ^ np.uint64(x + nx * (y + ny * z))) ^ it_u)

                # R1 growth
                if 0 < p < 10 and _udraw(base2, _TG_GROW) < p_grow:
                    grew[x, y, z] = 1

                # R3 death: full neighborhood required, everyone 10 or dead
                if p == 10 and 0 < x < nx - 1 and 0 < y < ny - 1 and 0 < z < nz - 1:
                    crowded = True
                    for dz in range(-1, 2):
                        for dy in range(-1, 2):
                            for dx in range(-1, 2):
                                if dx == 0 and dy == 0 and dz == 0:
                                    continue
                                q = pop[x + dx, y + dy, z + dz]
                                if q != 10 and q != -1:
                                    crowded = False
                    if crowded and _udraw(base2, _TG_DEATH) < p_death:
                        died[x, y, z] = 1

                # R2 invasion: uniform in-bounds neighbor pick in the fixed
                # (dz, dy, dx)-ascending offset order
                m = 0
                for dz in range(-1, 2):
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            if dx == 0 and dy == 0 and dz == 0:
                                continue
                            if 0 <= x + dx < nx and 0 <= y + dy < ny and 0 <= z + dz < nz:
                                m += 1
                if m == 0:
                    continue
                j = int(_udraw(base2, _TG_DIR) * m)
                if j >= m:
                    j = m - 1
                tx = ty = tz = -1
                seen = 0
                for dz in range(-1, 2):
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            if dx == 0 and dy == 0 and dz == 0:
                                continue
                            if 0 <= x + dx < nx and 0 <= y + dy < ny and 0 <= z + dz < nz:
                                if seen == j and tx == -1:
                                    tx = x + dx
                                    ty = y + dy
                                    tz = z + dz
                                seen += 1
                tp = pop[tx, ty, tz]
                if simulable[tx, ty, tz] == 0 or tp == 10 or tp == -1:
                    continue
                lv = levels[tx, ty, tz]
                if 1 <= lv <= 3:
                    if lv == 1:
                        p_inv = p_inv1
                    elif lv == 2:
                        p_inv = p_inv2
                    else:
                        p_inv = p_inv3
                    if _udraw(base2, _TG_INVADE) < (p / 10.0) * p_inv:
                        soft_hits[tx, ty, tz] += 1
                elif p == 10:
                    press_adds[tx, ty, tz] += 1

    # Merge under the documented simultaneous-event semantics.
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                p = pop[x, y, z]
                if p == -1:
                    continue
                if p == 10:
                    if died[x, y, z] == 1:
                        new_pop[x, y, z] = -1
                    continue
                inc = 1 if soft_hits[x, y, z] > 0 else 0
                pr = int(press[x, y, z])
                if press_adds[x, y, z] > 0:
                    pr += press_adds[x, y, z]
                    thr = thr_boundary if levels[x, y, z] == 0 else thr_dense
                    if pr >= thr:
                        inc = 1
                        pr = 0
                    if pr > 65535:
                        pr = 65535
                total = int(p) + int(grew[x, y, z]) + inc
                if total > 10:
                    total = 10
                if total == 10:
                    pr = 0
                new_pop[x, y, z] = np.int8(total)
                new_press[x, y, z] = np.uint16(pr)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

_OFFS = np.ascontiguousarray(OFFSETS_26)


def set_worker_count(n: int) -> int:
    """Set the parallel worker count; returns the effective value.

    Requests are clamped to [1, numba's thread-pool size].  The result of
    every operation in this module is independent of this setting.
    """
    if n < 1:
        raise ValidationError(f"worker count must be >= 1, got {n}")
    effective = min(int(n), numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(effective)
    return effective


def get_worker_count() -> int:
    return numba.get_num_threads()


# Default to the host's real parallelism; the inflated thread-pool size
# exists only so explicit requests up to 8 workers always succeed.
set_worker_count(max(1, min(os.cpu_count() or 1, numba.config.NUMBA_NUM_THREADS)))


def seed_tumor(q: QuantifiedOrgan, seed: int, n_seeds: int = 1) -> TumorState:
    """Place ``n_seeds`` population-1 cells at deterministic organ sites.

    Eligible sites are voxels with level > 0 (soft or dense parenchyma, not
    vessels/boundaries).  Sites are ranked by their counter hash and the
    ``n_seeds`` smallest win, so placement is a pure function of ``seed``
    and scattered roughly uniformly over the organ.
    """
    if n_seeds < 1:
        raise ValidationError(f"n_seeds must be >= 1, got {n_seeds}")
    levels = q.levels.data
    eligible = np.flatnonzero(levels.ravel(order="F") > 0)
    if eligible.size < n_seeds:
        raise EmptyOrganError(
            f"organ has {eligible.size} seedable voxels (level > 0), need {n_seeds}"
        )
    keys = rng.hash_array(seed, eligible.astype(np.uint64), 0, rng.TAG_SEED)
    order = np.argsort(keys, kind="stable")
    chosen = eligible[order[:n_seeds]]
    pop = np.zeros(q.dims, dtype=np.int8)
    x, y, z = linear_to_xyz(chosen, q.dims)
    pop[x, y, z] = 1
    return TumorState(
        population=Volume(pop, q.spacing, ElementKind.STATE),
        pressure=Volume.zeros(q.dims, q.spacing, ElementKind.PRESSURE),
        iteration=0,
    )


def _active_box(pop: np.ndarray):
    """Bounding box of nonzero population, or None when the grid is empty."""
    nz = pop != 0
    xs = nz.any(axis=(1, 2))
    if not xs.any():
        return None
    ys = nz.any(axis=(0, 2))
    zs = nz.any(axis=(0, 1))
    nx, ny, nzn = pop.shape
    return (
        int(xs.argmax()), nx - int(xs[::-1].argmax()),
        int(ys.argmax()), ny - int(ys[::-1].argmax()),
        int(zs.argmax()), nzn - int(zs[::-1].argmax()),
    )


def _check_state(state: TumorState, q: QuantifiedOrgan) -> None:
    check_same_grid(state.population, q.levels, q.simulable)


def step(state: TumorState, q: QuantifiedOrgan, params: SimulationParams) -> TumorState:
    """One synchronous automaton step (parallel two-phase kernel)."""
    _check_state(state, q)
    pop = state.population.data
    press = state.pressure.data
    new_pop = pop.copy()
    new_press = press.copy()

    box = _active_box(pop)
    if box is not None:
        nx, ny, nz = pop.shape
        x0, x1, y0, y1, z0, z1 = box
        # Decisions happen where population != 0; targets reach one voxel
        # further.  Outside the expanded box nothing can change.
        ex0, ey0, ez0 = max(x0 - 1, 0), max(y0 - 1, 0), max(z0 - 1, 0)
        ex1, ey1, ez1 = min(x1 + 1, nx), min(y1 + 1, ny), min(z1 + 1, nz)

        grow = np.zeros(pop.shape, dtype=np.uint8)
        die = np.zeros(pop.shape, dtype=np.uint8)
        att = np.full(pop.shape, ATT_NONE, dtype=np.int8)

        seed_g = np.uint64((params.seed + rng.GOLDEN) & rng.MASK64)
        it_u = np.uint64(state.iteration)
        p1, p2, p3 = params.p_invade_by_level
        _decide_kernel(
            pop, q.levels.data, q.simulable.data, _OFFS, seed_g, it_u,
            params.p_grow, p1, p2, p3, params.p_death,
            x0, x1, y0, y1, z0, z1, grow, die, att,
        )
        _merge_kernel(
            pop, press, q.levels.data, _OFFS,
            params.pressure_threshold_boundary, params.pressure_threshold_dense,
            ex0, ex1, ey0, ey1, ez0, ez1, grow, die, att, new_pop, new_press,
        )

    return TumorState(
        population=state.population.like(new_pop),
        pressure=state.pressure.like(new_press),
        iteration=state.iteration + 1,
    )


def step_reference(state: TumorState, q: QuantifiedOrgan, params: SimulationParams) -> TumorState:
    """One step via the sequential full-sweep oracle; must match :func:`step` exactly."""
    _check_state(state, q)
    pop = state.population.data
    press = state.pressure.data
    new_pop = pop.copy()
    new_press = press.copy()
    seed_g = np.uint64((params.seed + rng.GOLDEN) & rng.MASK64)
    it_u = np.uint64(state.iteration)
    p1, p2, p3 = params.p_invade_by_level
    _reference_kernel(
        pop, press, q.levels.data, q.simulable.data, seed_g, it_u,
        params.p_grow, p1, p2, p3,
        params.pressure_threshold_boundary, params.pressure_threshold_dense,
        params.p_death, new_pop, new_press,
    )
    return TumorState(
        population=state.population.like(new_pop),
        pressure=state.pressure.like(new_press),
        iteration=state.iteration + 1,
    )


def simulate(
    q: QuantifiedOrgan, params: SimulationParams, n_seeds: int = 1
) -> tuple[TumorState, list[TumorState]]:
    """Seed and run the automaton for ``params.max_steps`` steps.

    Returns the final state and deep-copied snapshots at every iteration
    index listed in ``params.snapshot_steps`` (indices beyond the step
    budget are ignored).  Deterministic in (q, params, n_seeds).
    """
    state = seed_tumor(q, params.seed, n_seeds)
    wanted = set(params.snapshot_steps)
    snapshots = []
    if state.iteration in wanted:
        snapshots.append(state.copy())
    for _ in range(params.max_steps):
        state = step(state, q, params)
        if state.iteration in wanted:
            snapshots.append(state.copy())
    return state, snapshots

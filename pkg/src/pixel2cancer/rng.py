"""Counter-based deterministic randomness.

Every random draw made by the engine is a pure function of four integers:

    hash = mix64(mix64(mix64(((seed + GOLDEN) mod 2^64) ^ index) ^ iteration) ^ tag)

where ``mix64`` is the splitmix64 finalizer, ``index`` is the x-fastest
linear index of the cell making the draw (``lin = x + nx*(y + ny*z)``),
``iteration`` is the automaton step counter, and ``tag`` identifies the
purpose of the draw so one cell can consume several independent values per
step.  Because there is no sequential generator state, any number of
workers can evaluate cells in any order and still produce bit-identical
results.

Uniform doubles in [0, 1) take the top 53 bits: ``u = (hash >> 11) * 2^-53``.

Two implementations live here and must agree bit-for-bit: a scalar one in
plain Python integer arithmetic (the readable reference) and a vectorized
one on uint64 numpy arrays (used for seeding, textures, benchmarks).  The
numba step kernels carry a third copy of the same arithmetic; the test
suite pins all of them against each other.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1

GOLDEN = 0x9E3779B97F4A7C15
MIX_C1 = 0xBF58476D1CE4E5B9
MIX_C2 = 0x94D049BB133111EB

# Stream tags.  One per purpose; a cell may draw from several streams in the
# same iteration without correlation.
TAG_GROW = 1        # growth roll (rule R1)
TAG_DIR = 2         # invasion direction choice (rule R2)
TAG_INVADE = 3      # invasion success roll (rule R2)
TAG_DEATH = 4       # death roll (rule R3)
TAG_SEED = 5        # seed-site ranking
TAG_TEX_U1 = 6      # texture Box-Muller, first uniform
TAG_TEX_U2 = 7      # texture Box-Muller, second uniform
TAG_BENCH_LEVEL = 8 # synthetic benchmark organ content

_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit value (Python int arithmetic)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_C1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C2) & MASK64
    return z ^ (z >> 31)


def counter_hash(seed: int, index: int, iteration: int, tag: int) -> int:
    """64-bit hash of the (seed, cell, iteration, purpose) counter tuple."""
    h = mix64(((seed + GOLDEN) & MASK64) ^ (index & MASK64))
    h = mix64(h ^ (iteration & MASK64))
    return mix64(h ^ (tag & MASK64))


def counter_uniform(seed: int, index: int, iteration: int, tag: int) -> float:
    """Uniform double in [0, 1) derived from :func:`counter_hash`."""
    return (counter_hash(seed, index, iteration, tag) >> 11) * _INV_2_53


def _mix64_u64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array (wraparound is intentional)."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_C2)
    return z ^ (z >> np.uint64(31))


def hash_array(seed: int, indices: np.ndarray, iteration: int, tag: int) -> np.ndarray:
    """Vectorized :func:`counter_hash` over an array of cell indices."""
    idx = np.asarray(indices, dtype=np.uint64)
    h = _mix64_u64(np.uint64((seed + GOLDEN) & MASK64) ^ idx)
    h = _mix64_u64(h ^ np.uint64(iteration & MASK64))
    return _mix64_u64(h ^ np.uint64(tag & MASK64))


def uniform_array(seed: int, indices: np.ndarray, iteration: int, tag: int) -> np.ndarray:
    """Vectorized :func:`counter_uniform`; returns float64 in [0, 1)."""
    h = hash_array(seed, indices, iteration, tag)
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def gaussian_pair_uniforms(h1: np.ndarray, h2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Box-Muller input uniforms from two hash arrays.

    u1 lands in (0, 1] (never zero, so log(u1) is finite); u2 in [0, 1).
    """
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return u1, u2


def gaussian_array(seed: int, indices: np.ndarray, mean: float, std: float) -> np.ndarray:
    """Independent N(mean, std^2) draws, one per cell index.

    Uses the Box-Muller cosine branch: z = sqrt(-2 ln u1) * cos(2 pi u2),
    with u1 from TAG_TEX_U1 and u2 from TAG_TEX_U2 at iteration 0.
    """
    h1 = hash_array(seed, indices, 0, TAG_TEX_U1)
    h2 = hash_array(seed, indices, 0, TAG_TEX_U2)
    u1, u2 = gaussian_pair_uniforms(h1, h2)
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos((2.0 * math.pi) * u2)
    return mean + std * z

# utils/rng.py
"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, stream)``. A stream index is a sample index (ensemble sampling) or a
block index (Monte Carlo integrals), so results do not depend on how the index
range is split across workers.
"""
from __future__ import annotations

from typing import Iterator, Tuple

import numpy as np

# ---------- Constants (single source of truth)
SEED_BITS = 64
MC_BLOCK_SIZE = 1 << 15


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < (1 << SEED_BITS):
        raise ValueError(f"seed must be a {SEED_BITS}-bit unsigned integer, got {seed}")
    return seed


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one stream index."""
    if stream < 0:
        raise ValueError(f"stream index must be >= 0, got {stream}")
    sq = np.random.SeedSequence(check_seed(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sq))


def standard_complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard complex Gaussians: E|c|^2 = 1, real and imaginary variance 1/2 each."""
    out = rng.standard_normal(size=size) + 1j * rng.standard_normal(size=size)
    out *= np.sqrt(0.5)
    return out


def sample_blocks(samples: int, block_size: int = MC_BLOCK_SIZE) -> Iterator[Tuple[int, int]]:
    """Yield ``(block_index, block_length)`` covering ``samples`` draws.

    The partition depends only on ``samples`` and ``block_size``.
    """
    n_blocks = -(-samples // block_size)
    for b in range(n_blocks):
        yield b, min(block_size, samples - b * block_size)

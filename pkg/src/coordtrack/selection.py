"""Counter-based coordinate selection.

Draws are pure functions of (seed, iteration, agent) through a 64-bit mixing
hash, so any draw can be regenerated in isolation: parallel execution order and
checkpoint/resume cannot affect the stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHARED = "shared"
INDEPENDENT = "independent"

_SHARED_SLOT = np.uint64(0xFFFFFFFF)  # agent-field value for the shared stream


def _fmix64(z):
    """Murmur3 64-bit finalizer (bijective avalanche mix), vectorized on uint64."""
    z = np.array(z, dtype=np.uint64, copy=True)
    z ^= z >> np.uint64(33)
    z *= np.uint64(0xFF51AFD7ED558CCD)
    z ^= z >> np.uint64(33)
    z *= np.uint64(0xC4CEB9FE1A85EC53)
    z ^= z >> np.uint64(33)
    return z


def _hash_cell(seed, iteration, agent_field):
    # (iteration, agent) packed injectively before mixing.
    packed = (np.uint64(int(iteration)) << np.uint64(32)) | agent_field
    return _fmix64(np.uint64(int(seed) % 2 ** 64) ^ _fmix64(packed))


@dataclass(frozen=True)
class SelectionDraw:
    """Per-agent coordinate choices for one iteration."""

    indices: np.ndarray
    mode: str

    def __post_init__(self):
        if self.mode not in (SHARED, INDEPENDENT):
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.mode == SHARED and len(set(self.indices.tolist())) > 1:
            raise ValueError("shared draw must give every agent the same index")


def draw_indices(seed, iteration, num_agents, dimension, mode):
    """Coordinate indices for one iteration; shared mode broadcasts one index."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if mode == SHARED:
        idx = int(_hash_cell(seed, iteration, _SHARED_SLOT) % np.uint64(dimension))
        indices = np.full(num_agents, idx, dtype=np.int64)
    elif mode == INDEPENDENT:
        agents = np.arange(num_agents, dtype=np.uint64)
        h = _hash_cell(seed, iteration, agents)
        indices = (h % np.uint64(dimension)).astype(np.int64)
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    return SelectionDraw(indices, mode)


def draw_matrix(seed, first_iteration, count, num_agents, dimension, mode):
    """Draws for ``count`` consecutive iterations, shape (count, num_agents)."""
    out = np.empty((count, num_agents), dtype=np.int64)
    for j in range(count):
        out[j] = draw_indices(seed, first_iteration + j, num_agents,
                              dimension, mode).indices
    return out

"""Deterministic random streams addressed by slot index.

Sessions draw per-slot randomness (phase choices, detector outcomes,
eavesdropper coins) from a counter-based generator laid out as a fixed grid:
each slot owns one row of ``WIDTH`` uniforms, rows are produced in chunks of
``CHUNK`` slots, and every chunk is generated from a counter derived only
from the chunk index. Any worker can therefore produce any slice of slots and
always gets the same numbers, so results are independent of how work is
partitioned across processes.
"""

from __future__ import annotations

import numpy as np

CHUNK = 4096
WIDTH = 16

# Column assignments within a slot row.
COL_PHI_A = 0
COL_PHI_B = 1
COL_EVE_BASIS = 2
COL_EVE_PLUS = 3
COL_EVE_MINUS = 4
COL_EVE_BLOCK = 5
COL_CLICK_D0 = 8
COL_CLICK_D1 = 9

# Stream purposes, kept distinct so reusing one master seed across the
# session, the fiber draw, and a parameter sweep never aliases.
PURPOSE_SESSION = 1
PURPOSE_BIREFRINGENCE = 2
PURPOSE_SWEEP = 3

_UINT64_PER_BLOCK = 4  # one counter increment yields four 64-bit words


def _chunk_key(master_seed: int, purpose: int) -> np.ndarray:
    ss = np.random.SeedSequence(master_seed, spawn_key=(purpose,))
    return ss.generate_state(2, np.uint64)


def chunk_uniforms(master_seed: int, purpose: int, chunk_index: int) -> np.ndarray:
    """The full ``(CHUNK, WIDTH)`` uniform block of one chunk."""
    if chunk_index < 0:
        raise ValueError("chunk_index must be >= 0")
    counter = chunk_index * (CHUNK * WIDTH // _UINT64_PER_BLOCK)
    bg = np.random.Philox(key=_chunk_key(master_seed, purpose), counter=counter)
    return np.random.Generator(bg).random(CHUNK * WIDTH).reshape(CHUNK, WIDTH)


def slot_uniforms(
    master_seed: int, purpose: int, start_slot: int, n_slots: int
) -> np.ndarray:
    """Uniform rows for slots ``start_slot .. start_slot + n_slots - 1``.

    The same slot always receives the same row no matter which window of
    slots is requested or in which order.
    """
    if start_slot < 0 or n_slots < 0:
        raise ValueError("slot range must be non-negative")
    out = np.empty((n_slots, WIDTH))
    filled = 0
    slot = start_slot
    while filled < n_slots:
        c = slot // CHUNK
        lo = slot - c * CHUNK
        hi = min(CHUNK, lo + (n_slots - filled))
        out[filled : filled + hi - lo] = chunk_uniforms(master_seed, purpose, c)[lo:hi]
        filled += hi - lo
        slot = (c + 1) * CHUNK
    return out


def spawn_generator(master_seed: int, purpose: int, *indices: int) -> np.random.Generator:
    """Independent generator for non-slot randomness (fiber draws, sweep steps)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(purpose, *indices))
    return np.random.Generator(np.random.Philox(ss))

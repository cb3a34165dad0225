"""Deterministic seed derivation.

Every random stream in the pipeline is keyed by ``(master_seed, stream, *indices)``
hashed with BLAKE2b, so samples can be built in any order or in parallel.
"""

from __future__ import annotations

import hashlib
import struct

MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, stream: str, *indices: int) -> int:
    """Return a 64-bit seed for one named stream at the given indices."""
    h = hashlib.blake2b(digest_size=8, person=b"diagbench")
    h.update(struct.pack("<Q", master_seed & MASK64))
    h.update(stream.encode("utf-8"))
    for i in indices:
        h.update(struct.pack("<Q", i & MASK64))
    return int.from_bytes(h.digest(), "little")


def hash_key(master_seed: int, stream: str, text: str) -> bytes:
    h = hashlib.blake2b(digest_size=16, person=b"diagbench")
    h.update(struct.pack("<Q", master_seed & MASK64))
    h.update(stream.encode("utf-8"))
    h.update(text.encode("utf-8"))
    return h.digest()

"""Deterministic seed derivation.

All randomness in the engine flows from one session seed through this
function, so a fixed seed replays the whole pipeline bit for bit.
"""

from __future__ import annotations

import hashlib

MAX_SEED = (1 << 63) - 1


def derive_seed(base: int, *labels: object) -> int:
    """Stable 63-bit child seed for (base, labels...)."""
    h = hashlib.sha256()
    h.update(str(int(base)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big") & MAX_SEED

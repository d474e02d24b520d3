"""Deterministic seed management.

Every random stream in a run is derived from one root seed plus a role path,
e.g. ``child_rng(seed, "trial", 17, "hash")``.  Streams with different paths
are independent (distinct SHA-256-derived seeds), and in particular adversary
script generation never shares a stream with strategy coin flips or hash
draws, as the oblivious-adversary model requires.
"""

from __future__ import annotations

import hashlib
import random

__all__ = ["child_seed", "child_rng", "HASH_STREAM", "COIN_STREAM", "SCRIPT_STREAM"]

# Conventional role names for the three stream families.
HASH_STREAM = "hash"
COIN_STREAM = "coin"
SCRIPT_STREAM = "script"


def child_seed(root_seed: int, *path: object) -> int:
    """Derive a 64-bit child seed from a root seed and a role path."""
    key = "/".join([str(root_seed), *map(str, path)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def child_rng(root_seed: int, *path: object) -> random.Random:
    """A ``random.Random`` seeded from ``child_seed(root_seed, *path)``."""
    return random.Random(child_seed(root_seed, *path))

"""Deterministic random-stream derivation.

Every stochastic component draws from a generator derived from the run's
master seed plus a structural path (evaluation index, split index, a role
string, ...). Streams are therefore pure functions of (seed, path) and do
not depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (bool,)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"path parts must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "little")
    raise TypeError(f"unsupported rng path part: {part!r}")


def derive(master_seed: int, *path) -> np.random.Generator:
    """Return a Generator for the stream identified by (master_seed, *path)."""
    key = tuple(_key_part(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=key))

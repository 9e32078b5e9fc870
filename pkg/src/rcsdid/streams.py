"""Deterministic, keyed random number substreams.

Every stochastic component draws from a stream keyed by (seed, *labels).
Streams are independent of execution order, so replications can run in
any order (or in parallel) and still produce bit-identical results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(part) -> int:
    digest = hashlib.sha256(repr(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *key) -> np.random.Generator:
    """Return a Generator for the substream identified by (seed, *key).

    Key parts may be ints or strings; they are hashed into the seed
    sequence entropy so that distinct keys give independent streams.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))

"""Deterministic named RNG streams.

Every random draw in the package descends from a single experiment seed
through a ``(seed, *names) -> Generator`` derivation.  Streams are
independent of each other and of evaluation order, so a pipeline stage can
be recomputed in isolation (or in parallel) without replaying the draws
that precede it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _spawn_key(names: tuple) -> tuple[int, ...]:
    # Stable across platforms and sessions: hash the reprs, not Python hash().
    h = hashlib.sha256()
    for name in names:
        h.update(repr(name).encode("utf-8"))
        h.update(b"\x1f")
    digest = h.digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def stream(seed: int, *names) -> np.random.Generator:
    """Return the generator for the stream identified by ``(seed, *names)``.

    ``names`` may mix strings and integers (component, stage, chain index,
    ...).  The same identifiers always yield the same stream; distinct
    identifiers yield statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=_spawn_key(names))
    return np.random.Generator(np.random.PCG64(ss))

"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which builds
a numpy ``Generator`` on the Philox 4x64 counter-based bit generator.  The
stream is a pure function of the user seed plus an optional tuple of
integer stream keys, so replicate ``i`` of an experiment uses
``make_rng(seed, i)`` and is reproducible on any platform.
"""

import numpy as np


def make_rng(seed, *stream):
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *stream):
    """64-bit child seed ``mix(seed, stream...)``."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])

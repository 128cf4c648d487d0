"""Counter-based random bits for edge states.

Every edge state is a pure function of (seed, canonical edge id), so samples
are reproducible bit-for-bit no matter in which order edges are visited, and
boxes of different side length that share the same centre see identical
states on their common edges.  The mixer is the splitmix64 finalizer applied
twice, which is plenty for Bernoulli/uniform edge marks.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# Stream constants keep the draw families independent for one seed.
STREAM_BOND = np.uint64(0x42444F4E44)        # "BOND"
STREAM_CONDUCTANCE = np.uint64(0x434F4E44)   # "COND"
STREAM_SELF = np.uint64(0x53454C46)          # "SELF"


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _key(seed: int, stream: np.uint64) -> np.uint64:
    s = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return mix64(s + _GOLDEN)[0] ^ stream


def counter_uniform(seed: int, stream: np.uint64, counters: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) indexed by counter; order-independent by construction.

    The top 53 bits of the mixed word feed the mantissa, so every value is an
    exact dyadic rational and regeneration is bit-identical.
    """
    counters = np.asarray(counters, dtype=np.uint64)
    bits = mix64(mix64(counters + _GOLDEN) ^ _key(seed, stream))
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

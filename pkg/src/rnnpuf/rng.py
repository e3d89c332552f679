"""Counter-based random draws.

Every stochastic evaluation in the simulator is addressed by an explicit
``(seed, index, stream)`` triple instead of a stateful generator, so that a
comparator firing produces the same noise no matter how a batch is ordered or
split across workers.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def hash_u64(seed, index, stream=0):
    """SplitMix64-style hash of (seed, index, stream) -> uint64 array."""
    index = np.asarray(index, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        key = _mix64(np.asarray([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
        key = _mix64(key ^ np.uint64((int(stream) + 1) & 0xFFFFFFFFFFFFFFFF) * _GOLDEN)
        return _mix64(index * _GOLDEN ^ key)


def uniform(seed, index, stream=0):
    """Uniform draws on [0, 1) with 53 bits of resolution."""
    bits = hash_u64(seed, index, stream) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / 9007199254740992.0)


def standard_normal(seed, index, stream=0):
    """Standard normal draws via Box-Muller over two hashed uniform streams."""
    u1 = uniform(seed, index, 2 * stream)
    u2 = uniform(seed, index, 2 * stream + 1)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def derive_seed(*parts) -> int:
    """Combine integers into a single 63-bit seed (for sub-experiments)."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts] + [len(parts)])
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1, 1 << 32], dtype=np.uint64)) >> 1

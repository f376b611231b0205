"""Counter-based random numbers keyed by (seed, stream, block, counter).

Every uniform is a pure function of its key, so any piece of a Poisson
stream can be regenerated in isolation. That is what lets a graphical
sample be extended in time, or shared between truncations of different
size, without resampling anything that already exists.
"""
import numpy as np
from numba import njit, uint64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

# domain tags keep the different uses of a master seed apart
DOMAIN_GRAPHICAL = 0x47524150
DOMAIN_DIRECT = 0x44495245
DOMAIN_REPLICA = 0x5245504C


@njit(cache=True)
def mix64(z):
    z = uint64(z)
    z = (z ^ (z >> uint64(30))) * _M1
    z = (z ^ (z >> uint64(27))) * _M2
    return z ^ (z >> uint64(31))


@njit(cache=True)
def combine(a, b):
    return mix64(uint64(a) ^ (mix64(uint64(b)) + _GOLDEN))


@njit(cache=True)
def block_key(seed, stream_key, block):
    # block may be negative; the int64 bit pattern is reused as uint64
    return combine(combine(seed, stream_key), uint64(np.int64(block)))


@njit(cache=True)
def uniform(key, i):
    """i-th uniform in [0, 1) of the stream identified by ``key``."""
    x = mix64(uint64(key) + uint64(i + 1) * _GOLDEN)
    return (x >> uint64(11)) * _INV53


def derive_seed(master, *path):
    """Derive a child seed from a master seed and an index path.

    Used for replica seeds (master -> batch -> replica) so that every
    replicate is reproducible on its own.
    """
    s = np.uint64(master & 0xFFFFFFFFFFFFFFFF)
    for p in path:
        s = np.uint64(combine(s, np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF)))
    return int(s)


@njit(cache=True)
def derive_seed_nb(master, i):
    return combine(uint64(master), uint64(i))


@njit(cache=True)
def mark_keys(vkeys, tag):
    out = np.empty(vkeys.shape[0], dtype=np.uint64)
    for i in range(vkeys.shape[0]):
        out[i] = combine(vkeys[i], uint64(tag))
    return out


@njit(cache=True)
def arrow_keys(vkeys, src, dst, tag):
    out = np.empty(src.shape[0], dtype=np.uint64)
    for e in range(src.shape[0]):
        out[e] = combine(combine(vkeys[src[e]], uint64(tag)), vkeys[dst[e]])
    return out

"""Counter-based uniforms: a splitmix64 hash of (seed, sweep, site).

Every draw is a pure function of its key, so results do not depend on the
order in which sites are visited or on the number of threads.
"""

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
S30 = np.uint64(30)
S27 = np.uint64(27)
S31 = np.uint64(31)
S11 = np.uint64(11)
INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def mix64(x):
    x = x + GOLDEN
    x = (x ^ (x >> S30)) * M1
    x = (x ^ (x >> S27)) * M2
    return x ^ (x >> S31)


@nb.njit(cache=True, inline="always")
def stream_key(seed, sweep):
    return mix64(mix64(np.uint64(seed)) ^ np.uint64(sweep))


@nb.njit(cache=True, inline="always")
def uniform_at(key, site):
    """Uniform in (0, 1) from a stream key and a site counter."""
    x = mix64(key ^ (np.uint64(site) * GOLDEN))
    return (np.float64(x >> S11) + 0.5) * INV53


@nb.njit(cache=True)
def uniforms(seed, sweep, n):
    key = stream_key(seed, sweep)
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform_at(key, i)
    return out

"""numba kernels for bulk simulation; they mirror simulator.py bit for bit."""
import numpy as np
from numba import njit, uint64

GOLDEN = uint64(0x9E3779B97F4A7C15)
MIX1 = uint64(0xBF58476D1CE4E5B9)
MIX2 = uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * MIX1
    z = (z ^ (z >> uint64(27))) * MIX2
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def _state(seed, t, r):
    s0 = _mix(seed ^ (uint64(t) * GOLDEN))
    return _mix(s0 ^ (uint64(r) * MIX1))


@njit(cache=True)
def build_arrays(n, seed, t, left, right, depth):
    """Insert n records of trial t; returns the number of nodes and max depth."""
    for i in range(n):
        left[i] = -1
        right[i] = -1
    if n == 0:
        return 0, 0
    depth[0] = 0
    count = 1
    maxd = 0
    for r in range(1, n):
        st = _state(seed, t, r)
        word = uint64(0)
        avail = 0
        node = 0
        d = 0
        while True:
            if avail == 0:
                st = st + GOLDEN
                word = _mix(st)
                avail = 64
            bit = (word >> uint64(63)) & uint64(1)
            word = word << uint64(1)
            avail -= 1
            if bit == 0:
                child = left[node]
            else:
                child = right[node]
            if child == -1:
                depth[count] = d + 1
                if bit == 0:
                    left[node] = count
                else:
                    right[node] = count
                if d + 1 > maxd:
                    maxd = d + 1
                count += 1
                break
            node = child
            d += 1
    return count, maxd


@njit(cache=True)
def sample_index(seed, t, n):
    """Uniform index in [0, n] by rejection on the stream (seed, t, n)."""
    m = n + 1
    nbits = 0
    while (1 << nbits) < m:
        nbits += 1
    st = _state(seed, t, n)
    word = uint64(0)
    avail = 0
    while True:
        v = 0
        for _ in range(nbits):
            if avail == 0:
                st = st + GOLDEN
                word = _mix(st)
                avail = 64
            v = (v << 1) | int((word >> uint64(63)) & uint64(1))
            word = word << uint64(1)
            avail -= 1
        if v < m:
            return v


@njit(cache=True)
def run_block(n, seed, t0, t1, L, level, ext_sum, ext_sq, int_sum, int_sq,
              heights, sats, udepths, lev_ext, lev_int):
    """Simulate trials t0..t1-1, accumulating per-level integer sums.

    Returns False if some tree reached level L - 1 (caller must enlarge L).
    """
    size = max(n, 1)
    left = np.empty(size, np.int64)
    right = np.empty(size, np.int64)
    depth = np.empty(size, np.int64)
    B = np.zeros(L, np.int64)
    I = np.zeros(L, np.int64)
    for t in range(t0, t1):
        count, maxd = build_arrays(n, seed, t, left, right, depth)
        if maxd + 2 > L:
            return False
        B[:] = 0
        I[:] = 0
        if n == 0:
            B[0] = 1
        for i in range(count):
            d = depth[i]
            I[d] += 1
            if left[i] == -1:
                B[d + 1] += 1
            if right[i] == -1:
                B[d + 1] += 1
        h = 0
        for k in range(L):
            if B[k] > 0:
                h = k
        s = -1
        for k in range(L):
            if I[k] == (1 << k):
                s = k
            else:
                break
        idx = sample_index(seed, t, n)
        u = 0
        acc = 0
        for k in range(L):
            acc += B[k]
            if idx < acc:
                u = k
                break
        j = t - t0
        heights[j] = h
        sats[j] = s
        udepths[j] = u
        if level >= 0:
            lev_ext[j] = B[level] if level < L else 0
            lev_int[j] = I[level] if level < L else 0
        for k in range(L):
            ext_sum[k] += B[k]
            ext_sq[k] += B[k] * B[k]
            int_sum[k] += I[k]
            int_sq[k] += I[k] * I[k]
    return True

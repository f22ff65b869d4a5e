"""Independent reference implementations used only by the tests.

Nothing here imports the code under test except for plain value types, so a
shared bug cannot make both sides of a comparison agree.
"""
from __future__ import annotations

import math

import numpy as np

M32 = (0xD2511F53, 0xCD9E8D57)
W32 = (0x9E3779B9, 0xBB67AE85)


def philox4x32_scalar(ctr, key, rounds=10):
    """Philox4x32 with Python integers, one block at a time."""
    mask = 0xFFFFFFFF
    c = list(ctr)
    k = list(key)
    for r in range(rounds):
        if r:
            k = [(k[0] + W32[0]) & mask, (k[1] + W32[1]) & mask]
        p0 = M32[0] * c[0]
        p1 = M32[1] * c[2]
        c = [(p1 >> 32) ^ c[1] ^ k[0], p1 & mask, (p0 >> 32) ^ c[3] ^ k[1], p0 & mask]
    return c


# published known-answer vectors for Philox4x32-10
PHILOX_KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def scalar_candidate(seed, sample, i, marginal):
    """(gap, symbol) of candidate i, straight from the documented layout."""
    key = (seed & 0xFFFFFFFF, seed >> 32)
    w = philox4x32_scalar((i, 0, sample & 0xFFFFFFFF, sample >> 32), key)
    gap_bits = ((w[1] << 32) | w[0]) >> 11
    sym_bits = ((w[3] << 32) | w[2]) >> 11
    gap = -math.log((gap_bits + 1) / 2.0 ** 53)
    u = sym_bits / 2.0 ** 53
    acc = 0.0
    sym = len(marginal) - 1
    for j, pj in enumerate(marginal):
        acc += pj
        if u < acc:
            sym = j
            break
    return gap, sym


def scalar_pfr(x, rows, marginal, seed, sample, n_candidates):
    """Argmin of T_i * marginal / Q over the first n candidates, no stop rule."""
    t = 0.0
    best, best_i, best_sym = math.inf, 0, None
    for i in range(1, n_candidates + 1):
        gap, sym = scalar_candidate(seed, sample, i, marginal)
        t += gap
        q = rows[x][sym]
        w = marginal[sym] / q if q > 0 else math.inf
        if t * w < best:
            best, best_i, best_sym = t * w, i, sym
    return best_i, best_sym


def elias_delta(k: int) -> str:
    """Elias delta from its definition with integer arithmetic."""
    n = int(math.floor(math.log2(k))) if k < 2 ** 50 else k.bit_length() - 1
    length = n + 1
    ll = length.bit_length() - 1
    gamma = "0" * ll + format(length, "b")
    low = format(k - (1 << n), "b").zfill(n) if n else ""
    return gamma + low


def h2(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def binary_rd(p: float, d: float) -> float:
    """Rate-distortion function of a Bernoulli(p) source under Hamming loss."""
    return max(h2(p) - h2(d), 0.0) if d < min(p, 1 - p) else 0.0


def mi_by_identity(p, rows) -> float:
    """H(output) - sum_x p(x) H(row x)."""
    p = np.asarray(p, float)
    rows = np.asarray(rows, float)

    def h(v):
        v = v[v > 0]
        return float(-(v * np.log2(v)).sum())

    return h(p @ rows) - sum(px * h(r) for px, r in zip(p, rows))


def geometric_entropy(q: float) -> float:
    """Entropy (bits) of a geometric law with success probability q."""
    return h2(q) / q

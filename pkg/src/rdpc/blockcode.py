"""Block version of the index code over N i.i.d. source symbols.

A block of N inputs is simulated through the N-fold product channel with
one candidate search: candidate vectors draw every coordinate i.i.d. from
the marginal, and the weight of a vector is the product of per-coordinate
density ratios.  Each coordinate of the decoded block then follows the base
channel given its own input, which is what per-coordinate constraints ask.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .pfr import (
    DEFAULT_BUDGET,
    MAX_CANDIDATES,
    CommonRandomness,
    PfrEncoding,
    decode_many,
    encode_many,
    weight_table,
)
from .probcore import Channel, DimensionMismatch, Pmf

log = logging.getLogger(__name__)

# above this many bits of log2(1 / product w_min) the search gets expensive
WMIN_BITS_WARN = 30.0


@dataclass(frozen=True)
class BlockProblem:
    n: int
    channel: Channel
    source: Pmf
    marginal: Pmf

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be at least 1")
        if self.source.alphabet_size != self.channel.in_size:
            raise DimensionMismatch("source and channel disagree on the input alphabet")
        w = weight_table(self.channel, self.marginal)
        live = self.source.probs > 0
        worst = float(w[live].min(axis=1).min()) if np.any(live) else 1.0
        bits = -self.n * math.log2(worst)
        if bits > WMIN_BITS_WARN:
            log.warning("product w_min is 2^-%.1f; the candidate search may exhaust its budget", bits)

    def budget(self, base: int = DEFAULT_BUDGET) -> int:
        """Candidate budget for this block length: base * 2^N, capped."""
        return int(min(base * 2 ** self.n, MAX_CANDIDATES))


def _check_block(x_vec, bp: BlockProblem) -> np.ndarray:
    x = np.asarray(x_vec, dtype=np.int64)
    if x.ndim != 1 or x.size != bp.n:
        raise DimensionMismatch(f"expected a block of {bp.n} symbols")
    return x


def encode_block(x_vec, bp: BlockProblem, u: CommonRandomness, budget: int | None = None) -> PfrEncoding:
    x = _check_block(x_vec, bp)
    budget = bp.budget() if budget is None else budget
    return encode_many(x[None, :], bp.channel, bp.marginal, u.seed, [u.sample_index], budget)[0]


def encode_blocks(blocks, bp: BlockProblem, seed: int, sample_indices, budget: int | None = None):
    blocks = np.asarray(blocks, dtype=np.int64)
    if blocks.ndim != 2 or blocks.shape[1] != bp.n:
        raise DimensionMismatch(f"expected blocks of {bp.n} symbols")
    budget = bp.budget() if budget is None else budget
    return encode_many(blocks, bp.channel, bp.marginal, seed, sample_indices, budget)


def decode_block(k: int, bp: BlockProblem, u: CommonRandomness) -> tuple:
    out = decode_many([k], bp.marginal, u.seed, [u.sample_index], bp.n)[0]
    return tuple(int(s) for s in out)


def decode_blocks(ks, bp: BlockProblem, seed: int, sample_indices) -> np.ndarray:
    return decode_many(ks, bp.marginal, seed, sample_indices, bp.n)


def theorem3_bound(n: int, rate: float) -> float:
    """Per-symbol index-entropy bound R + log2(N R + 2) / N + 5 / N."""
    if n < 1:
        raise ValueError("N must be at least 1")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return rate + math.log2(n * rate + 2.0) / n + 5.0 / n

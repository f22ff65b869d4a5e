"""One-shot channel simulation with the Poisson functional representation.

Encoder and decoder share a seed.  From it both derive the same endless
stream of candidates: reconstruction symbols drawn i.i.d. from the marginal,
each paired with an epoch of a unit-rate Poisson process.  The encoder sends
the index of the candidate minimising ``epoch * marginal / Q(.|x)``; the
decoder just looks that candidate up.  The chosen symbol is an exact sample
of Q(.|x).

Randomness comes from a counter-based PRF (Philox4x32-10) keyed by the seed,
so any candidate of any sample can be regenerated in O(1).  Counter layout:

    (candidate index, substream, sample_index low word, sample_index high word)

Substream 0 yields the epoch gap (words 0-1) and coordinate 0's symbol
(words 2-3); substream j >= 1 yields coordinates 2j-1 and 2j.  The top
substreams are reserved for redrawing a gap that fails to advance the epoch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .probcore import Channel, DimensionMismatch, Pmf

U32 = np.uint64(0xFFFFFFFF)
_M0, _M1 = np.uint64(0xD2511F53), np.uint64(0xCD9E8D57)
_W0, _W1 = np.uint64(0x9E3779B9), np.uint64(0xBB67AE85)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
TWO_M53 = 2.0 ** -53

DEFAULT_BUDGET = 10_000_000
MAX_CANDIDATES = 0xFFFFFFFF - 64  # the top substreams of the index space stay reserved
REDRAW_BASE = 0xFFFFFFFF
MAX_REDRAWS = 32
MAX_COORDS = 2 * 0xFFFF


class BudgetExhausted(RuntimeError):
    pass


class AbsoluteContinuityViolated(ValueError):
    pass


def philox4x32(c0, c1, c2, c3, k0, k1, rounds: int = 10):
    """Philox4x32 on uint64 arrays holding 32-bit words (broadcasting)."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0, k1 = np.uint64(k0), np.uint64(k1)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & U32
            k1 = (k1 + _W1) & U32
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _S32) ^ c1 ^ k0, p1 & U32, (p0 >> _S32) ^ c3 ^ k1, p0 & U32
    return c0, c1, c2, c3


@dataclass(frozen=True)
class CommonRandomness:
    """Shared randomness for one sample: the seed plus the sample's index."""

    seed: int
    sample_index: int = 0

    def __post_init__(self):
        for name in ("seed", "sample_index"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and 0 <= int(v) < 2 ** 64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer")
            object.__setattr__(self, name, int(v))


def _key(seed: int):
    return seed & 0xFFFFFFFF, seed >> 32


def prf_block(seed: int, sample_index, candidate, substream):
    """The four 32-bit words for the given counters (arrays broadcast)."""
    k0, k1 = _key(int(seed))
    s = np.asarray(sample_index, dtype=np.uint64)
    return philox4x32(candidate, substream, s & U32, s >> _S32, k0, k1)


def prf_outputs(seed: int, sample_index: int, candidate: int, substream: int = 0) -> tuple[int, int]:
    """The block as two 64-bit integers (word1:word0, word3:word2)."""
    w = prf_block(seed, sample_index, candidate, substream)
    return int((w[1] << _S32) | w[0]), int((w[3] << _S32) | w[2])


def _unit(lo, hi):
    # 53 high bits of the 64-bit word pair as an integer in [0, 2^53)
    return (((hi << _S32) | lo) >> _S11).astype(np.float64)


def load_test_vectors():
    """Pinned PRF outputs shipped with the package, as tuples of ints."""
    text = resources.files("rdpc").joinpath("data/prf_vectors.txt").read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        seed, sample, cand, sub, out0, out1 = line.split()
        rows.append((int(seed), int(sample), int(cand), int(sub), int(out0, 16), int(out1, 16)))
    return rows


# ---------------------------------------------------------------------------
# candidate stream


class _Stream:
    """Candidate epochs and symbols for a batch of samples sharing a seed."""

    def __init__(self, seed: int, samples: np.ndarray, marginal: Pmf, n_coords: int):
        self.seed = seed
        self.samples = samples.astype(np.uint64)
        self.cdf = np.cumsum(marginal.probs)
        self.cdf[-1] = 1.0
        self.n_coords = n_coords

    def symbols_of(self, u):
        return np.searchsorted(self.cdf, u * TWO_M53, side="right")

    def draw(self, rows, start: int, count: int):
        """Gaps and candidate symbols for candidates start .. start+count-1.

        Returns gaps (R, count) and symbols (R, count, n_coords).
        """
        s = self.samples[rows][:, None]
        cand = np.arange(start, start + count, dtype=np.uint64)[None, :]
        syms = np.empty((len(rows), count, self.n_coords), dtype=np.int64)
        w = prf_block(self.seed, s, cand, 0)
        gaps = -np.log((_unit(w[0], w[1]) + 1.0) * TWO_M53)
        syms[:, :, 0] = self.symbols_of(_unit(w[2], w[3]))
        for j in range(1, self.n_coords // 2 + 1):
            w = prf_block(self.seed, s, cand, j)
            syms[:, :, 2 * j - 1] = self.symbols_of(_unit(w[0], w[1]))
            if 2 * j < self.n_coords:
                syms[:, :, 2 * j] = self.symbols_of(_unit(w[2], w[3]))
        return gaps, syms

    def redraw_gap(self, row, candidate: int, attempt: int) -> float:
        w = prf_block(self.seed, self.samples[row], candidate, REDRAW_BASE - attempt)
        return float(-np.log((_unit(w[0], w[1]) + 1.0) * TWO_M53))


def _advance(stream: _Stream, row, t_prev: float, gaps: np.ndarray, start: int) -> np.ndarray:
    """Epochs from gaps by sequential float addition, redrawing any gap that
    does not move the epoch forward."""
    t = np.empty(gaps.size)
    acc = t_prev
    for i, g in enumerate(gaps):
        nxt = acc + g
        attempt = 0
        while not nxt > acc:
            if attempt >= MAX_REDRAWS:
                raise RuntimeError("epoch stream failed to advance")
            nxt = acc + stream.redraw_gap(row, start + i, attempt)
            attempt += 1
        t[i] = acc = nxt
    return t


def _epochs(stream: _Stream, rows, t_prev: np.ndarray, gaps: np.ndarray, start: int) -> np.ndarray:
    # numpy's cumsum along a row is the same left-to-right float addition
    t = np.cumsum(np.concatenate([t_prev[:, None], gaps], axis=1), axis=1)
    prev = t[:, :-1]
    t = t[:, 1:]
    bad = np.flatnonzero(np.any(~(t > prev), axis=1))
    for b in bad:
        t[b] = _advance(stream, rows[b], float(t_prev[b]), gaps[b], start)
    return t


# ---------------------------------------------------------------------------
# encoder core


def weight_table(q: Channel, marginal: Pmf) -> np.ndarray:
    """w[x, xh] = marginal(xh) / Q(xh | x), +inf where Q is zero."""
    if q.out_size != marginal.alphabet_size:
        raise DimensionMismatch(f"channel emits {q.out_size} symbols, marginal has {marginal.alphabet_size}")
    rows = q.rows
    m = marginal.probs[None, :]
    violating = (rows > 0) & (m <= 0)
    if np.any(violating):
        x, xh = np.argwhere(violating)[0]
        raise AbsoluteContinuityViolated(f"Q({xh}|{x}) > 0 but the marginal gives {xh} no mass")
    with np.errstate(divide="ignore"):
        return np.where(rows > 0, m / np.where(rows > 0, rows, 1.0), np.inf)


def min_weight_bound(q: Channel, marginal: Pmf, x: int) -> float:
    """Smallest density ratio marginal / Q(.|x) over the support of Q(.|x)."""
    w = weight_table(q, marginal)
    if not 0 <= x < q.in_size:
        raise ValueError(f"symbol {x} outside the source alphabet")
    return float(w[x].min())


@dataclass(frozen=True)
class PfrEncoding:
    k: int
    candidates_examined: int
    stop_threshold: float
    symbols: tuple = ()

    @property
    def symbol(self) -> int:
        return self.symbols[0]


def encode_many(xs, q: Channel, marginal: Pmf, seed: int, sample_indices,
                budget: int = DEFAULT_BUDGET, first_chunk: int = 16) -> list[PfrEncoding]:
    """Encode a batch of inputs that share a seed.

    ``xs`` is (B,) for single symbols or (B, N) for blocks; sample ``b`` uses
    the substream ``sample_indices[b]``.  Each row's result is the same as
    encoding it alone: chunking never changes the selected index.
    """
    xs = np.asarray(xs, dtype=np.int64)
    if xs.ndim == 1:
        xs = xs[:, None]
    B, N = xs.shape
    if N < 1 or N > MAX_COORDS:
        raise ValueError("block length out of range")
    samples = np.asarray(sample_indices, dtype=np.uint64).reshape(-1)
    if samples.size != B:
        raise DimensionMismatch("one sample index per input is required")
    if not 1 <= budget <= MAX_CANDIDATES:
        raise ValueError(f"budget must lie in [1, {MAX_CANDIDATES}]")
    if np.any(xs < 0) or np.any(xs >= q.in_size):
        raise ValueError("input symbol outside the source alphabet")
    W = weight_table(q, marginal)
    wmin_sym = W.min(axis=1)
    # product weight bound, multiplied in coordinate order like the weights
    wmin = np.ones(B)
    for n in range(N):
        wmin = wmin * wmin_sym[xs[:, n]]

    stream = _Stream(int(seed), samples, marginal, N)
    best = np.full(B, np.inf)
    best_k = np.zeros(B, dtype=np.int64)
    best_sym = np.zeros((B, N), dtype=np.int64)
    t_last = np.zeros(B)
    done_at = np.zeros(B, dtype=np.int64)  # candidates examined, 0 while running
    threshold = np.zeros(B)
    pending = np.arange(B)
    start, chunk = 1, first_chunk
    while pending.size:
        count = min(chunk, budget - start + 1)
        if count <= 0:
            raise BudgetExhausted(f"stop rule not met within {budget} candidates")
        gaps, syms = stream.draw(pending, start, count)
        t = _epochs(stream, pending, t_last[pending], gaps, start)
        xw = xs[pending]
        w = np.ones((pending.size, count))
        for n in range(N):
            w = w * W[xw[:, n][:, None], syms[:, :, n]]
        vals = t * w
        # running minimum including everything before this chunk
        run = np.minimum.accumulate(np.concatenate([best[pending][:, None], vals], axis=1), axis=1)
        j = np.argmin(vals, axis=1)
        improve = vals[np.arange(pending.size), j] < best[pending]
        rows = pending[improve]
        best[rows] = vals[improve, j[improve]]
        best_k[rows] = start + j[improve]
        best_sym[rows] = syms[improve, j[improve]]
        # candidate i+1 stops the search once T_{i+1} w_min >= min over 1..i;
        # candidate 1 has nothing before it, so the check starts at column 1
        stop = t * wmin[pending][:, None] >= run[:, :-1]
        if start == 1:
            stop[:, 0] = False
        hit = stop.any(axis=1)
        first = np.argmax(stop, axis=1)
        rows = pending[hit]
        done_at[rows] = start + first[hit]
        threshold[rows] = t[hit, first[hit]] * wmin[rows]
        # a row that stops keeps the argmin computed above: later columns
        # in this chunk cannot beat it and ties favour the earlier index
        t_last[pending] = t[:, -1]
        pending = pending[~hit]
        start += count
        chunk = min(chunk * 2, 1 << 16)
    return [PfrEncoding(int(best_k[b]), int(done_at[b]), float(threshold[b]), tuple(int(s) for s in best_sym[b]))
            for b in range(B)]


def encode_index(x: int, q: Channel, marginal: Pmf, u: CommonRandomness,
                 budget: int = DEFAULT_BUDGET) -> PfrEncoding:
    """Index K of the candidate selected for input ``x``."""
    return encode_many([x], q, marginal, u.seed, [u.sample_index], budget)[0]


def derive(u: CommonRandomness, i: int, marginal: Pmf) -> tuple[int, float]:
    """Candidate ``i``'s symbol and the uniform behind its epoch gap."""
    if i < 1:
        raise ValueError("candidate indices start at 1")
    w = prf_block(u.seed, u.sample_index, i, 0)
    uni = float((_unit(w[0], w[1]) + 1.0) * TWO_M53)
    stream = _Stream(u.seed, np.array([u.sample_index]), marginal, 1)
    return int(stream.symbols_of(_unit(w[2], w[3]))), uni


def decode_many(ks, marginal: Pmf, seed: int, sample_indices, n_coords: int = 1) -> np.ndarray:
    """Candidate symbols (B, n_coords) for the given indices."""
    ks = np.asarray(ks, dtype=np.int64).reshape(-1)
    if np.any(ks < 1):
        raise ValueError("indices start at 1")
    samples = np.asarray(sample_indices, dtype=np.uint64).reshape(-1)
    stream = _Stream(int(seed), samples, marginal, n_coords)
    out = np.empty((ks.size, n_coords), dtype=np.int64)
    s = stream.samples
    cand = ks.astype(np.uint64)
    w = prf_block(seed, s, cand, 0)
    out[:, 0] = stream.symbols_of(_unit(w[2], w[3]))
    for j in range(1, n_coords // 2 + 1):
        w = prf_block(seed, s, cand, j)
        out[:, 2 * j - 1] = stream.symbols_of(_unit(w[0], w[1]))
        if 2 * j < n_coords:
            out[:, 2 * j] = stream.symbols_of(_unit(w[2], w[3]))
    return out


def decode(k: int, u: CommonRandomness, marginal: Pmf) -> int:
    return int(decode_many([k], marginal, u.seed, [u.sample_index])[0, 0])


def _entropy_of_counts(counts) -> float:
    c = np.asarray([v for v in counts if v > 0], dtype=float)
    p = c / c.sum()
    return max(0.0, float(-(p * np.log2(p)).sum()))


def exact_index_entropy_given_seed(q: Channel, source: Pmf, marginal: Pmf, u: CommonRandomness,
                                   budget: int = DEFAULT_BUDGET) -> float:
    """H[K | U = u]: entropy of the source pushed through x -> K(x, u)."""
    if source.alphabet_size != q.in_size:
        raise DimensionMismatch("source and channel disagree on the alphabet")
    xs = np.flatnonzero(source.probs > 0)
    encs = encode_many(xs, q, marginal, u.seed, [u.sample_index] * xs.size, budget)
    mass: dict[int, float] = {}
    for x, e in zip(xs, encs):
        mass[e.k] = mass.get(e.k, 0.0) + float(source.probs[x])
    return _entropy_of_counts(mass.values())


def plugin_entropy(samples) -> float:
    """Plug-in entropy (bits) of the empirical law of ``samples``."""
    _, counts = np.unique(np.asarray(samples), return_counts=True, axis=0)
    return _entropy_of_counts(counts)


def miller_madow_entropy(samples) -> float:
    """Plug-in entropy plus the Miller-Madow bias correction (bits)."""
    samples = np.asarray(samples)
    _, counts = np.unique(samples, return_counts=True, axis=0)
    n = counts.sum()
    return _entropy_of_counts(counts) + (counts.size - 1) / (2.0 * n * math.log(2.0))


def theorem1_bound(i_bits: float) -> float:
    """I + log2(I + 1) + 4, the index-entropy bound for mutual information I."""
    return i_bits + math.log2(i_bits + 1.0) + 4.0

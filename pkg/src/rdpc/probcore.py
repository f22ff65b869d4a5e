"""Finite-alphabet probability machinery.

Distributions, channels, information quantities in bits, distortions,
marginal divergences and the constraint functionals that parameterise a
rate function.  Every value object validates on construction and is
immutable afterwards; nothing is renormalised behind the caller's back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

PMF_ATOL = 1e-12


class ProbabilityError(ValueError):
    pass


class NegativeEntry(ProbabilityError):
    pass


class SumNotOne(ProbabilityError):
    pass


class DimensionMismatch(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_simplex(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ProbabilityError(f"{what} has non-finite entries")
    if np.any(arr < 0):
        raise NegativeEntry(f"{what} has a negative entry: {arr.min()!r}")
    sums = arr.sum(axis=-1)
    bad = np.abs(sums - 1.0) > PMF_ATOL
    if np.any(bad):
        worst = float(np.atleast_1d(sums)[np.argmax(np.atleast_1d(np.abs(sums - 1.0)))])
        raise SumNotOne(f"{what} sums to {worst!r}, not 1 (atol {PMF_ATOL})")


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over symbols ``0 .. alphabet_size-1``."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.probs)
        if arr.ndim != 1 or arr.size == 0:
            raise ProbabilityError("a pmf needs a non-empty 1-d sequence")
        _check_simplex(arr, "pmf")
        object.__setattr__(self, "probs", arr)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, i):
        return self.probs[i]

    def __eq__(self, other):
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def padded(self, size: int) -> np.ndarray:
        """Probabilities zero-extended to ``size`` symbols."""
        if size < self.alphabet_size:
            raise DimensionMismatch(f"cannot embed {self.alphabet_size} symbols into {size}")
        out = np.zeros(size)
        out[: self.alphabet_size] = self.probs
        return out

    @classmethod
    def bernoulli(cls, p1: float) -> "Pmf":
        return cls([1.0 - p1, p1])

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        return cls(np.full(n, 1.0 / n))


def validate_pmf(probs: Sequence[float]) -> Pmf:
    return Pmf(probs)


@dataclass(frozen=True)
class Channel:
    """Row-stochastic matrix with ``rows[x, xh] = Q(xh | x)``."""

    rows: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.rows)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ProbabilityError("a channel needs a non-empty 2-d matrix")
        _check_simplex(arr, "channel row")
        object.__setattr__(self, "rows", arr)

    @property
    def in_size(self) -> int:
        return self.rows.shape[0]

    @property
    def out_size(self) -> int:
        return self.rows.shape[1]

    def __eq__(self, other):
        return isinstance(other, Channel) and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash(self.rows.tobytes())

    @classmethod
    def identity(cls, n: int, out_size: Optional[int] = None) -> "Channel":
        return cls(np.eye(n, out_size or n))

    @classmethod
    def constant(cls, row: Union[Pmf, Sequence[float]], in_size: int) -> "Channel":
        row = row.probs if isinstance(row, Pmf) else np.asarray(row, dtype=float)
        return cls(np.tile(row, (in_size, 1)))

    @classmethod
    def bsc(cls, eps: float) -> "Channel":
        return cls([[1.0 - eps, eps], [eps, 1.0 - eps]])


@dataclass(frozen=True)
class DistortionMatrix:
    d: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.d)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("distortion must be a non-empty 2-d matrix")
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise ValueError("distortion entries must be non-negative")
        object.__setattr__(self, "d", arr)

    @property
    def shape(self):
        return self.d.shape

    @classmethod
    def hamming(cls, n: int, m: Optional[int] = None) -> "DistortionMatrix":
        return cls(1.0 - np.eye(n, m or n))


@dataclass(frozen=True)
class DivergenceKind:
    """Which divergence compares the source and reconstruction marginals.

    ``values`` assigns a real number to every reconstruction symbol and is
    only used (and required) by the scalar Wasserstein-1 distance; source
    symbol ``i`` shares the value of reconstruction symbol ``i``.
    """

    name: str
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.name not in ("tv", "kl", "w1"):
            raise ValueError(f"unknown divergence {self.name!r}")
        if self.name == "w1":
            if self.values is None or len(self.values) == 0:
                raise ValueError("w1 needs one scalar value per symbol")
            vals = tuple(float(v) for v in self.values)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("w1 values must be finite")
            if len(set(vals)) != len(vals):
                raise ValueError("w1 values must be distinct")
            object.__setattr__(self, "values", vals)
        elif self.values is not None:
            raise ValueError(f"{self.name} takes no value assignment")

    @classmethod
    def w1(cls, values: Sequence[float]) -> "DivergenceKind":
        return cls("w1", tuple(values))


TV = DivergenceKind("tv")
KL = DivergenceKind("kl")


@dataclass(frozen=True)
class Distortion:
    """Expected-distortion functional ``E[d(X, Xh)] <= threshold``."""

    matrix: DistortionMatrix
    threshold: float

    def __post_init__(self):
        if not isinstance(self.matrix, DistortionMatrix):
            object.__setattr__(self, "matrix", DistortionMatrix(self.matrix))
        if math.isnan(self.threshold) or self.threshold < 0:
            raise ValueError("distortion threshold must be >= 0")


@dataclass(frozen=True)
class MarginalDivergence:
    """Divergence between source and reconstruction marginals.

    The optional projections are 0/1 matrices mapping source (resp.
    reconstruction) symbols onto a smaller alphabet before comparison; they
    express per-coordinate constraints on product alphabets.  Without them
    the source pmf is zero-extended to the reconstruction alphabet.
    """

    kind: DivergenceKind
    threshold: float
    source_proj: Optional[np.ndarray] = field(default=None, compare=False)
    recon_proj: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if math.isnan(self.threshold) or self.threshold < 0:
            raise ValueError("divergence threshold must be >= 0")
        if (self.source_proj is None) != (self.recon_proj is None):
            raise ValueError("give both projections or neither")
        if self.source_proj is not None:
            object.__setattr__(self, "source_proj", _frozen(self.source_proj))
            object.__setattr__(self, "recon_proj", _frozen(self.recon_proj))
            if self.source_proj.shape[1] != self.recon_proj.shape[1]:
                raise DimensionMismatch("projections must land on the same alphabet")

    def compared(self, source: Pmf, marginal: np.ndarray):
        """The two pmfs (as arrays) this functional feeds to the divergence."""
        marginal = np.asarray(marginal, dtype=float)
        if self.source_proj is None:
            return source.padded(marginal.shape[-1]), marginal
        if self.source_proj.shape[0] != source.alphabet_size or self.recon_proj.shape[0] != marginal.shape[-1]:
            raise DimensionMismatch("projection shapes do not match the alphabets")
        return source.probs @ self.source_proj, marginal @ self.recon_proj


ConstraintFunctional = Union[Distortion, MarginalDivergence]


def _xlogy_bits(x, y):
    # x * log2(y) with 0 * log 0 = 0
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    pos = np.broadcast_to(x > 0, out.shape)
    xb = np.broadcast_to(x, out.shape)
    yb = np.broadcast_to(y, out.shape)
    with np.errstate(divide="ignore"):
        out[pos] = xb[pos] * np.log2(yb[pos])
    return out


def entropy(p: Pmf) -> float:
    return max(0.0, float(-_xlogy_bits(p.probs, p.probs).sum()))


def _check_dims(source: Pmf, q: Channel):
    if source.alphabet_size != q.in_size:
        raise DimensionMismatch(f"source has {source.alphabet_size} symbols, channel expects {q.in_size}")


def push_joint(source: Pmf, q: Channel) -> np.ndarray:
    _check_dims(source, q)
    return source.probs[:, None] * q.rows


def marginal_recon(source: Pmf, q: Channel) -> Pmf:
    _check_dims(source, q)
    m = source.probs @ q.rows
    # pmf check is applied, never a renormalisation
    return Pmf(m)


def mutual_information(source: Pmf, q: Channel) -> float:
    joint = push_joint(source, q)
    m = joint.sum(axis=0)
    denom = source.probs[:, None] * m[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, joint / np.where(denom > 0, denom, 1.0), 1.0)
    return max(0.0, float(_xlogy_bits(joint, ratio).sum()))


def expected_distortion(source: Pmf, q: Channel, d: DistortionMatrix) -> float:
    _check_dims(source, q)
    if d.shape != q.rows.shape:
        raise DimensionMismatch(f"distortion {d.shape} vs channel {q.rows.shape}")
    return float((push_joint(source, q) * d.d).sum())


def tv_distance(p, q) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def kl_bits(p, q) -> float:
    """KL(p || q) in bits; +inf when p puts mass where q has none."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    supp = p > 0
    if np.any(q[supp] <= 0):
        return math.inf
    with np.errstate(over="ignore"):
        return max(0.0, float((p[supp] * np.log2(p[supp] / q[supp])).sum()))


def w1_scalar(p, q, values) -> float:
    order = np.argsort(values)
    v = np.asarray(values, dtype=float)[order]
    diff = np.cumsum(np.asarray(p, dtype=float)[order] - np.asarray(q, dtype=float)[order])[:-1]
    return float(np.abs(diff) @ np.diff(v))


def _divergence_arrays(kind: DivergenceKind, p, q) -> float:
    if kind.name == "tv":
        return tv_distance(p, q)
    if kind.name == "kl":
        return kl_bits(p, q)
    if len(kind.values) != len(p):
        raise DimensionMismatch(f"w1 has {len(kind.values)} values for {len(p)} symbols")
    return w1_scalar(p, q, kind.values)


def divergence(kind: DivergenceKind, p: Pmf, q: Pmf) -> float:
    """D[p, q]; for KL this is KL(p || q), +inf on a support violation."""
    if p.alphabet_size != q.alphabet_size:
        raise DimensionMismatch(f"{p.alphabet_size} vs {q.alphabet_size} symbols")
    return _divergence_arrays(kind, p.probs, q.probs)


def constraint_value(source: Pmf, q: Channel, c: ConstraintFunctional) -> float:
    if isinstance(c, Distortion):
        return expected_distortion(source, q, c.matrix)
    _check_dims(source, q)
    a, b = c.compared(source, source.probs @ q.rows)
    return _divergence_arrays(c.kind, a, b)


def evaluate_constraints(source: Pmf, q: Channel, cs: Sequence[ConstraintFunctional]) -> list[float]:
    return [constraint_value(source, q, c) for c in cs]

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import h2, mi_by_identity
from rdpc.probcore import (
    KL,
    TV,
    Channel,
    DimensionMismatch,
    Distortion,
    DistortionMatrix,
    DivergenceKind,
    MarginalDivergence,
    NegativeEntry,
    Pmf,
    SumNotOne,
    divergence,
    entropy,
    evaluate_constraints,
    expected_distortion,
    kl_bits,
    marginal_recon,
    mutual_information,
    push_joint,
    validate_pmf,
)

W01 = DivergenceKind.w1([0, 1])


def pmfs(n_min=1, n_max=6):
    def build(ws):
        w = np.array(ws)
        return Pmf(w / w.sum()) if abs((w / w.sum()).sum() - 1) <= 1e-12 else Pmf.uniform(len(ws))

    return st.lists(st.floats(0.0, 1.0), min_size=n_min, max_size=n_max).filter(
        lambda ws: sum(ws) > 1e-3).map(build)


def channels(n, m):
    row = st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m).filter(lambda r: sum(r) > 1e-3)
    return st.lists(row, min_size=n, max_size=n).map(
        lambda rs: Channel(np.array(rs) / np.array(rs).sum(axis=1, keepdims=True)))


# --- validation -------------------------------------------------------------


def test_validate_accepts_pmfs():
    assert validate_pmf([0.5, 0.5]).alphabet_size == 2
    assert np.allclose(validate_pmf([0.3, 0.7]).probs, [0.3, 0.7])


def test_validate_rejects_bad_sum():
    with pytest.raises(SumNotOne):
        validate_pmf([0.6, 0.6])


def test_validate_rejects_negative():
    with pytest.raises(NegativeEntry):
        validate_pmf([1.2, -0.2])


def test_validate_never_renormalises():
    with pytest.raises(SumNotOne):
        validate_pmf([0.5, 0.5 + 1e-9])
    assert validate_pmf([0.5, 0.5 + 1e-13]).probs[1] == 0.5 + 1e-13


def test_values_are_immutable():
    p = Pmf([0.5, 0.5])
    with pytest.raises(ValueError):
        p.probs[0] = 1.0


def test_channel_rows_validated():
    with pytest.raises(SumNotOne):
        Channel([[0.5, 0.4], [0.5, 0.5]])


# --- information quantities -------------------------------------------------


def test_entropy_examples():
    assert entropy(Pmf.bernoulli(0.5)) == pytest.approx(1.0, abs=1e-15)
    assert entropy(Pmf([1.0, 0.0])) == 0.0
    assert entropy(Pmf.bernoulli(0.3)) == pytest.approx(h2(0.3), abs=1e-12)
    assert entropy(Pmf.bernoulli(0.3)) == pytest.approx(0.881290899, abs=1e-9)


def test_push_joint_examples():
    assert np.allclose(push_joint(Pmf.bernoulli(0.5), Channel.identity(2)), np.diag([0.5, 0.5]))
    src = Pmf([0.2, 0.5, 0.3])
    row = Pmf([0.1, 0.6, 0.3])
    assert np.allclose(push_joint(src, Channel.constant(row, 3)), np.outer(src.probs, row.probs))
    assert np.allclose(push_joint(Pmf.bernoulli(0.5), Channel.bsc(0.25)), [[0.375, 0.125], [0.125, 0.375]])


def test_push_joint_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        push_joint(Pmf.uniform(3), Channel.identity(2))


def test_marginal_examples():
    for eps in (0.0, 0.1, 0.25, 0.5):
        assert np.allclose(marginal_recon(Pmf.bernoulli(0.5), Channel.bsc(eps)).probs, [0.5, 0.5])
    src = Pmf([0.2, 0.5, 0.3])
    assert np.allclose(marginal_recon(src, Channel.identity(3)).probs, src.probs)
    assert np.allclose(marginal_recon(Pmf.bernoulli(0.3), Channel.bsc(0.25)).probs, [0.6, 0.4])


def test_mutual_information_examples():
    assert mutual_information(Pmf.bernoulli(0.3), Channel.constant([0.4, 0.6], 2)) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(Pmf.bernoulli(0.3), Channel.identity(2)) == pytest.approx(h2(0.3), abs=1e-12)
    assert mutual_information(Pmf.bernoulli(0.5), Channel.bsc(0.25)) == pytest.approx(1 - h2(0.25), abs=1e-12)
    assert mutual_information(Pmf.bernoulli(0.5), Channel.bsc(0.25)) == pytest.approx(0.18872187554, abs=1e-10)


def test_expected_distortion_examples():
    H = DistortionMatrix.hamming(2)
    assert expected_distortion(Pmf.bernoulli(0.3), Channel.identity(2), H) == 0.0
    for p in (0.1, 0.5, 0.8):
        assert expected_distortion(Pmf.bernoulli(p), Channel.bsc(0.25), H) == pytest.approx(0.25)
    assert expected_distortion(Pmf.bernoulli(0.3), Channel.constant([1.0, 0.0], 2), H) == pytest.approx(0.3)


def test_divergence_examples():
    p, q = Pmf.bernoulli(0.5), Pmf.bernoulli(0.25)
    assert divergence(TV, p, p) == 0.0
    assert divergence(TV, p, q) == pytest.approx(0.25)
    # KL(Bern(.5) || Bern(.25)) = 0.5 log2(0.5/0.75) + 0.5 log2(0.5/0.25)
    assert divergence(KL, p, q) == pytest.approx(0.5 * math.log2(2 / 3) + 0.5, abs=1e-12)
    assert divergence(KL, p, q) == pytest.approx(0.20752, abs=1e-5)
    assert divergence(W01, p, q) == pytest.approx(0.25)


def test_kl_support_violation_is_infinite():
    assert divergence(KL, Pmf.bernoulli(0.5), Pmf([1.0, 0.0])) == math.inf
    assert kl_bits([1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)


def test_divergence_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        divergence(TV, Pmf.uniform(2), Pmf.uniform(3))


def test_w1_needs_distinct_values():
    with pytest.raises(ValueError):
        DivergenceKind.w1([0, 0])
    with pytest.raises(ValueError):
        DivergenceKind("tv", (0.0, 1.0))


def test_w1_unsorted_values():
    kind = DivergenceKind.w1([2.0, 0.0, 1.0])
    # mass 1 moves from value 2 to value 0
    assert divergence(kind, Pmf([1, 0, 0]), Pmf([0, 1, 0])) == pytest.approx(2.0)


def test_evaluate_constraints_examples():
    H = DistortionMatrix.hamming(2)
    cs = [Distortion(H, 0.0), MarginalDivergence(TV, 0.0)]
    assert evaluate_constraints(Pmf.bernoulli(0.3), Channel.identity(2), cs) == [0.0, 0.0]
    src = Pmf.bernoulli(0.5)
    assert evaluate_constraints(src, Channel.constant(src, 2), cs) == pytest.approx([0.5, 0.0])
    assert evaluate_constraints(Pmf.bernoulli(0.3), Channel.bsc(0.25), cs) == pytest.approx([0.25, 0.1])


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        Distortion(DistortionMatrix.hamming(2), -0.1)
    with pytest.raises(ValueError):
        MarginalDivergence(TV, -1.0)


# --- properties -------------------------------------------------------------


@given(pmfs())
def test_entropy_range(p):
    h = entropy(p)
    assert 0.0 <= h <= math.log2(p.alphabet_size) + 1e-12


@settings(max_examples=60)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(pmfs(n, n), channels(n, 3))))
def test_mi_identity_cross_check(args):
    p, q = args
    mi = mutual_information(p, q)
    assert mi >= 0.0
    assert mi == pytest.approx(max(mi_by_identity(p.probs, q.rows), 0.0), abs=1e-9)
    assert abs(marginal_recon(p, q).probs.sum() - 1.0) <= 1e-12


@settings(max_examples=60)
@given(st.integers(2, 5).flatmap(lambda n: st.tuples(pmfs(n, n), pmfs(n, n))))
def test_divergence_properties(args):
    p, q = args
    vals = np.arange(p.alphabet_size, dtype=float) * 0.7
    w1 = DivergenceKind.w1(vals)
    for kind in (TV, KL, w1):
        assert divergence(kind, p, q) >= 0.0
        assert divergence(kind, p, p) <= 1e-12
    assert divergence(TV, p, q) <= 1.0 + 1e-12
    assert divergence(w1, p, q) <= vals.max() - vals.min() + 1e-12
    # distinct laws give positive distances once the difference is above float
    # resolution; a 1e-73 entry vanishes inside the W1 cumulative sums
    if np.abs(p.probs - q.probs).max() > 1e-12:
        assert divergence(TV, p, q) > 0 and divergence(w1, p, q) > 0

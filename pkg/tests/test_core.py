import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segcalib import BinConfig, assign_bin, build_report, empty_report, merge_reports
from segcalib.errors import ConfigError, InputDomainError, ShapeError

from conftest import random_case
from oracles import brute_force_report


class TestAssignBin:
    def test_lower_edge(self):
        assert assign_bin(0.0, BinConfig(20)) == 0

    def test_closed_final_bin(self):
        assert assign_bin(1.0, BinConfig(20)) == 19

    def test_interior_edge_goes_up(self):
        # 0.05 sits exactly on the bin0/bin1 edge; half-open intervals send
        # edge values to the upper bin
        assert assign_bin(0.05, BinConfig(20)) == 1

    def test_edge_sweep_brute_force(self):
        # every edge value m/M must land in bin m (except 1.0 -> M-1)
        for m_bins in (2, 5, 20):
            cfg = BinConfig(m_bins)
            for m in range(m_bins):
                assert assign_bin(m / m_bins, cfg) == m
            assert assign_bin(1.0, cfg) == m_bins - 1

    def test_rejects_out_of_range(self):
        with pytest.raises(InputDomainError):
            assign_bin(1.5, BinConfig(20))
        with pytest.raises(InputDomainError):
            assign_bin(-0.1, BinConfig(20))
        with pytest.raises(InputDomainError):
            assign_bin(np.nan, BinConfig(20))

    @given(st.floats(min_value=0.0, max_value=1.0), st.integers(2, 100))
    def test_partition_property(self, p, m_bins):
        cfg = BinConfig(m_bins)
        m = assign_bin(p, cfg)
        assert 0 <= m < m_bins
        if p == 1.0:
            assert m == m_bins - 1
        else:
            assert m / m_bins <= p < (m + 1) / m_bins

    def test_min_bins(self):
        with pytest.raises(ConfigError):
            BinConfig(1)


class TestBuildReport:
    def test_hand_fixture(self, hand_fixture):
        probs, labels, cfg = hand_fixture
        r = build_report(probs, labels, cfg)
        assert r.total_voxels == 4
        np.testing.assert_array_equal(r.counts, [[2, 2]])
        np.testing.assert_allclose(r.expected(), [[0.3, 0.8]])
        np.testing.assert_allclose(r.observed(), [[0.5, 1.0]])

    def test_perfect_calibration_zero_one(self):
        # probabilities exactly equal to the one-hot labels: o = e in every
        # non-empty bin
        labels = np.array([0, 1, 1, 0, 1])
        probs = np.stack([(labels == 0).astype(float), (labels == 1).astype(float)])
        r = build_report(probs, labels, BinConfig(4))
        mask = r.nonempty()
        np.testing.assert_allclose(r.observed()[mask], r.expected()[mask])

    def test_empty_region_rejected(self):
        with pytest.raises(ShapeError):
            build_report(np.zeros((2, 0)), np.zeros(0, dtype=int), BinConfig(4))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            build_report(np.zeros((2, 4)) + 0.5, np.zeros(5, dtype=int), BinConfig(4))

    @pytest.mark.parametrize("num_classes,m_bins", [(1, 2), (2, 5), (4, 20)])
    def test_matches_brute_force(self, num_classes, m_bins):
        rng = np.random.default_rng(42)
        probs, labels = random_case(rng, 500, num_classes)
        r = build_report(probs, labels, BinConfig(m_bins))
        counts, sum_prob, sum_label, n = brute_force_report(probs, labels, m_bins)
        np.testing.assert_array_equal(r.counts, counts)
        np.testing.assert_allclose(r.sum_prob, sum_prob, atol=1e-12)
        np.testing.assert_array_equal(r.sum_label, sum_label)
        assert r.total_voxels == n

    def test_partition_invariant(self):
        rng = np.random.default_rng(7)
        probs, labels = random_case(rng, 1000, 3)
        r = build_report(probs, labels, BinConfig(20))
        np.testing.assert_array_equal(r.counts.sum(axis=1), [1000] * 3)
        for c in range(3):
            assert r.sum_label[c].sum() == (labels == c).sum()

    def test_chunked_equals_single_pass(self):
        rng = np.random.default_rng(3)
        probs, labels = random_case(rng, 1000, 2)
        cfg = BinConfig(20)
        whole = build_report(probs, labels, cfg)
        chunked = build_report(probs, labels, cfg, chunk_voxels=333)
        np.testing.assert_array_equal(whole.counts, chunked.counts)
        np.testing.assert_allclose(whole.sum_prob, chunked.sum_prob, atol=1e-12)
        np.testing.assert_array_equal(whole.sum_label, chunked.sum_label)

    def test_accumulates_in_float64(self):
        probs = np.full((1, 100), 0.1, dtype=np.float32)
        labels = np.zeros(100, dtype=int)
        r = build_report(probs, labels, BinConfig(5))
        assert r.sum_prob.dtype == np.float64

    def test_simplex_check_optional(self):
        probs = np.array([[0.5, 0.5], [0.9, 0.9]])
        labels = np.array([0, 1])
        build_report(probs, labels, BinConfig(5))  # no sum check by default
        with pytest.raises(InputDomainError):
            build_report(probs, labels, BinConfig(5), check_sum=True)


class TestMergeReports:
    def test_identity(self):
        rng = np.random.default_rng(1)
        probs, labels = random_case(rng, 64, 2)
        r = build_report(probs, labels, BinConfig(5))
        merged = merge_reports(r, empty_report(2, BinConfig(5)))
        np.testing.assert_array_equal(merged.counts, r.counts)
        assert merged.total_voxels == r.total_voxels

    def test_commutative(self):
        rng = np.random.default_rng(2)
        pa, la = random_case(rng, 64, 2)
        pb, lb = random_case(rng, 32, 2)
        a = build_report(pa, la, BinConfig(5))
        b = build_report(pb, lb, BinConfig(5))
        ab, ba = merge_reports(a, b), merge_reports(b, a)
        np.testing.assert_array_equal(ab.counts, ba.counts)
        np.testing.assert_array_equal(ab.sum_label, ba.sum_label)
        np.testing.assert_allclose(ab.sum_prob, ba.sum_prob)

    def test_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            merge_reports(empty_report(2, BinConfig(5)), empty_report(2, BinConfig(10)))
        with pytest.raises(ShapeError):
            merge_reports(empty_report(2, BinConfig(5)), empty_report(3, BinConfig(5)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 5))
    def test_split_merge_matches_single_pass(self, seed, pieces):
        rng = np.random.default_rng(seed)
        probs, labels = random_case(rng, 1000, 2)
        cfg = BinConfig(10)
        whole = build_report(probs, labels, cfg)
        cuts = np.linspace(0, 1000, pieces + 1).astype(int)
        merged = empty_report(2, cfg)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            merged = merge_reports(
                merged, build_report(probs[:, lo:hi], labels[lo:hi], cfg)
            )
        np.testing.assert_array_equal(whole.counts, merged.counts)
        np.testing.assert_array_equal(whole.sum_label, merged.sum_label)
        np.testing.assert_allclose(whole.sum_prob, merged.sum_prob, atol=1e-9)
        assert whole.total_voxels == merged.total_voxels

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowgen.exceptions import InvalidInput, ShapeError
from bowgen.metrics import (
    MetricsReport, aggregate, attack_frames, bow_scores, bowing_attacks, bowing_direction,
    bowing_f1, cosine_similarity, evaluate, l1_avg, l1_hand_avg, match_attacks, pck, read_table,
    write_table,
)
from bowgen.skeleton import WRIST_COLUMNS, SkeletonSequence

from oracles import f1_from_counts, max_matching, max_matching_small


def seq_from(times, length):
    a = np.zeros(length, dtype=int)
    a[list(times)] = 1
    return a


class TestL1:
    def test_identity(self, rng):
        x = rng.standard_normal((5, 45))
        assert l1_avg(x, x) == 0 and l1_hand_avg(x, x) == 0

    def test_offset(self, rng):
        x = rng.standard_normal((5, 45))
        assert l1_avg(x + 0.01, x) == pytest.approx(0.01)
        assert l1_hand_avg(x + 0.01, x) == pytest.approx(0.01)

    def test_hand_uses_wrist_only(self, rng):
        x = rng.standard_normal((4, 45))
        y = x.copy()
        y[:, 0] += 1.0
        assert l1_hand_avg(y, x) == 0 and l1_avg(y, x) == pytest.approx(1 / 45)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            l1_avg(np.zeros((3, 45)), np.zeros((4, 45)))


class TestPCK:
    def test_identity(self, rng):
        x = rng.standard_normal((4, 45))
        assert pck(x, x) == 1.0

    def test_unit_cube_offset(self):
        corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], float)
        gt = corners.reshape(1, -1)
        pred = (corners + [0.15, 0, 0]).reshape(1, -1)
        assert pck(pred, gt, alphas=[0.1]) == 0.0
        assert pck(pred, gt, alphas=[0.2]) == 1.0
        assert pck(pred, gt) == 0.5

    def test_degenerate_bbox(self):
        gt = np.zeros((1, 6))
        assert pck(gt, gt) == 1.0
        assert pck(gt + 1e-9, gt) == 0.0

    def test_bbox_from_ground_truth(self):
        gt = np.array([[0, 0, 0, 1, 0, 0.0]])
        pred = np.array([[0.15, 0, 0, 50, 0, 0.0]])
        assert pck(pred, gt, alphas=[0.2]) == 0.5

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 1000), st.floats(-10, 10), st.floats(0.1, 10))
    def test_translation_and_scale_invariance(self, seed, shift, scale):
        r = np.random.default_rng(seed)
        g = r.standard_normal((3, 45))
        p = g + 0.2 * r.standard_normal((3, 45))
        base = pck(p, g)
        assert pck(p + shift, g + shift) == pytest.approx(base)
        assert pck(scale * p, scale * g) == pytest.approx(base)

    def test_joint_order_invariance(self, rng):
        g = rng.standard_normal((5, 45))
        p = g + 0.3 * rng.standard_normal((5, 45))
        perm = rng.permutation(15)
        cols = (3 * perm[:, None] + np.arange(3)).ravel()
        assert pck(p[:, cols], g[:, cols]) == pytest.approx(pck(p, g))
        assert l1_avg(p[:, cols], g[:, cols]) == pytest.approx(l1_avg(p, g))


class TestBowingExtraction:
    def test_direction_hand(self):
        assert bowing_direction([0, 1, 2, 1, 0]).tolist() == [1, 1, 0, 0]

    def test_direction_constant_and_increasing(self):
        assert bowing_direction(np.full(6, 2.0)).tolist() == [0] * 5
        assert bowing_direction(np.arange(6.0)).tolist() == [1] * 5

    def test_attacks_hand(self):
        assert bowing_attacks([1, 1, 0, 0]).tolist() == [0, 1, 0]

    def test_attacks_constant_and_alternating(self):
        assert bowing_attacks([1] * 5).tolist() == [0] * 4
        assert bowing_attacks([1, 0, 1, 0, 1]).tolist() == [1] * 4

    def test_lengths(self):
        assert len(bowing_attacks(bowing_direction(np.zeros(10)))) == 8

    def test_attack_frame_is_turning_point(self):
        y = np.array([0, 1, 2, 3, 2, 1, 2.0])
        assert attack_frames(bowing_attacks(bowing_direction(y))).tolist() == [3, 5]

    def test_too_short(self):
        with pytest.raises(InvalidInput):
            bowing_direction([1.0])
        with pytest.raises(InvalidInput):
            bowing_attacks([1])


class TestF1:
    def test_identity(self):
        a = seq_from([3, 10, 20], 30)
        assert bowing_f1(a, a) == (1.0, 1.0, 1.0)

    def test_one_far_miss(self):
        p, r, f = bowing_f1(seq_from([10, 50], 100), seq_from([12, 80], 100), 3)
        assert (p, r, f) == (0.5, 0.5, 0.5)

    def test_two_preds_one_gt(self):
        p, r, f = bowing_f1(seq_from([10, 11], 30), seq_from([12], 30), 3)
        assert (p, r) == (0.5, 1.0) and f == pytest.approx(2 / 3)

    def test_empty_cases(self):
        z = np.zeros(10, int)
        assert bowing_f1(z, z)[2] == 1.0
        assert bowing_f1(z, seq_from([2], 10))[2] == 0.0
        assert bowing_f1(seq_from([2], 10), z)[2] == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            bowing_f1(np.zeros(5), np.zeros(6))

    def test_nearest_greedy_is_suboptimal_here(self):
        # 10 takes 11 (nearest), leaving 13 with no partner; the optimum pairs 10-8 and 13-11
        assert match_attacks([10, 13], [8, 11], 3, strategy="nearest") == 1
        assert match_attacks([10, 13], [8, 11], 3) == 2
        assert max_matching_small([10, 13], [8, 11], 3) == 2

    def test_unknown_strategy(self):
        with pytest.raises(InvalidInput):
            match_attacks([1], [1], 3, strategy="best")

    def test_oracles_agree(self, rng):
        for _ in range(200):
            p = sorted(rng.choice(20, rng.integers(0, 6), replace=False).tolist())
            g = sorted(rng.choice(20, rng.integers(0, 6), replace=False).tolist())
            tol = int(rng.integers(0, 4))
            assert max_matching(p, g, tol) == max_matching_small(p, g, tol)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(5, 60).flatmap(lambda n: st.tuples(
        st.lists(st.booleans(), min_size=n, max_size=n),
        st.lists(st.booleans(), min_size=n, max_size=n))), st.integers(0, 5))
    def test_matches_maximum_matching(self, seqs, tol):
        pa, ga = np.array(seqs[0], int), np.array(seqs[1], int)
        pt, gt = np.flatnonzero(pa).tolist(), np.flatnonzero(ga).tolist()
        tp = max_matching(pt, gt, tol)
        assert match_attacks(pt, gt, tol) == tp
        assert bowing_f1(pa, ga, tol)[2] == pytest.approx(f1_from_counts(tp, len(pt), len(gt)))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.booleans(), min_size=40, max_size=40),
           st.lists(st.booleans(), min_size=40, max_size=40), st.integers(0, 4))
    def test_symmetric(self, a, b, tol):
        pab, rab, fab = bowing_f1(a, b, tol)
        pba, rba, fba = bowing_f1(b, a, tol)
        assert fab == pytest.approx(fba)
        assert (pab, rab) == pytest.approx((rba, pba))


class TestCosine:
    def test_identity_and_negation(self, rng):
        w = rng.standard_normal((10, 3))
        assert cosine_similarity(w, w) == pytest.approx(1.0)
        assert cosine_similarity(-w, w) == pytest.approx(-1.0)

    def test_hand(self):
        p = np.array([[1.0, 1, 2], [0, 3, 1]])
        g = np.array([[0.0, 1, 2], [1, 3, 1]])
        assert cosine_similarity(p, g) == pytest.approx(2 / 3)

    def test_zero_trajectory(self):
        p = np.zeros((4, 3))
        g = np.ones((4, 3))
        assert cosine_similarity(p, g) == 0.0

    def test_frame_mode(self):
        p = np.array([[1.0, 0, 0], [0, 1, 0]])
        g = np.array([[1.0, 0, 0], [1, 0, 0]])
        assert cosine_similarity(p, g, mode="frame") == pytest.approx(0.5)
        with pytest.raises(InvalidInput):
            cosine_similarity(p, g, mode="x")


def _swing(n, period, phase=0.0):
    t = np.arange(n)
    return np.abs(((t + phase) / period) % 2 - 1)


class TestEvaluate:
    def _seq(self, rng, n=120):
        x = rng.standard_normal((n, 45)) * 0.1
        for a, c in enumerate(WRIST_COLUMNS):
            x[:, c] = _swing(n, 15, 3 * a) + 0.5
        return SkeletonSequence(x)

    def test_identity(self, rng):
        s = self._seq(rng)
        r = evaluate(s, s)
        assert (r.l1_avg, r.l1_hand_avg, r.pck) == (0, 0, 1)
        assert (r.bow_x, r.bow_y, r.bow_z, r.bow_avg) == (1, 1, 1, 1)
        assert r.cosine_similarity == pytest.approx(1.0)

    def test_time_reversal_is_worse(self, rng):
        s = self._seq(rng)
        rev = SkeletonSequence(s.joints[::-1].copy())
        ident, r = evaluate(s, s), evaluate(rev, s)
        assert r.bow_avg < ident.bow_avg and r.cosine_similarity < ident.cosine_similarity

    def test_bow_avg_is_axis_mean(self, rng):
        s = self._seq(rng)
        p = SkeletonSequence(s.joints + 0.05 * rng.standard_normal(s.joints.shape))
        r = evaluate(p, s)
        assert r.bow_avg == pytest.approx((r.bow_x + r.bow_y + r.bow_z) / 3)
        assert [r.bow_x, r.bow_y, r.bow_z] == bow_scores(p.joints[:, WRIST_COLUMNS], s.joints[:, WRIST_COLUMNS])

    def test_frame_rate_mismatch(self, rng):
        s = self._seq(rng)
        with pytest.raises(InvalidInput):
            evaluate(SkeletonSequence(s.joints, 25.0), s)

    def test_json_round_trip(self, rng):
        s = self._seq(rng)
        r = evaluate(SkeletonSequence(s.joints * 1.1), s)
        assert MetricsReport.from_json(r.to_json()) == r

    def test_table(self, rng, tmp_path):
        s = self._seq(rng)
        reps = [("a", evaluate(s, s)), ("b", evaluate(SkeletonSequence(s.joints[::-1].copy()), s))]
        write_table(tmp_path / "t.csv", reps + [("mean", aggregate(dict(reps)))])
        header = (tmp_path / "t.csv").read_text().splitlines()[0]
        assert header == "piece,l1_avg,l1_hand_avg,pck,bow_x,bow_y,bow_z,bow_avg,cosine_similarity"
        rows = read_table(tmp_path / "t.csv")
        assert [n for n, _ in rows] == ["a", "b", "mean"]
        assert rows[2][1].bow_avg == pytest.approx((reps[0][1].bow_avg + reps[1][1].bow_avg) / 2, abs=1e-6)

    def test_aggregate_empty(self):
        with pytest.raises(InvalidInput):
            aggregate([])

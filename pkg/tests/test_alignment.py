import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowgen.alignment import (
    BeatGrid, NormStats, dtw, resample_features, resample_time, segment, split_folds,
    train_val_split, transfer_beats, zscore_apply, zscore_fit,
)
from bowgen.audio_features import AudioFeatureSequence
from bowgen.exceptions import InvalidInput, ShapeError

from oracles import dtw_brute, dtw_paths, path_cost

small_seq = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=5)


class TestDTW:
    def test_identical_is_diagonal(self, rng):
        a = rng.standard_normal((6, 3))
        path, cost = dtw(a, a)
        assert cost == 0.0
        assert path == [(i, i) for i in range(6)]

    def test_hand_example(self):
        path, cost = dtw([0, 1, 2], [0, 1, 1, 2])
        assert cost == 0.0
        assert path == [(0, 0), (1, 1), (1, 2), (2, 3)]

    def test_path_enumeration_count(self):
        # Delannoy numbers count monotone paths with the three-step set
        assert [len(dtw_paths(k, k)) for k in range(1, 5)] == [1, 3, 13, 63]

    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            dtw(np.zeros((0, 2)), np.zeros((3, 2)))

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            dtw(np.zeros((2, 2)), np.zeros((3, 3)))

    @settings(max_examples=60, deadline=None)
    @given(small_seq, small_seq)
    def test_matches_brute_force(self, a, b):
        path, cost = dtw(a, b)
        assert cost == pytest.approx(dtw_brute(a, b), abs=1e-9)
        assert path_cost(a, b, path) == pytest.approx(cost, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(small_seq, small_seq)
    def test_symmetric(self, a, b):
        assert dtw(a, b)[1] == pytest.approx(dtw(b, a)[1], abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(small_seq, small_seq)
    def test_path_is_valid(self, a, b):
        path, _ = dtw(a, b)
        assert path[0] == (0, 0) and path[-1] == (len(a) - 1, len(b) - 1)
        for (i0, j0), (i1, j1) in zip(path, path[1:]):
            assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}

    def test_zero_cost_iff_equal(self, rng):
        a = rng.standard_normal((5, 2))
        b = a.copy()
        b[2, 1] += 1e-6
        assert dtw(a, a)[1] == 0.0
        assert dtw(a, b)[1] > 0


class TestTransferBeats:
    def test_identity_path(self):
        path = [(i, i) for i in range(100)]
        frames, warns = transfer_beats(BeatGrid((0.0, 0.5, 1.0, 2.0)), path)
        assert frames.tolist() == [0, 15, 30, 60] and warns == []

    def test_inserted_frame(self):
        path, _ = dtw([0, 1, 2], [0, 1, 1, 2])
        frames, _ = transfer_beats([2 / 30], path)
        assert frames.tolist() == [3]

    def test_empty(self):
        frames, warns = transfer_beats(BeatGrid(()), [(0, 0)])
        assert len(frames) == 0 and warns == []

    def test_beyond_end_is_clamped(self):
        path = [(i, i) for i in range(10)]
        frames, warns = transfer_beats([0.1, 5.0], path)
        assert frames.tolist() == [3, 9] and len(warns) == 1

    def test_nondecreasing(self, rng):
        a, b = rng.standard_normal(40), rng.standard_normal(55)
        path, _ = dtw(a, b)
        frames, _ = transfer_beats(np.arange(0, 1.3, 0.1), path)
        assert np.all(np.diff(frames) >= 0)

    def test_beat_grid_validation(self):
        with pytest.raises(InvalidInput):
            BeatGrid((1.0, 1.0))
        with pytest.raises(InvalidInput):
            BeatGrid((-0.5,))


class TestSegment:
    def test_boundary_rule(self):
        f, s = np.zeros((1800, 28)), np.zeros((1800, 45))
        segs = segment(f, s, [0, 450, 900])
        assert [x.start_frame for x in segs] == [0, 450, 900]
        assert all(x.features.shape == (900, 28) and x.skeleton.shape == (900, 45) for x in segs)

    def test_no_beats(self):
        assert segment(np.zeros((1000, 28)), np.zeros((1000, 45)), []) == []

    def test_short_sequence(self):
        assert segment(np.zeros((899, 28)), np.zeros((899, 45)), [0]) == []

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            segment(np.zeros((10, 28)), np.zeros((11, 45)), [0], length=5)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 20), st.lists(st.integers(-5, 80), max_size=10))
    def test_never_out_of_bounds(self, n, length, beats):
        f = np.arange(n * 28, dtype=float).reshape(n, 28)
        segs = segment(f, np.zeros((n, 45)), beats, length=length)
        for sg in segs:
            assert sg.features.shape == (length, 28)
            np.testing.assert_array_equal(sg.features, f[sg.start_frame:sg.start_frame + length])
        assert len(segs) == len({b for b in beats if 0 <= b and b + length <= n})


class TestZScore:
    def test_training_data_standardised(self, rng):
        x = rng.normal(3, 2, (500, 28))
        out = zscore_apply(x, zscore_fit(x))
        np.testing.assert_allclose(out.mean(axis=0), 0, atol=1e-6)
        np.testing.assert_allclose(out.std(axis=0), 1, atol=1e-6)

    def test_constant_column(self, rng):
        x = rng.standard_normal((50, 28))
        x[:, 4] = 7.0
        stats = zscore_fit(x)
        assert stats.std[4] == 1e-8
        assert np.all(zscore_apply(x, stats)[:, 4] == 0)

    def test_stats_round_trip(self, rng):
        stats = zscore_fit(rng.standard_normal((10, 28)))
        back = NormStats.from_dict(stats.to_dict())
        np.testing.assert_array_equal(back.mean, stats.mean)

    def test_too_few_frames(self):
        with pytest.raises(InvalidInput):
            zscore_fit(np.zeros((1, 28)))


class TestResample:
    def test_identity(self, rng):
        x = rng.standard_normal((20, 3))
        np.testing.assert_array_equal(resample_time(x, 1.0), x)

    def test_ramp_speed_two(self):
        ramp = np.linspace(0, 1, 101)[:, None]
        out = resample_time(ramp, 2.0)
        assert out.shape == (50, 1) or out.shape == (51, 1)
        assert out[0, 0] == 0 and out[-1, 0] == 1
        np.testing.assert_allclose(out[:, 0], np.linspace(0, 1, len(out)), atol=1e-12)

    def test_half_speed_doubles(self):
        seq = AudioFeatureSequence(np.zeros((40, 28)))
        assert resample_features(seq, 0.5).frames.shape == (80, 28)

    def test_invalid_speed(self):
        with pytest.raises(InvalidInput):
            resample_time(np.zeros((4, 1)), 0.0)

    @pytest.mark.parametrize("speed", [0.5, 0.75, 1.5, 2.0])
    def test_round_trip_smooth(self, speed):
        t = np.linspace(0, 1, 200)
        x = np.stack([np.sin(2 * np.pi * t), np.cos(3 * t), t ** 2], axis=1)
        back = resample_time(resample_time(x, speed), 1 / speed)
        if len(back) != len(x):
            back = resample_time(back, len(back) / len(x))
        assert np.sqrt(np.mean((back - x) ** 2)) < 1e-3


class TestFolds:
    def test_two_pieces(self):
        assert split_folds(["A", "B"]) == [(["B"], ["A"]), (["A"], ["B"])]

    def test_fourteen(self):
        pieces = [f"p{i}" for i in range(14)]
        folds = split_folds(pieces, k=14)
        assert len(folds) == 14
        tests = [t for _, test in folds for t in test]
        assert sorted(tests) == sorted(pieces)
        assert all(set(tr).isdisjoint(te) for tr, te in folds)

    def test_duplicates(self):
        with pytest.raises(InvalidInput):
            split_folds(["a", "a"])

    def test_train_val_split(self):
        items = list(range(50))
        tr, va = train_val_split(items, 0.2, seed=3)
        assert len(va) == 10 and sorted(tr + va) == items
        assert train_val_split(items, 0.2, seed=3) == (tr, va)
        assert train_val_split(items, 0.2, seed=4) != (tr, va)

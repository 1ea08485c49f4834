import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtt import Config
from mtt.config import ConfigError
from mtt.partition import (
    CountCurve,
    band_cuts,
    format_partition_debug,
    gradient,
    median_filter,
    partition_adaptive,
    partition_fixed,
)


def spans(subs):
    return [(s.first, s.last) for s in subs]


def curve_of(filtered):
    # a curve whose raw and filtered counts coincide
    return CountCurve(list(filtered), list(filtered))


@pytest.mark.parametrize("raw, w, out", [
    ([4, 4, 12, 4, 4], 3, [4, 4, 4, 4, 4]),
    ([1, 2, 3, 4, 5], 3, [1, 2, 3, 4, 5]),
    ([9, 1, 7, 3], 1, [9, 1, 7, 3]),
])
def test_median_filter_examples(raw, w, out):
    assert median_filter(raw, w) == out


def test_median_filter_even_window_rejected():
    with pytest.raises(ConfigError):
        median_filter([1, 2, 3], 4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=60), st.sampled_from([1, 3, 5, 7]))
def test_median_filter_matches_padded_reference(raw, w):
    half = w // 2
    padded = [raw[0]] * half + raw + [raw[-1]] * half
    expected = [int(np.median(padded[i:i + w])) for i in range(len(raw))]
    got = median_filter(raw, w)
    assert got == expected
    for i, v in enumerate(got):
        assert v in padded[i:i + w]


def test_gradient_examples():
    assert gradient([7, 7], 1) == 0
    assert gradient([12, 9], 1) == 3
    assert gradient([10, 0, 20], 1, delta=2) == 5
    with pytest.raises(IndexError):
        gradient([1, 2], 2)


def test_adaptive_band_cut_then_total_fits():
    subs = partition_adaptive(curve_of([10, 10, 10, 20, 20, 20]), Config())
    assert spans(subs) == [(1, 3), (4, 6)]
    assert [s.detection_total for s in subs] == [30, 60]


def test_adaptive_total_cap_prefix_sums():
    assert spans(partition_adaptive(curve_of([30, 30, 30]), Config())) == [(1, 2), (3, 3)]


def test_adaptive_flat_curve_uses_length_cap():
    subs = partition_adaptive(curve_of([5] * 100), Config())
    assert len(subs) == 20
    assert all(len(s) == 5 for s in subs)


def test_adaptive_empty_sequence():
    assert partition_adaptive(curve_of([]), Config()) == []


def test_single_frame_over_budget_kept_as_length_one():
    subs = partition_adaptive(curve_of([3, 200, 3]), Config(count_band=1000.0))
    assert all(s.detection_total <= 70 or len(s) == 1 for s in subs)
    assert (2, 2) in spans(subs)


def test_band_cuts_flat_is_one_segment():
    assert band_cuts([8] * 40, 5.0) == [(1, 40)]


@pytest.mark.parametrize("n, length, stride, out", [
    (10, 4, 4, [(1, 4), (5, 8), (9, 10)]),
    (5, 3, 1, [(1, 3), (2, 4), (3, 5)]),
    (2, 5, 5, [(1, 2)]),
])
def test_fixed_and_sliding_examples(n, length, stride, out):
    assert spans(partition_fixed(n, length, stride)) == out


def test_sliding_window_count():
    assert len(partition_fixed(30, 5, 1)) == 30 - 5 + 1


def test_fixed_rejects_stride_beyond_length():
    with pytest.raises(ConfigError):
        partition_fixed(10, 2, 3)


def test_fixed_length_one_is_singletons():
    assert spans(partition_fixed(6, 1, 1)) == [(t, t) for t in range(1, 7)]


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 60), max_size=120))
def test_adaptive_tiles_and_respects_caps(raw):
    cfg = Config()
    curve = CountCurve.from_counts(raw, cfg.median_window)
    subs = partition_adaptive(curve, cfg)
    covered = [t for s in subs for t in range(s.first, s.last + 1)]
    assert covered == list(range(1, len(raw) + 1))
    for s in subs:
        assert len(s) <= cfg.max_window
        assert s.detection_total == sum(raw[s.first - 1:s.last])
        assert s.detection_total <= cfg.max_window_detections or len(s) == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.integers(0, 40), st.integers(5, 30), st.booleans(), st.integers(1, 20))
def test_step_produces_cut(before, level, jump, up, after):
    low, high = (level, level + jump) if up else (level + jump, level)
    raw = [low] * before + [high] * after
    curve = CountCurve.from_counts(raw, 5)
    starts = {s.first for s in partition_adaptive(curve, Config())}
    assert before + 1 in starts


def test_debug_csv_layout():
    curve = curve_of([5] * 12)
    text = format_partition_debug(curve, partition_adaptive(curve, Config()))
    lines = text.splitlines()
    assert lines[0] == "frame,raw_count,filtered_count,subseq_id"
    ids = [int(line.split(",")[3]) for line in lines[1:]]
    assert ids == [0] * 5 + [1] * 5 + [2] * 2

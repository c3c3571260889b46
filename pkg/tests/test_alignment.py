import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from midipose.alignment import SplitSpec, align_nearest, read_split_file, split, write_split_file

increasing = st.lists(st.floats(0.001, 1.0), min_size=1, max_size=40).map(lambda d: list(np.cumsum(d)))


def test_align_example():
    out = align_nearest([0.0, 0.066, 0.133], [0.0, 0.04, 0.08, 0.12])
    assert [a.csi_index for a in out] == [0, 2, 3]
    assert out[1].gap == pytest.approx(0.014)


def test_align_tie_goes_to_earlier_frame():
    assert align_nearest([0.02], [0.0, 0.04])[0].csi_index == 0


def test_align_rejects_unsorted():
    with pytest.raises(ValueError, match="strictly increasing"):
        align_nearest([0.0, 0.1], [0.0, 0.08, 0.04])
    with pytest.raises(ValueError):
        align_nearest([], [0.0])


@given(increasing, increasing)
def test_align_picks_a_nearest_frame(lt, ct):
    out = align_nearest(lt, ct)
    ct = np.array(ct)
    for a, t in zip(out, lt):
        assert a.gap == pytest.approx(np.abs(ct - t).min())
    idx = [a.csi_index for a in out]
    assert idx == sorted(idx)


def test_split_sizes():
    for n, want in ((10, (7, 2, 1)), (221410, (154987, 44282, 22141))):
        parts = split(n, SplitSpec(seed=1))
        assert tuple(len(p) for p in parts) == want


@given(st.integers(10, 3000), st.integers(0, 2**31), st.booleans())
def test_split_is_a_partition(n, seed, temporal):
    parts = split(n, SplitSpec(seed=seed, temporal=temporal))
    together = np.concatenate(parts)
    assert np.array_equal(np.sort(together), np.arange(n))


def test_split_deterministic_and_seed_sensitive():
    a = split(100, SplitSpec(seed=3))
    b = split(100, SplitSpec(seed=3))
    c = split(100, SplitSpec(seed=4))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_temporal_split_keeps_order():
    train, test, val = split(20, SplitSpec(temporal=True))
    assert list(train) == list(range(14)) and list(val) == [18, 19]


def test_split_validation():
    with pytest.raises(ValueError, match="at least 10"):
        split(9)
    with pytest.raises(ValueError):
        SplitSpec(ratios=(0.5, 0.3, 0.3))


def test_split_file_round_trip(tmp_path):
    parts = split(37, SplitSpec(seed=2))
    write_split_file(tmp_path / "s.txt", *parts)
    got = read_split_file(tmp_path / "s.txt")
    assert all(np.array_equal(x, y) for x, y in zip(parts, got))

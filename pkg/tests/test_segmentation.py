from collections import Counter

import numpy as np
import pytest

from modules.errors import DomainError
from modules.event_io import EventStream, sort_by_time
from modules.segmentation import (
    SegmentationConfig,
    Window,
    normalized_density,
    partition_voxels,
    partition_windows,
    segment,
    voxel_count,
    window_capacity,
    window_count,
)


def _window(rows):
    x, y, t, p = zip(*rows)
    return Window(events=sort_by_time(EventStream(x=x, y=y, t=t, p=p)), index=0)


def _multiset(stream):
    return Counter(zip(stream.x.tolist(), stream.y.tolist(), stream.t.tolist(), stream.p.tolist()))


def test_density_cube():
    rng = np.random.Generator(np.random.PCG64(0))
    x = np.r_[0, 10, rng.integers(0, 11, size=998)]
    y = np.r_[0, 10, rng.integers(0, 11, size=998)]
    t = np.r_[0, 10, rng.integers(0, 11, size=998)]
    stream = EventStream(x=x, y=y, t=t, p=np.ones(1000))

    assert normalized_density(stream) == pytest.approx(1.0)


def test_density_clamps_flat_time_range():
    rng = np.random.Generator(np.random.PCG64(1))
    x = np.r_[0, 10, rng.integers(0, 11, size=98)]
    y = np.r_[0, 10, rng.integers(0, 11, size=98)]
    stream = EventStream(x=x, y=y, t=np.full(100, 42), p=np.ones(100))

    assert normalized_density(stream) == pytest.approx(1.0)


def test_density_matches_formula(random_stream):
    stream = random_stream(500, seed=9)
    volume = (
        max(stream.x.max() - stream.x.min(), 1)
        * max(stream.y.max() - stream.y.min(), 1)
        * max(stream.t.max() - stream.t.min(), 1)
    )

    assert normalized_density(stream) == pytest.approx(500 / volume)


def test_density_empty_stream():
    with pytest.raises(DomainError):
        normalized_density(EventStream.empty())


@pytest.mark.parametrize("density, expected", [(1.0, 100), (10.0, 500), (2.5, 125)])
def test_window_capacity(density, expected):
    config = SegmentationConfig(n_min=100, c_scale=50)

    assert window_capacity(density, config) == expected


@pytest.mark.parametrize("n_points, capacity, expected", [(1050, 100, 11), (100, 100, 1), (1, 100, 1)])
def test_window_count(n_points, capacity, expected):
    assert window_count(n_points, capacity) == expected


def test_windows_chunk_by_capacity():
    stream = EventStream(x=range(10), y=range(10), t=range(10, 0, -1), p=[1] * 10)
    config = SegmentationConfig(n_min=4, c_scale=1e-9)

    windows = partition_windows(stream, config)

    assert [len(w.events) for w in windows] == [4, 4, 2]
    assert [w.index for w in windows] == [0, 1, 2]
    assert np.concatenate([w.events.t for w in windows]).tolist() == list(range(1, 11))


def test_single_window_at_capacity():
    stream = EventStream(x=range(4), y=range(4), t=range(4), p=[1] * 4)

    windows = partition_windows(stream, SegmentationConfig(n_min=4, c_scale=1e-9))

    assert [len(w.events) for w in windows] == [4]


def test_windows_cover_sorted_input(random_stream):
    stream = random_stream(10_000, seed=2)
    config = SegmentationConfig(n_min=300)
    capacity = window_capacity(normalized_density(stream), config)

    windows = partition_windows(stream, config)

    assert all(len(w.events) == capacity for w in windows[:-1])
    assert 1 <= len(windows[-1].events) <= capacity
    merged = np.concatenate([w.events.t for w in windows])
    assert merged.tolist() == sort_by_time(stream).t.tolist()


def test_voxel_count_clamps_to_max():
    window = _window([(0, 0, 0, 1), (25, 25, 16, 1)])

    assert voxel_count(window, SegmentationConfig(n_min_vox=8, n_max_vox=64)) == 64


def test_voxel_count_square_root():
    window = _window([(0, 0, 0, 1), (4, 4, 4, 1)])

    assert voxel_count(window, SegmentationConfig(n_min_vox=8, n_max_vox=64)) == 8


def test_voxel_count_within_range():
    window = _window([(0, 0, 0, 1), (16, 16, 4, -1)])

    assert voxel_count(window, SegmentationConfig(n_min_vox=4, n_max_vox=64)) == 32


def test_voxel_boundaries_split_duration_evenly():
    ts = [0, 24, 25, 50, 74, 75, 100]
    window = _window([(0, 0, t, 1) for t in ts])

    voxels = partition_voxels(window, 4)

    assert [v.t_lo for v in voxels] == [0, 25, 50, 75]
    assert [v.events.t.tolist() for v in voxels] == [[0, 24], [25], [50, 74], [75, 100]]


def test_single_voxel_is_whole_window():
    window = _window([(1, 2, 3, 1), (4, 5, 6, -1), (7, 8, 9, 1)])

    voxels = partition_voxels(window, 1)

    assert len(voxels) == 1
    assert voxels[0].events == window.events


def test_voxels_cover_window_exactly(random_stream):
    window = Window(events=sort_by_time(random_stream(777, seed=4)), index=3)

    voxels = partition_voxels(window, 8)

    assert len(voxels) == 8
    assert sum(len(v) for v in voxels) == len(window.events)
    assert sum((_multiset(v.events) for v in voxels), Counter()) == _multiset(window.events)
    assert all(v.window_index == 3 for v in voxels)


def test_voxels_keep_empty_slots():
    window = _window([(0, 0, 0, 1), (0, 0, 100, 1)])

    voxels = partition_voxels(window, 4)

    assert [len(v) for v in voxels] == [1, 0, 0, 1]


def test_segment_single_event():
    stream = EventStream(x=[3], y=[3], t=[3], p=[1])
    config = SegmentationConfig()

    voxels = segment(stream, config)

    assert {v.window_index for v in voxels} == {0}
    assert len(voxels) == config.n_min_vox
    assert sum(len(v) for v in voxels) == 1


def test_segment_voxel_counts_in_range(random_stream):
    config = SegmentationConfig(n_min=256, n_min_vox=4, n_max_vox=16)
    voxels = segment(random_stream(10_000, seed=8), config)

    per_window = Counter(v.window_index for v in voxels)

    assert all(config.n_min_vox <= count <= config.n_max_vox for count in per_window.values())


def test_segment_keeps_bursts_in_order():
    first = EventStream(x=[1] * 50, y=[1] * 50, t=range(100, 150), p=[1] * 50)
    second = EventStream(x=[2] * 50, y=[2] * 50, t=range(10_000, 10_050), p=[-1] * 50)
    stream = EventStream(
        x=np.r_[second.x, first.x], y=np.r_[second.y, first.y],
        t=np.r_[second.t, first.t], p=np.r_[second.p, first.p],
    )

    voxels = segment(stream, SegmentationConfig(n_min=20, c_scale=1e-9))
    ts = np.concatenate([v.events.t for v in voxels])

    assert ts[:50].max() < ts[50:].min()


def test_segment_is_deterministic(random_stream):
    stream = random_stream(3000, seed=12)
    config = SegmentationConfig(n_min=256)

    a = segment(stream, config)
    b = segment(stream, config)

    assert [(v.window_index, v.voxel_index) for v in a] == [(v.window_index, v.voxel_index) for v in b]
    assert all(va.events == vb.events for va, vb in zip(a, b))


def test_config_rejects_inverted_voxel_range():
    with pytest.raises(ValueError):
        SegmentationConfig(n_min_vox=10, n_max_vox=5)

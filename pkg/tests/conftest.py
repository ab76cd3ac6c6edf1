import numpy as np
import pytest

from modules.event_io import EventStream, sort_by_time
from modules.graph_build import EventGraph
from modules.segmentation import Voxel


@pytest.fixture
def make_voxel():
    """(x, y, t, p) 튜플 목록 → 시간순 Voxel"""
    def _make(rows):
        if rows:
            x, y, t, p = zip(*rows)
            stream = EventStream(x=x, y=y, t=t, p=p)
        else:
            stream = EventStream.empty()
        events = sort_by_time(stream)
        t_lo = float(events.t.min()) if len(events) else 0.0
        t_hi = float(events.t.max()) if len(events) else 0.0
        return Voxel(events=events, window_index=0, voxel_index=0, t_lo=t_lo, t_hi=t_hi)
    return _make


@pytest.fixture
def random_stream():
    """시드 기반 무작위 스트림"""
    def _make(n, seed=0, width=64, height=64, duration=10_000):
        rng = np.random.Generator(np.random.PCG64(seed))
        return EventStream(
            x=rng.integers(0, width, size=n),
            y=rng.integers(0, height, size=n),
            t=rng.integers(0, duration, size=n),
            p=rng.choice(np.array([-1, 1]), size=n),
        )
    return _make


@pytest.fixture
def random_complete_graph():
    """무작위 가중치 완전 그래프"""
    def _make(n, seed=0, integer_weights=False):
        rng = np.random.Generator(np.random.PCG64(seed))
        ii, jj = np.triu_indices(n, k=1)
        if integer_weights:
            w = rng.integers(1, 6, size=len(ii)).astype(np.float64)
        else:
            w = rng.uniform(0.0, 10.0, size=len(ii))
        return EventGraph.from_edges(zip(ii.tolist(), jj.tolist(), w.tolist()), n_nodes=n)
    return _make


@pytest.fixture
def cluster_outlier_graph():
    """A, B, C 사이 가중치 1, D로 가는 간선 10"""
    edges = [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (0, 3, 10.0), (1, 3, 10.0), (2, 3, 10.0)]
    return EventGraph.from_edges(edges, n_nodes=4)

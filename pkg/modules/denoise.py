"""
적응형 디노이징 모듈

MST 기반 임계값 상한, 정규화 차수 분산 최대화로 최적 임계값을 찾고
임계값 이하 간선만 남겨 고립 노드를 노이즈로 분류한다.
"""
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import DomainError
from .graph_build import EventGraph, WeightParams, build_graph, to_networkx
from .segmentation import Voxel

# 누적 차수 행렬을 한 번에 만들 최대 원소 수
_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class ThresholdSearchResult:
    """
    최적 임계값 탐색 결과

    Attributes:
        t_opt: 최적 임계값 T
        mst_max: MST 최대 간선 가중치 (탐색 상한)
        curve: (delta, variance) 튜플, delta 오름차순
    """
    t_opt: float
    mst_max: float
    curve: Tuple[Tuple[float, float], ...] = ()

    @property
    def best_variance(self) -> float:
        return max((v for _, v in self.curve), default=0.0)


@dataclass(frozen=True)
class DenoisedVoxel:
    """
    디노이징 결과

    Attributes:
        graph: w <= t_opt 간선만 남은 그래프
        kept: 유지된 노드 id
        removed: 노이즈로 분류된 노드 id (필터 후 차수 0)
        search: 임계값 탐색 결과 (통과 처리된 복셀은 None)
    """
    graph: EventGraph
    kept: Tuple[int, ...]
    removed: Tuple[int, ...]
    search: Optional[ThresholdSearchResult] = None


class UnionFind:
    """경로 압축 + 랭크 기반 합집합"""

    def __init__(self, num: int):
        self.parents = list(range(num))
        self.rank = [0] * num
        self.components = num

    def find(self, x: int) -> int:
        root = x
        while self.parents[root] != root:
            root = self.parents[root]

        while self.parents[x] != root:
            self.parents[x], x = root, self.parents[x]

        return root

    def union(self, x: int, y: int) -> bool:
        x = self.find(x)
        y = self.find(y)
        if x == y:
            return False

        if self.rank[x] < self.rank[y]:
            x, y = y, x
        self.parents[y] = x
        if self.rank[x] == self.rank[y]:
            self.rank[x] += 1

        self.components -= 1
        return True


def _sorted_edge_order(graph: EventGraph) -> np.ndarray:
    """(w, i, j) 순 정렬 인덱스"""
    return np.lexsort((graph.j, graph.i, graph.w))


def mst_max_edge(graph: EventGraph) -> float:
    """
    최소 신장 트리의 최대 간선 가중치 (Kruskal)

    모든 노드를 연결하는 가장 작은 임계값과 같다.

    Args:
        graph: EventGraph

    Returns:
        MST 최대 가중치 (노드 1개 이하이면 0)

    Raises:
        DomainError: 후보 간선으로 연결되지 않는 그래프
    """
    n = graph.n_nodes
    if n <= 1:
        return 0.0

    uf = UnionFind(n)
    heaviest = 0.0
    for e in _sorted_edge_order(graph):
        if uf.union(int(graph.i[e]), int(graph.j[e])):
            heaviest = float(graph.w[e])
            if uf.components == 1:
                return heaviest

    raise DomainError(f"후보 간선 집합이 연결되어 있지 않습니다 (성분 {uf.components}개)")


def degree_vector(graph: EventGraph, delta: float) -> np.ndarray:
    """
    임계값 delta에서의 노드별 차수

    Returns:
        w <= delta 간선 수를 노드 id 순으로 담은 정수 배열
    """
    mask = graph.w <= delta
    n = graph.n_nodes
    return (
        np.bincount(graph.i[mask], minlength=n)
        + np.bincount(graph.j[mask], minlength=n)
    )


def _row_variances(degrees: np.ndarray) -> np.ndarray:
    """
    행별 최대값 정규화 차수의 모분산

    (n * sum(d^2) - sum(d)^2) / (n^2 * max^2) 를 정수 합으로 계산해
    같은 차수 벡터는 항상 같은 값을 낸다.
    """
    degrees = np.atleast_2d(np.asarray(degrees, dtype=np.int64))
    n = degrees.shape[1]
    if n == 0:
        return np.zeros(degrees.shape[0])

    peak = degrees.max(axis=1)
    s1 = degrees.sum(axis=1)
    s2 = (degrees * degrees).sum(axis=1)
    numerator = (n * s2 - s1 * s1).astype(np.float64)
    denominator = (n * n * peak * peak).astype(np.float64)

    return np.where(peak > 0, numerator / np.where(peak > 0, denominator, 1.0), 0.0)


def normalized_degree_variance(degrees: Sequence[int]) -> float:
    """
    정규화 차수 분산

    각 차수를 최대 차수로 나눈 뒤 모분산을 구한다.
    빈 시퀀스나 최대 차수 0이면 0.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.size == 0:
        return 0.0
    return float(_row_variances(degrees)[0])


def optimal_threshold(graph: EventGraph) -> ThresholdSearchResult:
    """
    최적 임계값 탐색

    후보는 mst_max 이하의 고유 간선 가중치이다. 차수 벡터는 간선 가중치
    사이에서 변하지 않으므로 이 탐색은 연속 구간 탐색과 같다.
    분산이 같으면 가장 큰 후보를 고른다.

    Args:
        graph: 노드 1개 이상의 EventGraph

    Returns:
        ThresholdSearchResult
    """
    if graph.n_nodes == 0:
        raise DomainError("노드가 없는 그래프입니다")

    mst_max = mst_max_edge(graph)
    order = _sorted_edge_order(graph)
    order = order[graph.w[order] <= mst_max]
    if len(order) == 0:
        return ThresholdSearchResult(t_opt=0.0, mst_max=mst_max, curve=())

    n = graph.n_nodes
    ws = graph.w[order]
    ii = graph.i[order]
    jj = graph.j[order]

    # 같은 가중치 묶음의 마지막 간선에서 차수 벡터를 읽는다
    group_end = np.flatnonzero(np.r_[ws[1:] != ws[:-1], True])

    block = max(1, _BLOCK_CELLS // n)
    base = np.zeros(n, dtype=np.int64)
    picked = []
    for start in range(0, len(ws), block):
        stop = min(start + block, len(ws))
        rows = np.arange(stop - start)
        steps = np.zeros((stop - start, n), dtype=np.int64)
        np.add.at(steps, (rows, ii[start:stop]), 1)
        np.add.at(steps, (rows, jj[start:stop]), 1)
        cumulative = base + np.cumsum(steps, axis=0)

        ends = group_end[(group_end >= start) & (group_end < stop)] - start
        picked.append(cumulative[ends])
        base = cumulative[-1]

    variances = _row_variances(np.vstack(picked))
    candidates = ws[group_end]

    best = int(np.flatnonzero(variances == variances.max())[-1])
    curve = tuple((float(c), float(v)) for c, v in zip(candidates, variances))

    return ThresholdSearchResult(t_opt=float(candidates[best]), mst_max=mst_max, curve=curve)


def brute_force_threshold(
    graph: EventGraph,
    grid_steps: int = 10000,
    max_nodes: int = 64
) -> ThresholdSearchResult:
    """
    전수 탐색 임계값 (검증용)

    [0, mst_max] 균등 격자와 모든 간선 가중치에서 차수 벡터를 간선 전체
    스캔으로 다시 계산한다. 최대 분산 delta 중 가장 큰 값을 고른 뒤
    그 이하의 가장 큰 간선 가중치(실제 유효 임계값)로 맞춘다.

    Args:
        graph: 노드 max_nodes개 이하의 EventGraph
        grid_steps: 격자 구간 수 (1000 이상)
        max_nodes: 허용 노드 수

    Returns:
        ThresholdSearchResult
    """
    if graph.n_nodes > max_nodes:
        raise DomainError(f"전수 탐색은 노드 {max_nodes}개 이하만 지원합니다: {graph.n_nodes}")
    if grid_steps < 1000:
        raise DomainError(f"grid_steps는 1000 이상이어야 합니다: {grid_steps}")
    if graph.n_nodes == 0:
        raise DomainError("노드가 없는 그래프입니다")

    mst_max = mst_max_edge(graph)
    if graph.n_edges == 0:
        return ThresholdSearchResult(t_opt=0.0, mst_max=mst_max, curve=())

    exact = graph.w[graph.w <= mst_max]
    deltas = np.unique(np.concatenate([np.linspace(0.0, mst_max, grid_steps + 1), exact]))

    n = graph.n_nodes
    # 0/1 합은 float64에서도 정확하다
    incidence = np.zeros((graph.n_edges, n), dtype=np.float64)
    edge_ids = np.arange(graph.n_edges)
    incidence[edge_ids, graph.i] += 1
    incidence[edge_ids, graph.j] += 1

    variances = []
    for start in range(0, len(deltas), 1024):
        chunk = deltas[start:start + 1024]
        mask = (graph.w[None, :] <= chunk[:, None]).astype(np.float64)
        degrees = np.rint(mask @ incidence).astype(np.int64)
        variances.append(_row_variances(degrees))
    variances = np.concatenate(variances)

    best_delta = deltas[np.flatnonzero(variances == variances.max())[-1]]
    t_opt = float(graph.w[graph.w <= best_delta].max())
    curve = tuple((float(d), float(v)) for d, v in zip(deltas, variances))

    return ThresholdSearchResult(t_opt=t_opt, mst_max=mst_max, curve=curve)


def filter_graph(graph: EventGraph, t: float) -> DenoisedVoxel:
    """
    임계값 필터링

    w <= t 간선만 남기고, 차수 0이 된 노드를 노이즈로 분류한다.

    Args:
        graph: EventGraph
        t: 임계값

    Returns:
        DenoisedVoxel
    """
    mask = graph.w <= t
    filtered = EventGraph(
        nodes=graph.nodes, i=graph.i[mask], j=graph.j[mask], w=graph.w[mask]
    )
    degrees = degree_vector(filtered, t)

    return DenoisedVoxel(
        graph=filtered,
        kept=tuple(int(v) for v in np.flatnonzero(degrees > 0)),
        removed=tuple(int(v) for v in np.flatnonzero(degrees == 0)),
    )


def count_components(graph: EventGraph, t: float) -> int:
    """임계값 t로 필터링한 그래프의 연결 성분 수"""
    return nx.number_connected_components(to_networkx(graph, t))


def denoise_voxel(voxel: Voxel, params: WeightParams) -> DenoisedVoxel:
    """
    복셀 디노이징

    그래프 구성 → 최적 임계값 → 필터링.
    노드 1개 이하 복셀은 탐색 없이 모두 유지한다.

    Args:
        voxel: Voxel
        params: WeightParams

    Returns:
        DenoisedVoxel
    """
    graph = build_graph(voxel, params)
    if graph.n_nodes <= 1:
        return DenoisedVoxel(graph=graph, kept=tuple(range(graph.n_nodes)), removed=())

    search = optimal_threshold(graph)
    return replace(filter_graph(graph, search.t_opt), search=search)

"""
복셀 그래프 구성 모듈

속도 벡터, 각도 차이, 극성 일치도를 조합한 4요소 간선 가중치로
복셀 단위 완전 그래프를 만든다.
"""
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from .errors import DomainError
from .event_io import Event, EventStream, compute_extents
from .segmentation import Voxel

# 속도 크기가 이 값보다 작으면 방향 정보가 없다고 본다
EPS_V = 1e-9


@dataclass(frozen=True)
class WeightParams:
    """
    간선 가중치 계수

    w_ij = alpha * D + beta * dv + gamma * theta + delta * P

    Attributes:
        alpha: 유클리드 거리 계수
        beta: 속도 크기 차이 계수
        gamma: 각도 차이 계수
        delta: 극성 불일치 계수
        normalize_factors: 각 요소를 [0, 1]로 정규화할지 여부
    """
    alpha: float
    beta: float
    gamma: float
    delta: float
    normalize_factors: bool = True

    def __post_init__(self):
        coeffs = (self.alpha, self.beta, self.gamma, self.delta)
        if any(c < 0 for c in coeffs):
            raise ValueError(f"가중치 계수는 음수일 수 없습니다: {coeffs}")
        if not sum(coeffs) > 0:
            raise ValueError("가중치 계수의 합은 0보다 커야 합니다")

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "delta": self.delta,
            "normalize_factors": self.normalize_factors,
        }


@dataclass(frozen=True)
class PairFactors:
    """두 노드 사이의 가중치 요소 (D, dv, theta, P)"""
    d: float
    dv: float
    theta: float
    pol: int

    def __post_init__(self):
        if self.d < 0 or self.dv < 0:
            raise ValueError(f"d, dv는 음수일 수 없습니다: {self}")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta는 [0, pi] 범위여야 합니다: {self.theta}")
        if self.pol not in (0, 1):
            raise ValueError(f"pol은 0 또는 1이어야 합니다: {self.pol}")


@dataclass(frozen=True)
class VelocityVector:
    """
    속도 벡터

    degenerate가 설정되면 dt = 0이어서 (vx, vy)는 픽셀 변위 그대로이다.
    """
    vx: float
    vy: float
    degenerate: bool = False

    @property
    def magnitude(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class FactorScale:
    """
    복셀 단위 정규화 기준

    Attributes:
        diagonal: 복셀 바운딩 박스 대각선 (x, y, t)
        dv_max: 복셀 내 최대 속도 크기 차이
    """
    diagonal: float = 1.0
    dv_max: float = 1.0


@dataclass(frozen=True, eq=False)
class EventGraph:
    """
    복셀 그래프

    Attributes:
        nodes: 노드 이벤트 (인덱스 = 노드 id)
        i, j: 간선 양 끝 (i < j)
        w: 간선 가중치 (음수 아님)
    """
    nodes: EventStream
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64).reshape(-1)
        j = np.asarray(self.j, dtype=np.int64).reshape(-1)
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        for name, arr in (("i", i), ("j", j), ("w", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

        if not len(i) == len(j) == len(w):
            raise ValueError("간선 배열 길이가 서로 다릅니다")
        if len(i):
            n = self.n_nodes
            if (i >= j).any():
                raise ValueError("간선은 i < j 이어야 합니다 (자기 루프 불가)")
            if (i < 0).any() or (j >= n).any():
                raise ValueError(f"노드 id가 범위를 벗어났습니다 (노드 {n}개)")
            if len(np.unique(i * n + j)) != len(i):
                raise ValueError("중복 간선이 있습니다")
            if (w < 0).any() or not np.isfinite(w).all():
                raise ValueError("간선 가중치는 음수가 아닌 유한값이어야 합니다")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Tuple[int, int, float]],
        n_nodes: Optional[int] = None,
        nodes: Optional[EventStream] = None
    ) -> "EventGraph":
        """
        (i, j, w) 목록으로 그래프 생성

        nodes가 없으면 원점 이벤트로 채운 좌표 없는 그래프를 만든다 (검증용).

        Args:
            edges: (i, j, w) 반복자, i > j이면 뒤집어서 저장
            n_nodes: 노드 개수 (nodes가 없을 때 필수)
            nodes: 노드 이벤트

        Returns:
            EventGraph
        """
        if nodes is None:
            if n_nodes is None:
                raise ValueError("n_nodes 또는 nodes가 필요합니다")
            nodes = EventStream(
                x=np.zeros(n_nodes), y=np.zeros(n_nodes),
                t=np.zeros(n_nodes), p=np.ones(n_nodes)
            )

        rows = [(min(a, b), max(a, b), float(w)) for a, b, w in edges]
        if not rows:
            return cls(nodes=nodes, i=[], j=[], w=[])

        i, j, w = zip(*rows)
        return cls(nodes=nodes, i=i, j=j, w=w)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.w)

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.i, self.j, self.w)]


def velocity_vector(e_i: Event, e_j: Event) -> VelocityVector:
    """
    두 이벤트로 속도 벡터 계산

    dt = 0이면 픽셀 변위 (dx, dy)를 degenerate로 반환한다.
    """
    dx = float(e_j.x - e_i.x)
    dy = float(e_j.y - e_i.y)
    dt = e_j.t - e_i.t

    if dt == 0:
        return VelocityVector(dx, dy, degenerate=True)
    return VelocityVector(dx / dt, dy / dt)


def reference_indices(events: EventStream) -> np.ndarray:
    """
    노드별 기준 이웃 (속도 벡터 계산 상대)

    규칙:
    1. t가 더 큰 이벤트 중 가장 이른 것 (후속)
    2. 후속이 없으면 t가 더 작은 이벤트 중 가장 늦은 것 (선행)
    3. 모든 t가 같으면 공간상 최근접 이웃
    동률이면 가장 작은 노드 id를 고른다.

    Args:
        events: 2개 이상의 이벤트

    Returns:
        노드 id 배열
    """
    n = len(events)
    if n < 2:
        raise DomainError("기준 이웃을 고르려면 이벤트가 2개 이상 필요합니다")

    t = events.t
    order = np.argsort(t, kind="stable")
    sorted_t = t[order]

    if sorted_t[0] == sorted_t[-1]:
        xy = np.column_stack([events.x, events.y]).astype(np.float64)
        d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=-1)
        np.fill_diagonal(d2, np.inf)
        return d2.argmin(axis=1)

    refs = np.empty(n, dtype=np.int64)

    successor = np.searchsorted(sorted_t, t, side="right")
    has_successor = successor < n
    refs[has_successor] = order[successor[has_successor]]

    last = ~has_successor
    before = np.searchsorted(sorted_t, t[last], side="left") - 1
    first_of_run = np.searchsorted(sorted_t, sorted_t[before], side="left")
    refs[last] = order[first_of_run]

    return refs


def _node_velocities(events: EventStream) -> Tuple[np.ndarray, np.ndarray]:
    """노드별 (vx, vy) 배열"""
    refs = reference_indices(events)
    dx = (events.x[refs] - events.x).astype(np.float64)
    dy = (events.y[refs] - events.y).astype(np.float64)
    dt = (events.t[refs] - events.t).astype(np.float64)

    moving = dt != 0
    safe_dt = np.where(moving, dt, 1.0)
    vx = np.where(moving, dx / safe_dt, dx)
    vy = np.where(moving, dy / safe_dt, dy)
    return vx, vy


def reference_velocity(voxel: Voxel, i: int) -> VelocityVector:
    """
    노드 i의 속도 벡터 (기준 이웃 대비)

    Args:
        voxel: 이벤트 2개 이상인 복셀
        i: 노드 id

    Returns:
        VelocityVector
    """
    events = voxel.events
    if not 0 <= i < len(events):
        raise DomainError(f"노드 id 범위 초과: {i}")

    ref = int(reference_indices(events)[i])
    return velocity_vector(events[i], events[ref])


def angular_difference(u: VelocityVector, v: VelocityVector) -> float:
    """
    두 속도 벡터의 각도 차이 [0, pi]

    한쪽 크기가 EPS_V 미만이면 0
    """
    mu, mv = u.magnitude, v.magnitude
    if mu < EPS_V or mv < EPS_V:
        return 0.0

    cos = (u.vx * v.vx + u.vy * v.vy) / (mu * mv)
    return math.acos(min(1.0, max(-1.0, cos)))


def polarity_consistency(p_i: int, p_j: int) -> int:
    """극성이 같으면 0, 다르면 1"""
    return 0 if p_i == p_j else 1


def pair_factors(voxel: Voxel, i: int, j: int) -> PairFactors:
    """
    노드 쌍의 가중치 요소 계산

    Args:
        voxel: Voxel
        i, j: 서로 다른 노드 id

    Returns:
        PairFactors (d는 x, y, t 원단위 3차원 거리)
    """
    n = len(voxel.events)
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"잘못된 노드 쌍: ({i}, {j}), 노드 {n}개")

    e_i, e_j = voxel.events[i], voxel.events[j]
    d = math.sqrt((e_i.x - e_j.x) ** 2 + (e_i.y - e_j.y) ** 2 + (e_i.t - e_j.t) ** 2)

    v_i = reference_velocity(voxel, i)
    v_j = reference_velocity(voxel, j)

    return PairFactors(
        d=d,
        dv=abs(v_i.magnitude - v_j.magnitude),
        theta=angular_difference(v_i, v_j),
        pol=polarity_consistency(e_i.p, e_j.p),
    )


def factor_scale(voxel: Voxel) -> FactorScale:
    """
    정규화 기준 계산

    대각선 또는 최대 dv가 0이면 1을 쓴다.
    """
    if len(voxel.events) == 0:
        return FactorScale()

    ext = compute_extents(voxel.events)
    diagonal = math.sqrt(
        (ext.x_max - ext.x_min) ** 2
        + (ext.y_max - ext.y_min) ** 2
        + (ext.t_max - ext.t_min) ** 2
    )

    dv_max = 0.0
    if len(voxel.events) >= 2:
        vx, vy = _node_velocities(voxel.events)
        speeds = np.hypot(vx, vy)
        dv_max = float(speeds.max() - speeds.min())

    return FactorScale(
        diagonal=diagonal if diagonal > 0 else 1.0,
        dv_max=dv_max if dv_max > 0 else 1.0,
    )


def edge_weight(
    f: PairFactors,
    params: WeightParams,
    scale: Optional[FactorScale] = None
) -> float:
    """
    간선 가중치

    normalize_factors가 설정되면 d / diagonal, dv / dv_max, theta / pi 로 정규화한다.

    Args:
        f: PairFactors
        params: WeightParams
        scale: 복셀 정규화 기준 (없으면 1)

    Returns:
        음수가 아닌 가중치
    """
    d, dv, theta = f.d, f.dv, f.theta
    if params.normalize_factors:
        scale = scale or FactorScale()
        d = d / scale.diagonal
        dv = dv / scale.dv_max
        theta = theta / math.pi

    return params.alpha * d + params.beta * dv + params.gamma * theta + params.delta * f.pol


def build_graph(voxel: Voxel, params: WeightParams) -> EventGraph:
    """
    복셀 완전 그래프 구성

    모든 노드 쌍에 edge_weight와 같은 식으로 가중치를 계산한다 (벡터화).

    Args:
        voxel: 비어 있지 않은 Voxel
        params: WeightParams

    Returns:
        EventGraph (간선 n(n-1)/2개)
    """
    events = voxel.events
    n = len(events)
    if n < 2:
        return EventGraph(nodes=events, i=[], j=[], w=[])

    ii, jj = np.triu_indices(n, k=1)
    coords = events.coordinates()
    d = np.sqrt(((coords[ii] - coords[jj]) ** 2).sum(axis=1))

    vx, vy = _node_velocities(events)
    speeds = np.hypot(vx, vy)
    dv = np.abs(speeds[ii] - speeds[jj])

    with np.errstate(divide="ignore", invalid="ignore"):
        cos = (vx[ii] * vx[jj] + vy[ii] * vy[jj]) / (speeds[ii] * speeds[jj])
    still = (speeds[ii] < EPS_V) | (speeds[jj] < EPS_V)
    theta = np.where(still, 0.0, np.arccos(np.clip(np.nan_to_num(cos), -1.0, 1.0)))

    pol = (events.p[ii] != events.p[jj]).astype(np.float64)

    if params.normalize_factors:
        scale = factor_scale(voxel)
        d = d / scale.diagonal
        dv = dv / scale.dv_max
        theta = theta / math.pi

    w = params.alpha * d + params.beta * dv + params.gamma * theta + params.delta * pol

    return EventGraph(nodes=events, i=ii, j=jj, w=w)


def to_networkx(graph: EventGraph, t: Optional[float] = None) -> nx.Graph:
    """
    networkx 그래프로 변환

    Args:
        graph: EventGraph
        t: 임계값 (w <= t 간선만 포함, None이면 전체)

    Returns:
        weight 속성을 가진 networkx.Graph
    """
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_nodes))
    for a, b, w in graph.edges:
        if t is None or w <= t:
            g.add_edge(a, b, weight=w)
    return g


def write_edge_list(graph: EventGraph) -> str:
    """
    간선 목록 텍스트

    첫 줄 "nodes N edges M", 이후 "i j w" 한 줄씩
    """
    lines = [f"nodes {graph.n_nodes} edges {graph.n_edges}"]
    lines.extend(f"{a} {b} {w!r}" for a, b, w in graph.edges)
    return "\n".join(lines) + "\n"

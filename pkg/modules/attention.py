"""
역가중치 그래프 어텐션 모듈 (순전파 전용)

간선 가중치의 역수로 어텐션 로짓을 조정해 가중치가 작은(상관이 강한)
이웃에 더 큰 계수를 준다. 학습은 하지 않는다.
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import DomainError
from .event_io import EventStream
from .graph_build import EventGraph


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """
    어텐션 층 파라미터

    Attributes:
        w_matrix: (d_in, d_out) 선형 변환 W
        a_vector: 길이 2 * d_out 어텐션 벡터 a
        leaky_slope: LeakyReLU 음수 기울기
        w_floor: 1 / w_ij 계산 시 w_ij 하한
    """
    w_matrix: np.ndarray
    a_vector: np.ndarray
    leaky_slope: float = 0.2
    w_floor: float = 1e-6

    def __post_init__(self):
        w_matrix = np.atleast_2d(np.asarray(self.w_matrix, dtype=np.float64))
        a_vector = np.asarray(self.a_vector, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "w_matrix", w_matrix)
        object.__setattr__(self, "a_vector", a_vector)

        if a_vector.shape[0] != 2 * w_matrix.shape[1]:
            raise ValueError(
                f"a_vector 길이({a_vector.shape[0]})는 2 * d_out({w_matrix.shape[1]})이어야 합니다"
            )
        if not 0 < self.leaky_slope < 1:
            raise ValueError(f"leaky_slope는 (0, 1) 범위여야 합니다: {self.leaky_slope}")
        if not self.w_floor > 0:
            raise ValueError(f"w_floor는 양수여야 합니다: {self.w_floor}")

    @property
    def d_in(self) -> int:
        return self.w_matrix.shape[0]

    @property
    def d_out(self) -> int:
        return self.w_matrix.shape[1]


@dataclass(frozen=True, eq=False)
class NodeFeatureSet:
    """노드 특징 벡터 (행 = 노드 id)"""
    features: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1) if features.size else features.reshape(0, 0)
        if features.ndim != 2:
            raise ValueError("특징은 2차원 배열이어야 합니다")
        object.__setattr__(self, "features", features)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _transform(f: np.ndarray, params: AttentionParams) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    if f.shape[0] != params.d_in:
        raise DomainError(f"특징 차원({f.shape[0]})이 d_in({params.d_in})과 다릅니다")
    return f @ params.w_matrix


def attention_logit(
    f_i: np.ndarray,
    f_j: np.ndarray,
    w_ij: float,
    params: AttentionParams
) -> float:
    """
    어텐션 로짓

    LeakyReLU(a^T [W f_i || W f_j]) / max(w_ij, w_floor)

    Args:
        f_i, f_j: 길이 d_in 특징 벡터
        w_ij: 간선 가중치
        params: AttentionParams

    Returns:
        실수 로짓
    """
    z = np.concatenate([_transform(f_i, params), _transform(f_j, params)])
    e = float(params.a_vector @ z)
    activated = e if e >= 0 else params.leaky_slope * e
    return activated / max(w_ij, params.w_floor)


def _adjacency(graph: EventGraph) -> List[List[Tuple[int, float]]]:
    """노드별 (이웃 id, 가중치) 목록 (이웃 id 오름차순)"""
    neighbors = [[] for _ in range(graph.n_nodes)]
    for a, b, w in graph.edges:
        neighbors[a].append((b, w))
        neighbors[b].append((a, w))
    return [sorted(items) for items in neighbors]


def _softmax_coefficients(
    i: int,
    neighbors: List[Tuple[int, float]],
    feats: NodeFeatureSet,
    params: AttentionParams
) -> Dict[int, float]:
    logits = np.array([
        attention_logit(feats.features[i], feats.features[j], w, params)
        for j, w in neighbors
    ])
    # 오버플로 방지용 최대값 차감
    scores = np.exp(logits - logits.max())
    coeffs = scores / scores.sum()
    return {j: float(c) for (j, _), c in zip(neighbors, coeffs)}


def attention_coefficients(
    i: int,
    graph: EventGraph,
    feats: NodeFeatureSet,
    params: AttentionParams
) -> Dict[int, float]:
    """
    노드 i의 이웃별 어텐션 계수 (합 1)

    Args:
        i: 노드 id
        graph: (필터링된) EventGraph
        feats: 노드 특징
        params: AttentionParams

    Returns:
        {이웃 id: 계수}

    Raises:
        DomainError: 이웃이 없는 노드
    """
    if not 0 <= i < graph.n_nodes:
        raise DomainError(f"노드 id 범위 초과: {i}")

    neighbors = _adjacency(graph)[i]
    if not neighbors:
        raise DomainError(f"노드 {i}는 이웃이 없습니다")

    return _softmax_coefficients(i, neighbors, feats, params)


def aggregate(
    i: int,
    coeffs: Dict[int, float],
    feats: NodeFeatureSet,
    params: AttentionParams
) -> np.ndarray:
    """
    특징 집계: sum_j alpha_ij * W f_j

    Returns:
        길이 d_out 벡터
    """
    if not 0 <= i < len(feats):
        raise DomainError(f"노드 id 범위 초과: {i}")
    if any(not 0 <= j < len(feats) for j in coeffs):
        raise DomainError("계수의 이웃 id가 노드 범위를 벗어났습니다")

    out = np.zeros(params.d_out)
    for j, alpha in coeffs.items():
        out += alpha * _transform(feats.features[j], params)
    return out


def layer_forward(
    graph: EventGraph,
    feats: NodeFeatureSet,
    params: AttentionParams
) -> NodeFeatureSet:
    """
    어텐션 층 순전파

    이웃이 없는 노드는 자기 특징 변환 W f_i 를 출력한다.

    Args:
        graph: EventGraph
        feats: 모든 노드의 특징
        params: AttentionParams

    Returns:
        (노드 수, d_out) NodeFeatureSet
    """
    if len(feats) != graph.n_nodes:
        raise DomainError(f"특징 수({len(feats)})와 노드 수({graph.n_nodes})가 다릅니다")

    adjacency = _adjacency(graph)
    rows = []
    for i, neighbors in enumerate(adjacency):
        if neighbors:
            coeffs = _softmax_coefficients(i, neighbors, feats, params)
            rows.append(aggregate(i, coeffs, feats, params))
        else:
            rows.append(_transform(feats.features[i], params))

    if not rows:
        return NodeFeatureSet(np.zeros((0, params.d_out)))
    return NodeFeatureSet(np.vstack(rows))


def standardize_features(events: EventStream) -> NodeFeatureSet:
    """
    (x, y, t, p) 특징을 좌표별 평균 0, 분산 1로 표준화

    분산이 0인 좌표는 평균만 뺀다.
    """
    raw = np.column_stack([events.x, events.y, events.t, events.p]).astype(np.float64)
    if raw.shape[0] == 0:
        return NodeFeatureSet(np.zeros((0, 4)))

    centered = raw - raw.mean(axis=0)
    std = raw.std(axis=0)
    return NodeFeatureSet(centered / np.where(std > 0, std, 1.0))


def random_params(
    d_in: int = 4,
    d_out: int = 8,
    seed: int = 0,
    leaky_slope: float = 0.2,
    w_floor: float = 1e-6
) -> AttentionParams:
    """
    시드 기반 파라미터 생성 (Glorot 균등 분포, PCG64)

    Args:
        d_in, d_out: 입출력 차원
        seed: 난수 시드
        leaky_slope, w_floor: AttentionParams 참고

    Returns:
        AttentionParams
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    w_limit = math.sqrt(6.0 / (d_in + d_out))
    a_limit = math.sqrt(6.0 / (2 * d_out + 1))

    return AttentionParams(
        w_matrix=rng.uniform(-w_limit, w_limit, size=(d_in, d_out)),
        a_vector=rng.uniform(-a_limit, a_limit, size=2 * d_out),
        leaky_slope=leaky_slope,
        w_floor=w_floor,
    )


def load_params(
    path: Union[str, Path],
    default_seed: int = 0,
    w_floor: float = 1e-6
) -> AttentionParams:
    """
    파라미터 JSON 로드

    형식: {d_in, d_out, w_matrix(행 우선 1차원 또는 2차원), a_vector, leaky_slope, seed}
    w_matrix 또는 a_vector가 없으면 seed로 생성한다.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))

    d_in = int(data.get("d_in", 4))
    d_out = int(data.get("d_out", 8))
    leaky_slope = float(data.get("leaky_slope", 0.2))
    w_floor = float(data.get("w_floor", w_floor))

    if data.get("w_matrix") is None or data.get("a_vector") is None:
        return random_params(
            d_in=d_in, d_out=d_out, seed=int(data.get("seed", default_seed)),
            leaky_slope=leaky_slope, w_floor=w_floor,
        )

    w_matrix = np.asarray(data["w_matrix"], dtype=np.float64)
    if w_matrix.size != d_in * d_out:
        raise ValueError(f"w_matrix 원소 수({w_matrix.size})가 d_in * d_out과 다릅니다")

    return AttentionParams(
        w_matrix=w_matrix.reshape(d_in, d_out),
        a_vector=data["a_vector"],
        leaky_slope=leaky_slope,
        w_floor=w_floor,
    )


def save_params(params: AttentionParams, path: Union[str, Path], seed: Optional[int] = None):
    """파라미터 JSON 저장 (w_matrix는 행 우선 1차원)"""
    data = {
        "d_in": params.d_in,
        "d_out": params.d_out,
        "w_matrix": params.w_matrix.reshape(-1).tolist(),
        "a_vector": params.a_vector.tolist(),
        "leaky_slope": params.leaky_slope,
        "w_floor": params.w_floor,
        "seed": seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")

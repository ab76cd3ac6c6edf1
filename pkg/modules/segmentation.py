"""
적응형 세그멘테이션 모듈

정규화 밀도 기반 윈도우 분할과 제곱근 법칙 기반 복셀 분할 기능 제공
"""
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DomainError
from .event_io import EventStream, compute_extents, sort_by_time


@dataclass(frozen=True)
class SegmentationConfig:
    """
    세그멘테이션 설정

    Attributes:
        n_min: 윈도우당 최소 이벤트 수
        c_scale: 밀도 → 윈도우 용량 배율
        n_min_vox: 윈도우당 최소 복셀 수
        n_max_vox: 윈도우당 최대 복셀 수
    """
    n_min: int = 512
    c_scale: float = 1024.0
    n_min_vox: int = 4
    n_max_vox: int = 64

    def __post_init__(self):
        if self.n_min < 1:
            raise ValueError(f"n_min은 1 이상이어야 합니다: {self.n_min}")
        if not self.c_scale > 0:
            raise ValueError(f"c_scale은 양수여야 합니다: {self.c_scale}")
        if not 1 <= self.n_min_vox <= self.n_max_vox:
            raise ValueError(
                f"1 <= n_min_vox <= n_max_vox 조건 위반: "
                f"{self.n_min_vox}, {self.n_max_vox}"
            )


@dataclass(frozen=True)
class Window:
    """시간순으로 정렬된 연속 이벤트 묶음"""
    events: EventStream
    index: int

    def __post_init__(self):
        if len(self.events) == 0:
            raise ValueError("빈 윈도우는 허용되지 않습니다")
        if not self.events.sorted_by_time:
            raise ValueError("윈도우 이벤트는 시간순 정렬되어야 합니다")


@dataclass(frozen=True)
class Voxel:
    """
    윈도우의 시간 구간 조각

    Attributes:
        events: 구간 [t_lo, t_hi)에 속하는 이벤트 (윈도우 마지막 복셀은 t_hi 포함)
        window_index: 소속 윈도우 번호
        voxel_index: 윈도우 내 복셀 번호
        t_lo, t_hi: 구간 경계 (마이크로초)
    """
    events: EventStream
    window_index: int
    voxel_index: int
    t_lo: float
    t_hi: float

    def __len__(self) -> int:
        return len(self.events)


def normalized_density(stream: EventStream) -> float:
    """
    정규화 밀도 계산

    N_points / (x_range * y_range * t_range), 각 범위는 최소 1로 클램프

    Args:
        stream: 비어 있지 않은 EventStream

    Returns:
        양의 실수 밀도
    """
    if len(stream) == 0:
        raise DomainError("빈 스트림의 밀도는 정의되지 않습니다")

    x_range, y_range, t_range = compute_extents(stream).spans()
    return len(stream) / (x_range * y_range * t_range)


def window_capacity(density: float, config: SegmentationConfig) -> int:
    """
    윈도우 용량 (윈도우당 이벤트 수)

    max(n_min, floor(density * c_scale))
    """
    if not density > 0:
        raise DomainError(f"밀도는 양수여야 합니다: {density}")
    return max(config.n_min, int(math.floor(density * config.c_scale)))


def window_count(n_points: int, capacity: int) -> int:
    """윈도우 개수 = ceil(n_points / capacity)"""
    if n_points < 1 or capacity < 1:
        raise DomainError(f"n_points, capacity는 1 이상이어야 합니다: {n_points}, {capacity}")
    return -(-n_points // capacity)


def partition_windows(stream: EventStream, config: SegmentationConfig) -> List[Window]:
    """
    윈도우 분할

    전체 스트림을 시간순 정렬한 뒤 용량 단위로 연속 분할한다.
    마지막 윈도우는 나머지 이벤트를 담는다.

    Args:
        stream: 비어 있지 않은 EventStream
        config: 세그멘테이션 설정

    Returns:
        Window 리스트 (시간순)
    """
    capacity = window_capacity(normalized_density(stream), config)
    ordered = sort_by_time(stream)
    n_windows = window_count(len(ordered), capacity)

    windows = []
    for w in range(n_windows):
        idx = np.arange(w * capacity, min((w + 1) * capacity, len(ordered)))
        windows.append(Window(events=ordered.take(idx, sorted_by_time=True), index=w))

    return windows


def voxel_count(window: Window, config: SegmentationConfig) -> int:
    """
    제곱근 법칙 기반 복셀 개수

    round(sqrt(X * Y * T))를 [n_min_vox, n_max_vox]로 클램프
    """
    x_range, y_range, t_range = compute_extents(window.events).spans()
    raw = math.floor(math.sqrt(x_range * y_range * t_range) + 0.5)
    return max(config.n_min_vox, min(config.n_max_vox, raw))


def partition_voxels(window: Window, n_voxels: int) -> List[Voxel]:
    """
    시간 구간 기반 복셀 분할

    윈도우의 [t_min, t_max]를 같은 길이의 n_voxels 구간으로 나눈다.
    빈 복셀도 결과에 포함된다.

    Args:
        window: Window
        n_voxels: 복셀 개수 (1 이상)

    Returns:
        Voxel 리스트 (t_lo 순)
    """
    if n_voxels < 1:
        raise DomainError(f"n_voxels는 1 이상이어야 합니다: {n_voxels}")

    events = window.events
    t_min = int(events.t[0])
    duration = max(int(events.t[-1]) - t_min, 1)

    # 정수 연산으로 구간 번호 계산 (마지막 구간은 t_max 포함)
    slots = np.minimum((events.t - t_min) * n_voxels // duration, n_voxels - 1)

    voxels = []
    for k in range(n_voxels):
        idx = np.flatnonzero(slots == k)
        voxels.append(Voxel(
            events=events.take(idx, sorted_by_time=True),
            window_index=window.index,
            voxel_index=k,
            t_lo=t_min + k * duration / n_voxels,
            t_hi=t_min + (k + 1) * duration / n_voxels,
        ))

    return voxels


def segment(stream: EventStream, config: SegmentationConfig) -> List[Voxel]:
    """
    적응형 이벤트 세그멘테이션

    밀도 → 윈도우 용량 → 윈도우 분할 → 윈도우별 복셀 수 → 복셀 분할

    Args:
        stream: 비어 있지 않은 EventStream
        config: 세그멘테이션 설정

    Returns:
        (윈도우, 복셀) 순서의 Voxel 리스트
    """
    voxels = []
    for window in partition_windows(stream, config):
        voxels.extend(partition_voxels(window, voxel_count(window, config)))
    return voxels

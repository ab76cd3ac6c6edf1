"""
합성 데이터 생성 및 디노이징 평가 모듈

이동 막대/원판의 가장자리를 따라 신호 이벤트를 만들고 균등 노이즈를 섞어
정답 라벨이 있는 스트림을 생성한다.
"""
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError
from .event_io import COLUMNS, EventStream, sort_by_time

LABEL_SIGNAL = 1
LABEL_NOISE = 0


class SceneObject(str, Enum):
    MOVING_BAR = "moving_bar"
    MOVING_DISC = "moving_disc"


class NoiseModel(str, Enum):
    UNIFORM = "uniform"


@dataclass(frozen=True)
class SynthConfig:
    """
    합성 장면 설정

    Attributes:
        width, height: 센서 크기 (픽셀)
        duration: 길이 (마이크로초)
        signal_rate: 마이크로초당 신호 이벤트 수
        noise_fraction: 전체 중 노이즈 비율 [0, 1)
        object: 이동 물체 종류
        velocity: (vx, vy) 픽셀/마이크로초
        seed: 난수 시드
        object_size: 물체 크기 (픽셀)
        noise_model: 노이즈 모델
    """
    width: int = 64
    height: int = 64
    duration: int = 5000
    signal_rate: float = 1.0
    noise_fraction: float = 0.3
    object: SceneObject = SceneObject.MOVING_BAR
    velocity: Tuple[float, float] = (0.008, 0.0)
    seed: int = 0
    object_size: int = 8
    noise_model: NoiseModel = NoiseModel.UNIFORM

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.duration < 1:
            raise ValueError("width, height, duration은 1 이상이어야 합니다")
        if not 0 <= self.noise_fraction < 1:
            raise ValueError(f"noise_fraction은 [0, 1) 범위여야 합니다: {self.noise_fraction}")
        if self.signal_rate < 0:
            raise ValueError(f"signal_rate는 음수일 수 없습니다: {self.signal_rate}")
        if self.object_size < 1:
            raise ValueError(f"object_size는 1 이상이어야 합니다: {self.object_size}")
        object.__setattr__(self, "object", SceneObject(self.object))
        object.__setattr__(self, "noise_model", NoiseModel(self.noise_model))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))


@dataclass(frozen=True, eq=False)
class LabeledEventStream:
    """라벨(1 = 신호, 0 = 노이즈)이 붙은 이벤트 스트림"""
    stream: EventStream
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if len(labels) != len(self.stream):
            raise ValueError(f"라벨 수({len(labels)})와 이벤트 수({len(self.stream)})가 다릅니다")
        if not np.isin(labels, (LABEL_NOISE, LABEL_SIGNAL)).all():
            raise ValueError("라벨은 0 또는 1이어야 합니다")

    def __len__(self) -> int:
        return len(self.stream)

    @property
    def signal_mask(self) -> np.ndarray:
        return self.labels == LABEL_SIGNAL


@dataclass(frozen=True)
class DenoiseMetrics:
    """
    디노이징 평가 지표 (신호 = 양성 클래스)

    Attributes:
        precision, recall: 신호 기준 정밀도/재현율
        noise_removed_fraction: 제거된 노이즈 비율
        input_noise_fraction: 입력의 노이즈 비율
        output_noise_fraction: 유지된 이벤트 중 노이즈 비율
        signal_kept, noise_kept, signal_removed, noise_removed: 혼동 행렬 칸
    """
    precision: float
    recall: float
    noise_removed_fraction: float
    input_noise_fraction: float
    output_noise_fraction: float
    signal_kept: int = 0
    noise_kept: int = 0
    signal_removed: int = 0
    noise_removed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _object_centers(config: SynthConfig, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """시각 t의 물체 중심 (궤적은 화면 중앙을 duration/2에 지난다)"""
    vx, vy = config.velocity
    offset = t - config.duration / 2.0
    return config.width / 2.0 + vx * offset, config.height / 2.0 + vy * offset


def _heading(config: SynthConfig) -> Tuple[float, float]:
    vx, vy = config.velocity
    speed = math.hypot(vx, vy)
    if speed == 0:
        return 1.0, 0.0
    return vx / speed, vy / speed


def _signal_events(config: SynthConfig, rng: np.random.Generator, n_signal: int):
    t = np.sort(rng.integers(0, config.duration, size=n_signal))
    cx, cy = _object_centers(config, t)
    hx, hy = _heading(config)
    size = float(config.object_size)

    if config.object == SceneObject.MOVING_BAR:
        # 진행 방향에 수직인 막대, 앞쪽 가장자리 +1 / 뒤쪽 가장자리 -1
        leading = rng.random(n_signal) < 0.5
        side = np.where(leading, 0.5, -0.5) * size
        along = rng.uniform(-size, size, size=n_signal)
        x = cx + hx * side - hy * along
        y = cy + hy * side + hx * along
        p = np.where(leading, 1, -1)
    else:
        phi = rng.uniform(0.0, 2.0 * math.pi, size=n_signal)
        x = cx + size * np.cos(phi)
        y = cy + size * np.sin(phi)
        leading = (np.cos(phi) * hx + np.sin(phi) * hy) >= 0
        p = np.where(leading, 1, -1)

    x = np.clip(np.rint(x), 0, config.width - 1).astype(np.int64)
    y = np.clip(np.rint(y), 0, config.height - 1).astype(np.int64)
    return x, y, t, p


def _noise_events(config: SynthConfig, rng: np.random.Generator, n_noise: int):
    if config.noise_model == NoiseModel.UNIFORM:
        x = rng.integers(0, config.width, size=n_noise)
        y = rng.integers(0, config.height, size=n_noise)
        t = rng.integers(0, config.duration, size=n_noise)
        p = rng.choice(np.array([-1, 1]), size=n_noise)
        return x, y, t, p
    raise ValueError(f"지원하지 않는 노이즈 모델: {config.noise_model}")


def generate(config: SynthConfig) -> LabeledEventStream:
    """
    라벨 합성 장면 생성

    시드가 같으면 결과가 같다 (numpy PCG64).
    노이즈 수 = round(noise_fraction / (1 - noise_fraction) * 신호 수)

    Args:
        config: SynthConfig

    Returns:
        시간순 정렬된 LabeledEventStream
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))

    n_signal = _round_half_up(config.signal_rate * config.duration)
    n_noise = _round_half_up(config.noise_fraction / (1.0 - config.noise_fraction) * n_signal)

    signal = _signal_events(config, rng, n_signal)
    noise = _noise_events(config, rng, n_noise)

    stream = EventStream(*(np.concatenate([s, n]) for s, n in zip(signal, noise)))
    labels = np.concatenate([
        np.full(n_signal, LABEL_SIGNAL, dtype=np.int8),
        np.full(n_noise, LABEL_NOISE, dtype=np.int8),
    ])

    order = np.argsort(stream.t, kind="stable")
    return LabeledEventStream(stream=sort_by_time(stream), labels=labels[order])


def _ratio(numerator: int, denominator: int) -> float:
    # 분모가 0이면 분자 집합도 비어 있으므로 1
    return numerator / denominator if denominator else 1.0


def evaluate(labeled: LabeledEventStream, kept_indices: Sequence[int]) -> DenoiseMetrics:
    """
    디노이징 결과 평가

    Args:
        labeled: 원본 라벨 스트림
        kept_indices: 유지된 이벤트 인덱스

    Returns:
        DenoiseMetrics
    """
    n = len(labeled)
    kept_indices = np.asarray(kept_indices, dtype=np.int64).reshape(-1)
    if kept_indices.size and (kept_indices.min() < 0 or kept_indices.max() >= n):
        raise DomainError("kept_indices가 스트림 범위를 벗어났습니다")

    kept = np.zeros(n, dtype=bool)
    kept[kept_indices] = True
    signal = labeled.signal_mask

    signal_kept = int((signal & kept).sum())
    noise_kept = int((~signal & kept).sum())
    signal_removed = int((signal & ~kept).sum())
    noise_removed = int((~signal & ~kept).sum())
    n_noise = noise_kept + noise_removed
    n_kept = signal_kept + noise_kept

    return DenoiseMetrics(
        precision=_ratio(signal_kept, n_kept),
        recall=_ratio(signal_kept, signal_kept + signal_removed),
        # 노이즈가 없으면 제거한 것도 없다
        noise_removed_fraction=noise_removed / n_noise if n_noise else 0.0,
        input_noise_fraction=n_noise / n if n else 0.0,
        output_noise_fraction=noise_kept / n_kept if n_kept else 0.0,
        signal_kept=signal_kept,
        noise_kept=noise_kept,
        signal_removed=signal_removed,
        noise_removed=noise_removed,
    )


def write_labels(labels: Sequence[int]) -> bytes:
    """라벨 사이드카 직렬화 (한 줄에 0/1)"""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return b""
    return pd.Series(labels).to_csv(header=False, index=False, lineterminator="\n").encode("utf-8")


def read_labels(text: Union[bytes, str]) -> np.ndarray:
    """라벨 사이드카 파싱"""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not text.strip():
        return np.zeros(0, dtype=np.int8)

    labels = pd.read_csv(io.StringIO(text), header=None, names=["label"])["label"]
    if not labels.isin([LABEL_NOISE, LABEL_SIGNAL]).all():
        raise DomainError("라벨 파일에는 0 또는 1만 올 수 있습니다")
    return labels.to_numpy(dtype=np.int8)


def match_kept_indices(original: EventStream, denoised: EventStream) -> np.ndarray:
    """
    디노이징 출력 이벤트를 원본 인덱스에 대응

    (x, y, t, p)와 같은 값의 등장 순번으로 다중집합 조인한다.

    Args:
        original: 원본 스트림
        denoised: 디노이징된 스트림 (원본의 부분 다중집합)

    Returns:
        유지된 원본 인덱스 (오름차순)
    """
    left = original.to_frame()
    left["occurrence"] = left.groupby(COLUMNS).cumcount()
    left["index"] = np.arange(len(left))

    right = denoised.to_frame()
    right["occurrence"] = right.groupby(COLUMNS).cumcount()

    merged = left.merge(right, on=COLUMNS + ["occurrence"], how="inner")
    if len(merged) != len(right):
        raise DomainError(
            f"디노이징 출력 중 {len(right) - len(merged)}건이 원본에 없습니다"
        )
    return np.sort(merged["index"].to_numpy())

"""
이벤트 입출력 모듈

이벤트 데이터 모델, CSV 파싱/저장, 범위(extent) 계산 기능 제공
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DomainError, EventParseError

COLUMNS = ["x", "y", "t", "p"]
_INT_PATTERN = r"\s*[-+]?\d+\s*"
_INT64_MAX = str(np.iinfo(np.int64).max)


def _out_of_int64(col: pd.Series) -> pd.Series:
    """int64 범위를 넘는 정수 문자열 여부 (자릿수 비교)"""
    digits = col.str.strip().str.lstrip("+-").str.lstrip("0")
    width = digits.str.len()
    return (width > len(_INT64_MAX)) | ((width == len(_INT64_MAX)) & (digits > _INT64_MAX))


@dataclass(frozen=True)
class Event:
    """
    단일 카메라 이벤트

    Attributes:
        x: 픽셀 열
        y: 픽셀 행
        t: 타임스탬프 (마이크로초)
        p: 극성 (-1 또는 +1)
    """
    x: int
    y: int
    t: int
    p: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0 or self.t < 0:
            raise ValueError(f"좌표/시간은 음수일 수 없습니다: {self}")
        if self.p not in (-1, 1):
            raise ValueError(f"극성은 -1 또는 +1 이어야 합니다: {self.p}")


@dataclass(frozen=True, eq=False)
class EventStream:
    """
    이벤트 스트림 (열 단위 numpy 배열 보관)

    생성 후에는 배열이 읽기 전용으로 고정되므로 병렬 작업자 간 공유해도 안전하다.
    """
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    sorted_by_time: bool = False

    def __post_init__(self):
        columns = {}
        for name in COLUMNS:
            arr = np.array(getattr(self, name), dtype=np.int64).reshape(-1)
            arr.setflags(write=False)
            columns[name] = arr
            object.__setattr__(self, name, arr)

        lengths = {len(arr) for arr in columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"열 길이가 서로 다릅니다: {lengths}")

        if len(self.x):
            if (self.x < 0).any() or (self.y < 0).any() or (self.t < 0).any():
                raise ValueError("좌표/시간은 음수일 수 없습니다")
            if not np.isin(self.p, (-1, 1)).all():
                raise ValueError("극성은 -1 또는 +1 이어야 합니다")
            if self.sorted_by_time and (np.diff(self.t) < 0).any():
                raise ValueError("sorted_by_time 스트림의 t가 감소합니다")

    @classmethod
    def empty(cls) -> "EventStream":
        return cls(x=[], y=[], t=[], p=[])

    @classmethod
    def from_events(
        cls,
        events: Sequence[Event],
        sorted_by_time: bool = False
    ) -> "EventStream":
        """
        Event 목록으로 스트림 생성

        Args:
            events: Event 시퀀스
            sorted_by_time: 시간 정렬 여부 플래그

        Returns:
            EventStream
        """
        return cls(
            x=[e.x for e in events],
            y=[e.y for e in events],
            t=[e.t for e in events],
            p=[e.p for e in events],
            sorted_by_time=sorted_by_time,
        )

    @classmethod
    def from_frame(cls, df: pd.DataFrame, sorted_by_time: bool = False) -> "EventStream":
        return cls(
            x=df["x"].to_numpy(),
            y=df["y"].to_numpy(),
            t=df["t"].to_numpy(),
            p=df["p"].to_numpy(),
            sorted_by_time=sorted_by_time,
        )

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, index: int) -> Event:
        return Event(
            int(self.x[index]), int(self.y[index]),
            int(self.t[index]), int(self.p[index])
        )

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.sorted_by_time == other.sorted_by_time
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in COLUMNS)
        )

    @property
    def events(self) -> List[Event]:
        return list(self)

    def take(self, indices: Sequence[int], sorted_by_time: bool = False) -> "EventStream":
        """
        인덱스 순서대로 부분 스트림 추출

        Args:
            indices: 추출할 인덱스
            sorted_by_time: 결과 스트림의 정렬 플래그

        Returns:
            EventStream
        """
        idx = np.asarray(indices, dtype=np.int64)
        return EventStream(
            x=self.x[idx], y=self.y[idx], t=self.t[idx], p=self.p[idx],
            sorted_by_time=sorted_by_time,
        )

    def coordinates(self) -> np.ndarray:
        """(N, 3) 실수 배열 (x, y, t)"""
        return np.column_stack([self.x, self.y, self.t]).astype(np.float64)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({c: getattr(self, c) for c in COLUMNS})


@dataclass(frozen=True)
class Extents:
    """
    스트림의 좌표/시간 범위

    Attributes:
        x_min, x_max, y_min, y_max: 픽셀
        t_min, t_max: 마이크로초
    """
    x_min: int
    x_max: int
    y_min: int
    y_max: int
    t_min: int
    t_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max or self.t_min > self.t_max:
            raise ValueError(f"잘못된 범위: {self}")

    def spans(self, floor: float = 1.0) -> tuple:
        """
        각 축의 범위 (하한 floor로 클램프)

        Returns:
            (x_range, y_range, t_range) 실수 튜플
        """
        return (
            max(float(self.x_max - self.x_min), floor),
            max(float(self.y_max - self.y_min), floor),
            max(float(self.t_max - self.t_min), floor),
        )


def parse_event_csv(text: Union[bytes, str]) -> EventStream:
    """
    이벤트 CSV 파싱

    형식: "x,y,t,p" (헤더 줄은 선택)
    극성 0은 -1(OFF 이벤트)로 변환

    Args:
        text: UTF-8 바이트열 또는 문자열

    Returns:
        파일 순서 그대로의 EventStream (sorted_by_time 미설정)

    Raises:
        EventParseError: 형식이 잘못된 줄
        DomainError: 극성이 {-1, 0, 1} 밖이거나 좌표/시간이 음수
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise EventParseError(text[:e.start].count(b"\n") + 1, "UTF-8 디코딩 실패")

    if not text.strip():
        return EventStream.empty()

    # 줄 번호 = index + 1
    lines = pd.Series(text.splitlines(), dtype=object)
    lines.index = lines.index + 1
    lines = lines[lines.str.strip() != ""]
    if lines.empty:
        return EventStream.empty()

    # 헤더 줄 제거
    if lines.iloc[0].replace(" ", "") == ",".join(COLUMNS):
        lines = lines.iloc[1:]
        if lines.empty:
            return EventStream.empty()

    field_counts = lines.str.count(",") + 1
    if (field_counts != 4).any():
        bad_line = int(field_counts.index[(field_counts != 4).to_numpy()][0])
        raise EventParseError(bad_line, f"필드가 4개가 아닙니다 ({field_counts[bad_line]}개)")

    df = lines.str.split(",", expand=True)
    df.columns = COLUMNS
    valid = df.apply(lambda col: col.str.fullmatch(_INT_PATTERN)).all(axis=1)
    if not valid.all():
        bad_line = int(valid.index[(~valid).to_numpy()][0])
        raise EventParseError(bad_line, "정수 필드 4개가 필요합니다")

    overflow = df.apply(_out_of_int64).any(axis=1)
    if overflow.any():
        bad_line = int(overflow.index[overflow.to_numpy()][0])
        raise EventParseError(bad_line, "정수 값이 int64 범위를 벗어났습니다")

    values = df.apply(lambda col: col.str.strip().astype(np.int64))

    bad_p = ~values["p"].isin([-1, 0, 1])
    if bad_p.any():
        line = int(values.index[bad_p.to_numpy()][0])
        raise DomainError(f"{line}번째 줄: 극성 값이 잘못되었습니다 ({values.loc[line, 'p']})")

    negative = (values[["x", "y", "t"]] < 0).any(axis=1)
    if negative.any():
        line = int(values.index[negative.to_numpy()][0])
        raise DomainError(f"{line}번째 줄: 좌표/시간은 음수일 수 없습니다")

    values["p"] = values["p"].replace(0, -1)

    return EventStream.from_frame(values)


def write_event_csv(stream: EventStream) -> bytes:
    """
    이벤트 CSV 직렬화

    Args:
        stream: EventStream

    Returns:
        "x,y,t,p" 줄 단위 UTF-8 바이트열 (헤더 없음)
    """
    if len(stream) == 0:
        return b""
    return stream.to_frame().to_csv(
        header=False, index=False, lineterminator="\n"
    ).encode("utf-8")


def read_event_file(file_path: Union[str, Path]) -> EventStream:
    """
    이벤트 CSV 파일 로드

    Args:
        file_path: 파일 경로

    Returns:
        EventStream
    """
    return parse_event_csv(Path(file_path).read_bytes())


def write_event_file(stream: EventStream, file_path: Union[str, Path]):
    """이벤트 CSV 파일 저장"""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_bytes(write_event_csv(stream))


def compute_extents(stream: EventStream) -> Extents:
    """
    좌표/시간 범위 계산

    Args:
        stream: 비어 있지 않은 EventStream

    Returns:
        Extents

    Raises:
        DomainError: 빈 스트림
    """
    if len(stream) == 0:
        raise DomainError("빈 스트림의 범위는 정의되지 않습니다")

    return Extents(
        x_min=int(stream.x.min()), x_max=int(stream.x.max()),
        y_min=int(stream.y.min()), y_max=int(stream.y.max()),
        t_min=int(stream.t.min()), t_max=int(stream.t.max()),
    )


def sort_by_time(stream: EventStream) -> EventStream:
    """
    시간순 안정 정렬

    같은 t를 가진 이벤트는 입력 순서를 유지한다.

    Args:
        stream: EventStream

    Returns:
        sorted_by_time이 설정된 EventStream
    """
    order = np.argsort(stream.t, kind="stable")
    return stream.take(order, sorted_by_time=True)

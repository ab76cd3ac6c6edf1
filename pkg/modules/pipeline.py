"""
처리 파이프라인

세그멘테이션 → 그래프 구성 → 임계값 탐색 → 필터링 전체 과정을 통합 관리
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .attention import (
    AttentionParams,
    NodeFeatureSet,
    layer_forward,
    standardize_features,
)
from .denoise import DenoisedVoxel, count_components, denoise_voxel
from .errors import DomainError
from .event_io import EventStream, read_event_file, sort_by_time, write_event_file
from .graph_build import WeightParams, build_graph
from .segmentation import SegmentationConfig, Voxel, segment
from .synth import SynthConfig, evaluate, generate, match_kept_indices

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    """
    파이프라인 설정

    Attributes:
        segmentation: 세그멘테이션 설정
        weights: 간선 가중치 계수
        preset: 가중치 프리셋 이름 (직접 지정이면 None)
        attention_params_path: 어텐션 파라미터 파일 (없으면 seed 사용)
        seed: 난수 시드
        threads: 복셀 처리 작업자 수
        report_path: JSON 리포트 경로
    """
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    weights: WeightParams = field(default_factory=lambda: WeightParams(0.7, 0.1, 0.1, 0.1))
    preset: Optional[str] = None
    attention_params_path: Optional[Path] = None
    seed: int = 0
    threads: int = 1
    report_path: Optional[Path] = None

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError(f"threads는 1 이상이어야 합니다: {self.threads}")

    def as_dict(self) -> dict:
        seg = self.segmentation
        return {
            "segmentation": {
                "n_min": seg.n_min,
                "c_scale": seg.c_scale,
                "n_min_vox": seg.n_min_vox,
                "n_max_vox": seg.n_max_vox,
            },
            "preset": self.preset,
            "weights": self.weights.as_dict(),
        }


@dataclass(frozen=True)
class PipelineResult:
    """
    파이프라인 실행 결과

    Attributes:
        stream: 입력 스트림
        voxels: 세그멘테이션 결과
        denoised: 복셀별 디노이징 결과 (voxels와 같은 순서)
        output: 유지된 이벤트 (시간순)
    """
    stream: EventStream
    voxels: List[Voxel]
    denoised: List[DenoisedVoxel]
    output: EventStream

    @property
    def n_windows(self) -> int:
        return len({v.window_index for v in self.voxels})

    @property
    def n_removed(self) -> int:
        return len(self.stream) - len(self.output)


def resolve_weights(
    presets: Dict[str, tuple],
    preset: Optional[str] = None,
    alpha: Optional[float] = None,
    beta: Optional[float] = None,
    gamma: Optional[float] = None,
    delta: Optional[float] = None,
    normalize_factors: bool = True
) -> WeightParams:
    """
    프리셋과 개별 계수로 WeightParams 구성

    개별 계수가 주어지면 프리셋 값을 덮어쓴다.

    Args:
        presets: {이름: (alpha, beta, gamma, delta)}
        preset: 프리셋 이름
        alpha, beta, gamma, delta: 개별 계수
        normalize_factors: 요소 정규화 여부

    Returns:
        WeightParams
    """
    if preset is not None and preset not in presets:
        raise ValueError(f"알 수 없는 프리셋: {preset} (가능: {', '.join(sorted(presets))})")

    base = presets[preset] if preset is not None else (0.0, 0.0, 0.0, 0.0)
    overrides = (alpha, beta, gamma, delta)
    coeffs = [b if o is None else float(o) for b, o in zip(base, overrides)]

    return WeightParams(*coeffs, normalize_factors=normalize_factors)


def find_voxel(voxels: Sequence[Voxel], window: int, voxel: int) -> Voxel:
    """(윈도우, 복셀) 번호로 복셀 찾기"""
    for v in voxels:
        if v.window_index == window and v.voxel_index == voxel:
            return v
    raise DomainError(f"복셀을 찾을 수 없습니다: 윈도우 {window}, 복셀 {voxel}")


class EventPipeline:
    """
    이벤트 디노이징 파이프라인 메인 클래스
    """

    def __init__(self, config: PipelineConfig, verbose: bool = True):
        """
        Args:
            config: PipelineConfig
            verbose: 진행 상황 출력 여부
        """
        self.config = config
        self.verbose = verbose

    def _log(self, message: str):
        if self.verbose:
            print(message)

    def _map(self, fn: Callable, items: Sequence) -> list:
        """
        복셀 단위 병렬 처리

        결과 순서는 입력 순서와 같다.
        """
        if self.config.threads <= 1 or len(items) <= 1:
            return [fn(item) for item in items]

        with ThreadPoolExecutor(max_workers=self.config.threads) as executor:
            return list(executor.map(fn, items))

    def segment(self, stream: EventStream) -> List[Voxel]:
        if len(stream) == 0:
            raise DomainError("입력 스트림이 비어 있습니다")
        return segment(stream, self.config.segmentation)

    def denoise_stream(self, stream: EventStream) -> PipelineResult:
        """
        스트림 디노이징

        Args:
            stream: 비어 있지 않은 EventStream

        Returns:
            PipelineResult
        """
        voxels = self.segment(stream)
        self._log(f"  → 윈도우 {len({v.window_index for v in voxels})}개, 복셀 {len(voxels)}개")

        weights = self.config.weights
        denoised = self._map(lambda voxel: denoise_voxel(voxel, weights), voxels)

        kept_parts = [
            voxel.events.take(list(result.kept))
            for voxel, result in zip(voxels, denoised)
        ]
        merged = EventStream(*(
            np.concatenate([getattr(part, c) for part in kept_parts])
            for c in ("x", "y", "t", "p")
        ))

        return PipelineResult(
            stream=stream,
            voxels=voxels,
            denoised=denoised,
            output=sort_by_time(merged),
        )

    def run_file(
        self,
        input_path: Path,
        output_path: Path,
        report_path: Optional[Path] = None,
        stream: Optional[EventStream] = None
    ) -> PipelineResult:
        """
        이벤트 CSV 파일 디노이징

        Args:
            input_path: 입력 CSV
            output_path: 디노이징된 CSV 출력 경로
            report_path: JSON 리포트 경로 (옵션)
            stream: 이미 읽은 입력 스트림 (옵션, 주어지면 파일을 다시 읽지 않음)

        Returns:
            PipelineResult
        """
        if stream is None:
            self._log(f"파일 로드 중: {input_path}")
            stream = read_event_file(input_path)
        self._log(f"  → {len(stream)}건 입력")

        self._log("디노이징 중...")
        result = self.denoise_stream(stream)

        write_event_file(result.output, output_path)
        self._log(f"✅ 결과 저장 완료: {output_path}")

        report_path = report_path or self.config.report_path
        if report_path:
            write_json(self.build_report(result), report_path)
            self._log(f"✅ 리포트 저장 완료: {report_path}")

        if self.verbose:
            self._print_statistics(result)

        return result

    def build_report(self, result: PipelineResult) -> dict:
        """
        JSON 리포트 구성

        Returns:
            schema_version, config, counts, voxels 키를 가진 딕셔너리
        """
        voxel_rows = []
        for voxel, denoised in zip(result.voxels, result.denoised):
            search = denoised.search
            voxel_rows.append({
                "window": voxel.window_index,
                "voxel": voxel.voxel_index,
                "n_nodes": len(voxel),
                "n_edges": len(voxel) * (len(voxel) - 1) // 2,
                "mst_max": search.mst_max if search else None,
                "t_opt": search.t_opt if search else None,
                "best_variance": search.best_variance if search else None,
                "n_candidates": len(search.curve) if search else 0,
                "n_removed": len(denoised.removed),
            })

        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": self.config.as_dict(),
            "counts": {
                "events_in": len(result.stream),
                "kept": len(result.output),
                "removed": result.n_removed,
                "windows": result.n_windows,
                "voxels": len(result.voxels),
            },
            "voxels": voxel_rows,
        }

    def stats_table(self, result: PipelineResult) -> pd.DataFrame:
        """
        복셀별 그래프/가중치 진단 표

        Returns:
            DataFrame (window, voxel, n_nodes, n_edges, w_min, w_mean, w_max,
                       mst_max, t_opt, n_removed, n_components)
        """
        rows = []
        for voxel, denoised in zip(result.voxels, result.denoised):
            search = denoised.search
            full_weights = None
            if search is not None:
                # 필터 전 그래프의 가중치 통계
                full_weights = build_graph(voxel, self.config.weights).w

            rows.append({
                "window": voxel.window_index,
                "voxel": voxel.voxel_index,
                "n_nodes": len(voxel),
                "n_edges": len(voxel) * (len(voxel) - 1) // 2,
                "w_min": float(full_weights.min()) if full_weights is not None else None,
                "w_mean": float(full_weights.mean()) if full_weights is not None else None,
                "w_max": float(full_weights.max()) if full_weights is not None else None,
                "mst_max": search.mst_max if search else None,
                "t_opt": search.t_opt if search else None,
                "n_removed": len(denoised.removed),
                "n_components": (
                    count_components(denoised.graph, search.t_opt) if search else len(voxel)
                ),
            })

        return pd.DataFrame(rows)

    def attend(
        self,
        result: PipelineResult,
        window: int,
        voxel: int,
        params: AttentionParams
    ) -> NodeFeatureSet:
        """
        디노이징된 복셀에 어텐션 순전파 적용

        특징은 복셀 단위로 표준화한 (x, y, t, p)이다.
        """
        target = find_voxel(result.voxels, window, voxel)
        denoised = result.denoised[result.voxels.index(target)]
        feats = standardize_features(target.events)
        return layer_forward(denoised.graph, feats, params)

    def _print_statistics(self, result: PipelineResult):
        """
        처리 통계 출력

        Args:
            result: PipelineResult
        """
        print("\n=== 디노이징 통계 ===")
        print(f"입력 이벤트: {len(result.stream)}건")
        print(f"유지: {len(result.output)}건")

        if len(result.stream):
            pct = result.n_removed / len(result.stream) * 100
            print(f"제거: {result.n_removed}건 ({pct:.1f}%)")

        print(f"윈도우: {result.n_windows}개")
        print(f"복셀: {len(result.voxels)}개")

        thresholds = [d.search.t_opt for d in result.denoised if d.search is not None]
        if thresholds:
            print("\n[임계값 통계]")
            print(f"  평균: {np.mean(thresholds):.4f}")
            print(f"  최소: {np.min(thresholds):.4f}")
            print(f"  최대: {np.max(thresholds):.4f}")

        skipped = sum(1 for d in result.denoised if d.search is None)
        if skipped:
            print(f"\n⚠️  노드 1개 이하로 통과 처리된 복셀: {skipped}개")


def run_pipeline(
    input_path: Path,
    output_path: Path,
    config: PipelineConfig,
    verbose: bool = True,
    stream: Optional[EventStream] = None
) -> PipelineResult:
    """이벤트 CSV → 디노이징 CSV + JSON 리포트"""
    return EventPipeline(config, verbose=verbose).run_file(
        input_path, output_path, config.report_path, stream=stream
    )


def write_json(data: dict, path: Path):
    """결정적 JSON 저장 (UTF-8, 들여쓰기 2)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def save_table(df: pd.DataFrame, output_path: Path):
    """
    표 저장

    Args:
        df: 저장할 DataFrame
        output_path: .csv 또는 .xlsx 경로
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    if output_path.suffix == ".csv":
        df.to_csv(output_path, index=False, lineterminator="\n")
    elif output_path.suffix == ".xlsx":
        df.to_excel(output_path, index=False)
    else:
        raise ValueError(f"지원하지 않는 출력 형식: {output_path.suffix}")


def voxel_records(voxels: Sequence[Voxel]) -> List[dict]:
    """복셀 덤프 레코드 (JSON Lines 한 줄에 하나)"""
    return [
        {
            "window_index": v.window_index,
            "voxel_index": v.voxel_index,
            "t_lo": v.t_lo,
            "t_hi": v.t_hi,
            "events": [[e.x, e.y, e.t, e.p] for e in v.events],
        }
        for v in voxels
    ]


def write_voxel_dump(voxels: Sequence[Voxel], path: Path):
    """복셀 JSON Lines 저장"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(record) for record in voxel_records(voxels)]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def calibrate(
    base: SynthConfig,
    segmentation: SegmentationConfig,
    presets: Dict[str, WeightParams],
    scenes: int = 20,
    threads: int = 1,
    verbose: bool = True
) -> dict:
    """
    합성 장면 보정 실험

    seed, seed+1, ... 장면마다 디노이징 없는 기준선과 각 프리셋을 평가한다.

    Args:
        base: 기준 SynthConfig (seed는 첫 장면)
        segmentation: 세그멘테이션 설정
        presets: {이름: WeightParams}
        scenes: 장면 수
        threads: 복셀 처리 작업자 수
        verbose: 진행 상황 출력 여부

    Returns:
        rows(장면별), summary(프리셋별 평균) 를 담은 리포트 딕셔너리
    """
    if scenes < 1:
        raise ValueError(f"scenes는 1 이상이어야 합니다: {scenes}")

    rows = []
    for k in range(scenes):
        scene = replace(base, seed=base.seed + k)
        labeled = generate(scene)
        if verbose:
            print(f"  장면 {k + 1}/{scenes} (seed={scene.seed}, {len(labeled)}건)")

        baseline = evaluate(labeled, np.arange(len(labeled)))
        rows.append({"seed": scene.seed, "preset": "none", "kept_fraction": 1.0, **baseline.as_dict()})

        for name, weights in presets.items():
            pipeline = EventPipeline(
                PipelineConfig(segmentation=segmentation, weights=weights, preset=name, threads=threads),
                verbose=False,
            )
            result = pipeline.denoise_stream(labeled.stream)
            kept = match_kept_indices(labeled.stream, result.output)
            metrics = evaluate(labeled, kept)
            rows.append({
                "seed": scene.seed,
                "preset": name,
                "kept_fraction": len(kept) / len(labeled),
                **metrics.as_dict(),
            })

    table = pd.DataFrame(rows)
    table["improved"] = table["output_noise_fraction"] < table["input_noise_fraction"]

    summary = {}
    for name, group in table.groupby("preset", sort=False):
        summary[name] = {
            "mean_precision": float(group["precision"].mean()),
            "mean_recall": float(group["recall"].mean()),
            "mean_noise_removed_fraction": float(group["noise_removed_fraction"].mean()),
            "mean_input_noise_fraction": float(group["input_noise_fraction"].mean()),
            "mean_output_noise_fraction": float(group["output_noise_fraction"].mean()),
            "mean_kept_fraction": float(group["kept_fraction"].mean()),
            "improved_on_every_scene": bool(group["improved"].all()),
        }

    synth = dict(base.__dict__)
    synth["object"] = base.object.value
    synth["noise_model"] = base.noise_model.value
    synth["velocity"] = list(base.velocity)

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "synth": synth,
        "segmentation": PipelineConfig(segmentation=segmentation).as_dict()["segmentation"],
        "presets": {name: w.as_dict() for name, w in presets.items()},
        "scenes": scenes,
        "rows": table.to_dict(orient="records"),
        "summary": summary,
    }

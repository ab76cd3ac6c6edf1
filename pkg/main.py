#!/usr/bin/env python3
"""
이벤트 카메라 적응형 그래프 디노이징 프로그램

메인 실행 파일
"""
import argparse
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd
from dotenv import dotenv_values

import config
from modules.attention import load_params, random_params
from modules.errors import DomainError, EventParseError
from modules.event_io import read_event_file, write_event_file
from modules.graph_build import build_graph, write_edge_list
from modules.pipeline import (
    REPORT_SCHEMA_VERSION,
    EventPipeline,
    PipelineConfig,
    calibrate,
    find_voxel,
    resolve_weights,
    run_pipeline,
    save_table,
    write_json,
    write_voxel_dump,
)
from modules.segmentation import SegmentationConfig
from modules.synth import (
    LabeledEventStream,
    SynthConfig,
    evaluate,
    generate,
    match_kept_indices,
    read_labels,
    write_labels,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

COMMANDS = ["segment", "denoise", "synth", "eval", "stats", "attend", "calibrate"]


class UsageError(Exception):
    """잘못된 옵션/입력 (종료 코드 2)"""


def build_parser() -> argparse.ArgumentParser:
    """명령행 파서 구성"""
    parser = argparse.ArgumentParser(
        description="이벤트 카메라 적응형 그래프 디노이징 프로그램"
    )

    parser.add_argument("command", choices=COMMANDS, help="실행할 명령")

    parser.add_argument("--input", "-i", type=str, help="입력 이벤트 CSV 경로")
    parser.add_argument("--output", "-o", type=str, help="출력 파일 경로 (옵션)")
    parser.add_argument("--report", type=str, help="JSON 리포트 경로 (옵션)")
    parser.add_argument("--config", type=str, help="KEY=value 설정 파일 (옵션)")
    parser.add_argument("--quiet", "-q", action="store_true", help="진행 상황 출력 생략")

    # 세그멘테이션
    parser.add_argument("--n-min", type=int, help=f"윈도우당 최소 이벤트 수 (기본값: {config.N_MIN})")
    parser.add_argument("--c-scale", type=float, help=f"밀도 배율 (기본값: {config.C_SCALE:g})")
    parser.add_argument("--min-vox", type=int, help=f"윈도우당 최소 복셀 수 (기본값: {config.N_MIN_VOX})")
    parser.add_argument("--max-vox", type=int, help=f"윈도우당 최대 복셀 수 (기본값: {config.N_MAX_VOX})")

    # 간선 가중치
    parser.add_argument(
        "--preset",
        choices=sorted(config.WEIGHT_PRESETS),
        help=f"가중치 조합 프리셋 (기본값: {config.DEFAULT_PRESET})"
    )
    parser.add_argument("--alpha", type=float, help="유클리드 거리 계수")
    parser.add_argument("--beta", type=float, help="속도 크기 차이 계수")
    parser.add_argument("--gamma", type=float, help="각도 차이 계수")
    parser.add_argument("--delta", type=float, help="극성 불일치 계수")
    parser.add_argument(
        "--no-normalize-factors",
        dest="normalize_factors",
        action="store_const",
        const=False,
        default=None,
        help="가중치 요소 정규화 끄기"
    )

    # 실행 옵션
    parser.add_argument("--seed", type=int, help=f"난수 시드 (기본값: {config.SEED})")
    parser.add_argument("--threads", type=int, help=f"복셀 처리 작업자 수 (기본값: {config.THREADS})")

    # stats / attend 대상 복셀
    parser.add_argument("--window", type=int, default=0, help="대상 윈도우 번호 (기본값: 0)")
    parser.add_argument("--voxel", type=int, default=0, help="대상 복셀 번호 (기본값: 0)")
    parser.add_argument("--dump-graph", type=str, help="대상 복셀 간선 목록 저장 경로 (stats)")
    parser.add_argument("--dump-curve", type=str, help="대상 복셀 분산 곡선 CSV 경로 (stats)")
    parser.add_argument("--attention-params", type=str, help="어텐션 파라미터 JSON (attend)")
    parser.add_argument("--d-out", type=int, help=f"어텐션 출력 차원 (기본값: {config.ATTENTION_D_OUT})")

    # eval
    parser.add_argument("--labels", type=str, help="라벨 사이드카 경로 (synth/eval)")
    parser.add_argument("--denoised", type=str, help="디노이징된 이벤트 CSV (eval)")

    # synth / calibrate
    parser.add_argument("--width", type=int, help="센서 너비 (기본값: 64)")
    parser.add_argument("--height", type=int, help="센서 높이 (기본값: 64)")
    parser.add_argument("--duration", type=int, help="장면 길이 µs (기본값: 5000)")
    parser.add_argument("--signal-rate", type=float, help="µs당 신호 이벤트 수 (기본값: 1.0)")
    parser.add_argument("--noise-fraction", type=float, help="노이즈 비율 (기본값: 0.3)")
    parser.add_argument("--object", choices=["moving_bar", "moving_disc"], help="이동 물체 (기본값: moving_bar)")
    parser.add_argument("--vx", type=float, help="물체 x 속도 px/µs (기본값: 0.008)")
    parser.add_argument("--vy", type=float, help="물체 y 속도 px/µs (기본값: 0.0)")
    parser.add_argument("--object-size", type=int, help="물체 크기 px (기본값: 8)")
    parser.add_argument("--scenes", type=int, help="보정 장면 수 (기본값: 20)")
    parser.add_argument("--presets", type=str, help="보정에 쓸 프리셋 목록, 쉼표 구분 (기본값: comb3)")

    return parser


def _pick(args, file_values: dict, dest: str, default, cast=str):
    """옵션 > 설정 파일 > 환경변수/기본값 순으로 값 결정"""
    value = getattr(args, dest, None)
    if value is not None:
        return value

    key = dest.upper()
    if file_values.get(key) not in (None, ""):
        try:
            return cast(file_values[key])
        except ValueError:
            raise ValueError(f"설정 파일 값 오류: {key}={file_values[key]}")

    return default


def _to_bool(text: str) -> bool:
    return str(text).strip().lower() not in ("0", "false", "no", "off")


def load_settings(args) -> dict:
    """
    옵션, 설정 파일, 기본값을 합쳐 실행 설정 구성

    Returns:
        pipeline(PipelineConfig), synth(SynthConfig) 등을 담은 딕셔너리
    """
    file_values = {}
    if args.config:
        config_path = Path(args.config)
        if not config_path.exists():
            raise ValueError(f"설정 파일을 찾을 수 없습니다: {config_path}")
        file_values = {k.upper(): v for k, v in dotenv_values(config_path).items()}

    segmentation = SegmentationConfig(
        n_min=_pick(args, file_values, "n_min", config.N_MIN, int),
        c_scale=_pick(args, file_values, "c_scale", config.C_SCALE, float),
        n_min_vox=_pick(args, file_values, "min_vox", config.N_MIN_VOX, int),
        n_max_vox=_pick(args, file_values, "max_vox", config.N_MAX_VOX, int),
    )

    coeffs = {
        name: _pick(args, file_values, name, None, float)
        for name in ("alpha", "beta", "gamma", "delta")
    }
    preset = _pick(args, file_values, "preset", None)
    if preset is None and all(v is None for v in coeffs.values()):
        preset = config.DEFAULT_PRESET

    weights = resolve_weights(
        config.WEIGHT_PRESETS,
        preset=preset,
        normalize_factors=_pick(args, file_values, "normalize_factors", config.NORMALIZE_FACTORS, _to_bool),
        **coeffs,
    )

    seed = _pick(args, file_values, "seed", config.SEED, int)
    report = _pick(args, file_values, "report", None)
    attention_params = _pick(args, file_values, "attention_params", None)

    pipeline = PipelineConfig(
        segmentation=segmentation,
        weights=weights,
        preset=preset,
        attention_params_path=Path(attention_params) if attention_params else None,
        seed=seed,
        threads=_pick(args, file_values, "threads", config.THREADS, int),
        report_path=Path(report) if report else None,
    )

    synth = SynthConfig(
        width=_pick(args, file_values, "width", 64, int),
        height=_pick(args, file_values, "height", 64, int),
        duration=_pick(args, file_values, "duration", 5000, int),
        signal_rate=_pick(args, file_values, "signal_rate", 1.0, float),
        noise_fraction=_pick(args, file_values, "noise_fraction", 0.3, float),
        object=_pick(args, file_values, "object", "moving_bar"),
        velocity=(
            _pick(args, file_values, "vx", 0.008, float),
            _pick(args, file_values, "vy", 0.0, float),
        ),
        seed=seed,
        object_size=_pick(args, file_values, "object_size", 8, int),
    )

    d_out = _pick(args, file_values, "d_out", config.ATTENTION_D_OUT, int)
    if d_out < 1:
        raise ValueError(f"d_out은 1 이상이어야 합니다: {d_out}")

    scenes = _pick(args, file_values, "scenes", 20, int)
    presets = [p.strip() for p in _pick(args, file_values, "presets", "comb3").split(",") if p.strip()]
    unknown = [p for p in presets if p not in config.WEIGHT_PRESETS]
    if unknown:
        raise ValueError(f"알 수 없는 프리셋: {', '.join(unknown)}")

    return {
        "pipeline": pipeline,
        "synth": synth,
        "d_out": d_out,
        "scenes": scenes,
        "presets": presets,
        "verbose": not args.quiet,
    }


def _require_input(args) -> Path:
    if not args.input:
        raise UsageError("--input 옵션이 필요합니다")

    input_path = Path(args.input)
    if not input_path.exists():
        raise FileNotFoundError(f"입력 파일을 찾을 수 없습니다: {input_path}")
    return input_path


def _parse_events(path: Path):
    try:
        return read_event_file(path)
    except (EventParseError, DomainError) as e:
        raise UsageError(f"입력 파일 오류 ({path.name}): {e}")


def _load_stream(input_path: Path):
    stream = _parse_events(input_path)

    if len(stream) == 0:
        raise UsageError(f"입력 파일에 이벤트가 없습니다: {input_path}")
    return stream


def _default_output(input_path: Path, suffix: str) -> Path:
    return config.OUTPUT_DIR / f"{input_path.stem}{suffix}"


def _banner(title: str, verbose: bool):
    if verbose:
        print(f"\n{'='*50}")
        print(title)
        print(f"{'='*50}\n")


def run_segment(args, settings) -> int:
    """복셀 덤프 실행"""
    input_path = _require_input(args)
    stream = _load_stream(input_path)
    output_path = Path(args.output) if args.output else _default_output(input_path, "_voxels.jsonl")

    pipeline = EventPipeline(settings["pipeline"], verbose=settings["verbose"])
    voxels = pipeline.segment(stream)
    write_voxel_dump(voxels, output_path)

    if settings["verbose"]:
        print(f"윈도우 {len({v.window_index for v in voxels})}개, 복셀 {len(voxels)}개")
        print(f"✅ 복셀 덤프 저장 완료: {output_path}")
    return EXIT_OK


def run_denoise(args, settings) -> int:
    """디노이징 실행"""
    input_path = _require_input(args)
    stream = _load_stream(input_path)

    output_path = Path(args.output) if args.output else _default_output(input_path, "_denoised.csv")
    pipeline_config = settings["pipeline"]
    if pipeline_config.report_path is None:
        pipeline_config = replace(pipeline_config, report_path=_default_output(input_path, "_report.json"))

    _banner("디노이징 시작", settings["verbose"])
    run_pipeline(input_path, output_path, pipeline_config, verbose=settings["verbose"], stream=stream)
    _banner("디노이징 완료", settings["verbose"])
    return EXIT_OK


def run_synth(args, settings) -> int:
    """합성 장면 생성"""
    synth = settings["synth"]
    output_path = Path(args.output) if args.output else config.OUTPUT_DIR / f"synth_seed{synth.seed}.csv"
    labels_path = Path(args.labels) if args.labels else output_path.with_suffix(".labels")

    labeled = generate(synth)
    labels_path.parent.mkdir(parents=True, exist_ok=True)
    write_event_file(labeled.stream, output_path)
    labels_path.write_bytes(write_labels(labeled.labels))

    if settings["verbose"]:
        n_signal = int(labeled.signal_mask.sum())
        print(f"✅ 합성 장면 생성 완료: {output_path}")
        print(f"  → 신호 {n_signal}건, 노이즈 {len(labeled) - n_signal}건")
        print(f"라벨 저장 완료: {labels_path}")
    return EXIT_OK


def run_eval(args, settings) -> int:
    """디노이징 결과 평가"""
    input_path = _require_input(args)
    if not args.denoised:
        raise UsageError("--denoised 옵션이 필요합니다 (디노이징된 CSV)")

    labels_path = Path(args.labels) if args.labels else input_path.with_suffix(".labels")
    original = _load_stream(input_path)
    denoised = _parse_events(Path(args.denoised))

    try:
        labeled = LabeledEventStream(stream=original, labels=read_labels(labels_path.read_bytes()))
    except (ValueError, DomainError) as e:
        raise UsageError(f"라벨 파일 오류: {e}")

    metrics = evaluate(labeled, match_kept_indices(original, denoised))

    if settings["pipeline"].report_path:
        write_json({"schema_version": REPORT_SCHEMA_VERSION, "metrics": metrics.as_dict()}, settings["pipeline"].report_path)

    if settings["verbose"]:
        print("\n=== 디노이징 평가 ===")
        print(f"  정밀도: {metrics.precision:.4f}")
        print(f"  재현율: {metrics.recall:.4f}")
        print(f"  노이즈 제거율: {metrics.noise_removed_fraction:.4f}")
        print(f"  노이즈 비율: {metrics.input_noise_fraction:.4f} → {metrics.output_noise_fraction:.4f}")
    return EXIT_OK


def run_stats(args, settings) -> int:
    """그래프/가중치 진단"""
    input_path = _require_input(args)
    stream = _load_stream(input_path)
    output_path = Path(args.output) if args.output else _default_output(input_path, "_stats.csv")

    pipeline = EventPipeline(settings["pipeline"], verbose=settings["verbose"])
    result = pipeline.denoise_stream(stream)
    save_table(pipeline.stats_table(result), output_path)
    if settings["verbose"]:
        print(f"✅ 진단 표 저장 완료: {output_path}")

    if args.dump_graph or args.dump_curve:
        try:
            target = find_voxel(result.voxels, args.window, args.voxel)
        except DomainError as e:
            raise UsageError(str(e))
        denoised = result.denoised[result.voxels.index(target)]

        if args.dump_graph:
            graph_path = Path(args.dump_graph)
            graph_path.parent.mkdir(parents=True, exist_ok=True)
            graph_path.write_text(write_edge_list(build_graph(target, settings["pipeline"].weights)), encoding="utf-8")
            if settings["verbose"]:
                print(f"간선 목록 저장 완료: {graph_path}")

        if args.dump_curve:
            curve = denoised.search.curve if denoised.search else ()
            save_table(pd.DataFrame(list(curve), columns=["delta", "variance"]), Path(args.dump_curve))
            if settings["verbose"]:
                print(f"분산 곡선 저장 완료: {args.dump_curve}")
    return EXIT_OK


def run_attend(args, settings) -> int:
    """어텐션 순전파"""
    input_path = _require_input(args)
    stream = _load_stream(input_path)
    output_path = (
        Path(args.output) if args.output
        else _default_output(input_path, f"_w{args.window}_v{args.voxel}_features.csv")
    )

    pipeline_config = settings["pipeline"]
    if pipeline_config.attention_params_path:
        params = load_params(pipeline_config.attention_params_path, default_seed=pipeline_config.seed, w_floor=config.W_FLOOR)
    else:
        params = random_params(
            d_in=4, d_out=settings["d_out"], seed=pipeline_config.seed,
            leaky_slope=config.LEAKY_SLOPE, w_floor=config.W_FLOOR,
        )
    if params.d_in != 4:
        raise UsageError(f"파라미터 d_in은 4 (x, y, t, p)여야 합니다: {params.d_in}")

    pipeline = EventPipeline(pipeline_config, verbose=settings["verbose"])
    result = pipeline.denoise_stream(stream)
    try:
        out = pipeline.attend(result, args.window, args.voxel, params)
    except DomainError as e:
        raise UsageError(str(e))

    df = pd.DataFrame(out.features, columns=[f"f{k}" for k in range(params.d_out)])
    df.insert(0, "node", range(len(df)))
    save_table(df, output_path)

    if settings["verbose"]:
        print(f"✅ 집계 특징 저장 완료: {output_path} ({len(df)}개 노드)")
    return EXIT_OK


def run_calibrate(args, settings) -> int:
    """합성 장면 보정 실험"""
    pipeline_config = settings["pipeline"]
    report_path = pipeline_config.report_path or config.OUTPUT_DIR / "calibration.json"
    presets = {
        name: resolve_weights(
            config.WEIGHT_PRESETS, preset=name,
            normalize_factors=pipeline_config.weights.normalize_factors,
        )
        for name in settings["presets"]
    }

    _banner("보정 실험 시작", settings["verbose"])
    report = calibrate(
        base=settings["synth"],
        segmentation=pipeline_config.segmentation,
        presets=presets,
        scenes=settings["scenes"],
        threads=pipeline_config.threads,
        verbose=settings["verbose"],
    )
    write_json(report, report_path)

    if settings["verbose"]:
        print("\n[프리셋별 평균]")
        for name, summary in report["summary"].items():
            print(
                f"  {name}: 재현율 {summary['mean_recall']:.3f}, "
                f"노이즈 제거율 {summary['mean_noise_removed_fraction']:.3f}, "
                f"노이즈 비율 {summary['mean_input_noise_fraction']:.3f} → "
                f"{summary['mean_output_noise_fraction']:.3f}"
            )
        print(f"\n✅ 보정 리포트 저장 완료: {report_path}")
    return EXIT_OK


HANDLERS = {
    "segment": run_segment,
    "denoise": run_denoise,
    "synth": run_synth,
    "eval": run_eval,
    "stats": run_stats,
    "attend": run_attend,
    "calibrate": run_calibrate,
}


def main(argv=None) -> int:
    """메인 실행 함수"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = load_settings(args)
    except ValueError as e:
        print(f"오류: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return HANDLERS[args.command](args, settings)
    except UsageError as e:
        print(f"오류: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DomainError, ValueError) as e:
        print(f"오류: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

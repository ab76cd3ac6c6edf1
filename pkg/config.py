"""
설정 관리 모듈
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# .env 파일 로드
load_dotenv()

# 프로젝트 루트 경로
PROJECT_ROOT = Path(__file__).parent

# 데이터 경로
DATA_DIR = PROJECT_ROOT / "data"
OUTPUT_DIR = PROJECT_ROOT / "output"

# 세그멘테이션 (윈도우/복셀 분할)
N_MIN = int(os.getenv("N_MIN", "512"))
C_SCALE = float(os.getenv("C_SCALE", "1024"))
N_MIN_VOX = int(os.getenv("N_MIN_VOX", "4"))
N_MAX_VOX = int(os.getenv("N_MAX_VOX", "64"))

# 간선 가중치
DEFAULT_PRESET = os.getenv("PRESET", "comb3")
NORMALIZE_FACTORS = os.getenv("NORMALIZE_FACTORS", "true").lower() not in ("0", "false", "no")

# 어텐션 순전파
LEAKY_SLOPE = float(os.getenv("LEAKY_SLOPE", "0.2"))
W_FLOOR = float(os.getenv("W_FLOOR", "1e-6"))
ATTENTION_D_OUT = int(os.getenv("ATTENTION_D_OUT", "8"))

# 실행 옵션
SEED = int(os.getenv("SEED", "0"))
THREADS = int(os.getenv("THREADS", "1"))

# 전수 탐색 검증기 한도
BRUTE_FORCE_MAX_NODES = int(os.getenv("BRUTE_FORCE_MAX_NODES", "64"))
BRUTE_FORCE_GRID_STEPS = int(os.getenv("BRUTE_FORCE_GRID_STEPS", "10000"))

# 가중치 조합 프리셋 (alpha, beta, gamma, delta)
# comb1은 유클리드 거리만 사용하는 기준선
WEIGHT_PRESETS = {
    "comb1": (1.0, 0.0, 0.0, 0.0),
    "comb2": (0.8, 0.1, 0.05, 0.05),
    "comb3": (0.7, 0.1, 0.1, 0.1),
    "comb4": (0.6, 0.2, 0.1, 0.1),
}


# 디렉토리 생성
DATA_DIR.mkdir(exist_ok=True)
OUTPUT_DIR.mkdir(exist_ok=True)

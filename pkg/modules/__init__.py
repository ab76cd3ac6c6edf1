"""
이벤트 카메라 적응형 그래프 전처리 파이프라인 - 모듈 패키지
"""

__version__ = "1.0.0"

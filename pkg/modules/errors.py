"""
예외 정의
"""


class DomainError(ValueError):
    """입력이 연산의 전제조건을 만족하지 않을 때 발생"""


class EventParseError(ValueError):
    """
    이벤트 CSV 파싱 오류

    Attributes:
        line: 오류가 발생한 줄 번호 (1부터 시작)
    """

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"{line}번째 줄: {message}")

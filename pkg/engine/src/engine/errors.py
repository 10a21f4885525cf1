# /engine/src/engine/errors.py

from typing import Any, Tuple


class EngineError(Exception):
    """engine中所有输入类错误的基类; CLI将其映射为退出码2。"""


class AlgebraInputError(EngineError):
    """元素不属于该代数、后端混用、或违反前置条件。"""


class FormatError(EngineError):
    """文本格式(子测度表、碎片化文件、流脚本)解析失败。"""

    def __init__(self, message: str, line_no: int = 0) -> None:
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class BudgetExhaustedError(EngineError):
    """
    分支定界搜索在步数预算内未能完成。
    best携带目前为止找到的最佳部分见证, 调用方可据此报告"unknown beyond bound"。
    """

    def __init__(self, message: str, steps: int = 0, best: Any = None) -> None:
        super().__init__(message)
        self.steps = steps
        self.best = best


class StreamInputError(EngineError):
    """反链流发出了零元素或与历史元素相交的元素。"""

    def __init__(self, message: str, pair: Tuple[int, int]) -> None:
        super().__init__(message)
        self.pair = pair


class EnvelopeViolationError(EngineError):
    """序列的某一项超出了其声明的单调包络, 或包络本身不单调。"""

    def __init__(self, message: str, index: int, value: Any, bound: Any) -> None:
        super().__init__(message)
        self.index = index
        self.value = value
        self.bound = bound


class GradingError(EngineError):
    """碎片化不是graded, 或在稳定层L以内找不到所需的分级下标。"""

    def __init__(self, message: str, level: int, witness: Any = None) -> None:
        super().__init__(message)
        self.level = level
        self.witness = witness


class LinearProgramError(EngineError):
    """精确单纯形无法给出最优解(无界或主元异常); 对Kelley线性规划而言属于内部错误。"""

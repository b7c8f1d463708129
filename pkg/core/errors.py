"""
领域异常

所有异常都继承自 AdmissionError，同时继承对应的内置异常类型，
便于调用方按常规方式捕获。
"""

from typing import Optional


class AdmissionError(Exception):
    """入院控制库的异常基类"""


class ModelDomainError(AdmissionError, ValueError):
    """索引非法、维度不一致、状态-动作对不可行等模型域错误"""


class GuardRefusalError(AdmissionError, RuntimeError):
    """预测规模超过保护上限，拒绝枚举"""

    def __init__(self, what: str, predicted: int, limit: int):
        self.what = what
        self.predicted = predicted
        self.limit = limit
        super().__init__(f"{what} 规模 {format_count(predicted)} 超过上限 {format_count(limit)}，拒绝执行")


class SingularUpdateError(AdmissionError, ArithmeticError):
    """RLS-TD 更新分母 |q| 低于数值下限"""

    def __init__(self, denominator: float, trajectory_index: Optional[int] = None):
        self.denominator = denominator
        self.trajectory_index = trajectory_index
        where = f" (第 {trajectory_index} 条轨迹)" if trajectory_index is not None else ""
        super().__init__(f"RLS 更新奇异: |q|={abs(denominator):.3e}{where}")


class SimulationError(AdmissionError, RuntimeError):
    """仿真过程中策略给出不可行动作或无法对当前状态决策；week=0 指初始状态"""

    def __init__(self, week: int, message: str):
        self.week = week
        super().__init__(f"第 {week} 周: {message}")


class StateSpaceError(AdmissionError, LookupError):
    """后继状态落在枚举状态空间之外，说明枚举或截断有误"""


def format_count(value: int) -> str:
    """大整数的可读表示，超过 1e6 用科学计数法"""
    if value < 1_000_000:
        return str(value)
    digits = str(value)
    return f"{digits[0]}.{digits[1:3]}e{len(digits) - 1}"

"""
PPDSim 异常类型
"""

from typing import Optional


class PPDSimError(Exception):
    """所有 PPDSim 错误的基类"""


class DomainError(PPDSimError, ValueError):
    """参数超出定义域或前置条件不满足"""


class ConfigError(PPDSimError, ValueError):
    """运行配置文档错误，key 指明出错的配置项"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class TruncationError(PPDSimError):
    """Fock 截断处的尾部布居超过阈值"""

    def __init__(self, time: float, tail_mass: float, threshold: float):
        self.time = time
        self.tail_mass = tail_mass
        self.threshold = threshold
        super().__init__(
            f"Fock 截断溢出: t={time:.17g} 时尾部布居 {tail_mass:.3e} 超过阈值 {threshold:.1e}"
        )


class ConvergenceError(PPDSimError):
    """不动点迭代未收敛"""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"不动点迭代 {iterations} 次后未收敛，残差 {residual:.3e}")


class InconsistentStateError(PPDSimError):
    """稳态量在后续周期中不守恒（输入并非收敛的不动点）"""

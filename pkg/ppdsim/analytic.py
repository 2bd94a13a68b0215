"""
坏腔极限下光子列的解析公式

单次过程中腔内有一个光子的概率 p1(t)，周期光子列 p(t)，平均光子数 1/(κT)，
以及一阶相干函数 g1(τ)。所有函数均接受 numpy 数组。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

logger = logging.getLogger(__name__)

REGIME_RTOL = 1e-9
CRITICAL_BAND = 1e-9

ArrayLike = Union[float, np.ndarray]


class Regime(Enum):
    OVERDAMPED = "overdamped"    # 4g < κ
    CRITICAL = "critical"        # 4g = κ
    UNDERDAMPED = "underdamped"  # 4g > κ


@dataclass(frozen=True)
class TrainParams:
    """
    光子列参数

    Args:
        g: 耦合常数
        kappa: 腔场阻尼率
        T: 泵浦周期
    """

    g: float
    kappa: float
    T: float

    def __post_init__(self):
        if not self.g > 0:
            raise DomainError(f"g 必须 > 0，得到 {self.g}")
        if self.kappa < 0:
            raise DomainError(f"kappa 必须 >= 0，得到 {self.kappa}")
        if not self.T > 0:
            raise DomainError(f"T 必须 > 0，得到 {self.T}")

    @property
    def discriminant(self) -> float:
        """κ² - 16g²（带符号）"""
        return self.kappa ** 2 - 16.0 * self.g ** 2

    @property
    def scale(self) -> float:
        return max(self.kappa ** 2, 16.0 * self.g ** 2)

    @property
    def regime(self) -> Regime:
        if abs(self.discriminant) <= REGIME_RTOL * self.scale:
            return Regime.CRITICAL
        return Regime.OVERDAMPED if self.discriminant > 0 else Regime.UNDERDAMPED

    @property
    def beta(self) -> float:
        """β = √(κ² - 16g²)；欠阻尼时为 nan"""
        return float(np.sqrt(self.discriminant)) if self.discriminant >= 0 else float("nan")

    @property
    def phi(self) -> float:
        """φ = arctan(κ/2g)"""
        return float(np.arctan(self.kappa / (2.0 * self.g)))


def p1(t: ArrayLike, params: TrainParams) -> ArrayLike:
    """
    单次过程中腔内有一个光子的概率

    以 cosh(x) - 1 = 2 sinh²(x/2) 的形式求值，避免在临界点附近的相消误差；
    |κ² - 16g²| < 1e-9·max(κ², 16g²) 时使用 cosh 的二阶级数。
    欠阻尼情形使用解析延拓 cosh(ix) = cos(x)。

    Args:
        t: 时间（>= 0），标量或数组
        params: 光子列参数

    Returns:
        概率 p1(t)
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("p1 只对 t >= 0 有定义")
    g, kappa = params.g, params.kappa
    delta = params.discriminant
    envelope = np.exp(-kappa * t_arr / 2.0)

    if abs(delta) < CRITICAL_BAND * params.scale:
        value = g ** 2 * t_arr ** 2 * envelope * (1.0 + delta * t_arr ** 2 / 48.0)
    elif delta > 0:
        beta = np.sqrt(delta)
        value = 16.0 * g ** 2 / delta * envelope * np.sinh(beta * t_arr / 4.0) ** 2
    else:
        omega = np.sqrt(-delta)
        value = 16.0 * g ** 2 / (-delta) * envelope * np.sin(omega * t_arr / 4.0) ** 2

    return float(value) if np.ndim(value) == 0 else value


def _theta(x: np.ndarray) -> np.ndarray:
    """Θ(x) = 0 (x <= 0), 1 (x > 0)"""
    return (x > 0).astype(float)


def photon_train(t: ArrayLike, params: TrainParams) -> ArrayLike:
    """
    周期光子列 p(t) = Σ_m p1(t - mT) Θ(T - |2t - (2m+1)T|)

    窗口 m 只覆盖开区间 (mT, (m+1)T)，任一时刻至多一项非零，t = mT 处取 0。
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("photon_train 只对 t >= 0 有定义")
    T = params.T
    m = np.floor(t_arr / T)
    window = _theta(T - np.abs(2.0 * t_arr - (2.0 * m + 1.0) * T))
    shifted = np.clip(t_arr - m * T, 0.0, None)
    value = p1(shifted, params) * window
    return float(value) if np.ndim(value) == 0 else value


def mean_photon_number(params: TrainParams) -> float:
    """光子列的时间平均光子数 1/(κT)"""
    if params.kappa <= 0:
        raise DomainError("kappa = 0 时不存在稳态光子列")
    return 1.0 / (params.kappa * params.T)


def g1(tau: ArrayLike, params: TrainParams) -> ArrayLike:
    """
    一阶相干函数 √(1+κ²/4g²)·e^{-κ|τ|/2}·cos(g|τ| + φ)，φ = arctan(κ/2g)
    """
    tau_abs = np.abs(np.asarray(tau, dtype=float))
    g, kappa = params.g, params.kappa
    amplitude = np.sqrt(1.0 + kappa ** 2 / (4.0 * g ** 2))
    value = amplitude * np.exp(-kappa * tau_abs / 2.0) * np.cos(g * tau_abs + params.phi)
    return float(value) if np.ndim(value) == 0 else value


def g1_first_zero(params: TrainParams) -> float:
    """g1 的第一个零点 τ > 0（对应 gτ + φ = π/2），用区间二分求根"""
    upper = np.pi / params.g
    return float(brentq(lambda tau: g1(tau, params), 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def slow_decay_rate(params: TrainParams) -> float:
    """过阻尼时 p1 的精确长时衰减率 (κ - β)/2"""
    if params.regime is Regime.UNDERDAMPED:
        raise DomainError("欠阻尼时 p1 以 κ/2 振荡衰减，没有慢衰减支")
    return (params.kappa - np.sqrt(max(params.discriminant, 0.0))) / 2.0


def weak_coupling_rate(params: TrainParams) -> float:
    """长时衰减率的领头阶形式 4g²/κ"""
    if params.kappa <= 0:
        raise DomainError("kappa 必须 > 0")
    return 4.0 * params.g ** 2 / params.kappa

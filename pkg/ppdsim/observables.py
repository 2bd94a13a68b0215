"""
光子统计、量子点激发概率、囚禁态判定与时间平均
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import DEFAULT_FIXED_POINT_TOL, Liouvillian, Trajectory, period_map
from .errors import DomainError, InconsistentStateError
from .state import DensityState, SystemParams, photon_distribution

logger = logging.getLogger(__name__)

POISSON_TOL = 1e-6
DISTRIBUTION_TOL = 1e-9
RABI_ANGLE_RTOL = 0.01


class PoissonClass(Enum):
    SUB = "sub-Poissonian"
    POISSONIAN = "Poissonian"
    SUPER = "super-Poissonian"


@dataclass(frozen=True, eq=False)
class PhotonStatistics:
    """
    光子数分布及其矩

    mandel_Q 与 classification 在 <n> = 0 时为 None（不适用）。
    """

    p_n: np.ndarray
    mean_n: float
    variance: float
    mandel_Q: Optional[float]
    classification: Optional[PoissonClass]

    def as_dict(self):
        return {
            "mean_n": self.mean_n,
            "variance": self.variance,
            "mandel_Q": self.mandel_Q,
            "classification": self.classification.value if self.classification else None,
        }


def classify(q: Optional[float]) -> Optional[PoissonClass]:
    if q is None:
        return None
    if abs(q) < POISSON_TOL:
        return PoissonClass.POISSONIAN
    return PoissonClass.SUB if q < 0 else PoissonClass.SUPER


def statistics_from_distribution(p_n) -> PhotonStatistics:
    """
    由光子数分布计算均值、方差与 Mandel Q

    Args:
        p_n: 光子数分布，负的舍入误差会被截为 0

    Returns:
        PhotonStatistics: 统计结果
    """
    p = np.clip(np.asarray(p_n, dtype=float), 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > DISTRIBUTION_TOL:
        raise DomainError(f"光子数分布未归一化: Σp_n = {total:.15g}")
    n = np.arange(len(p))
    mean = float(n @ p)
    variance = float(((n - mean) ** 2) @ p)
    q = variance / mean - 1.0 if mean > 0 else None
    return PhotonStatistics(p, mean, variance, q, classify(q))


def statistics(state: DensityState) -> PhotonStatistics:
    return statistics_from_distribution(photon_distribution(state))


def excitation_probability(state: DensityState) -> Tuple[float, float]:
    """
    量子点激发概率

    Returns:
        (Tr(S+S-ρ), 若此刻泵浦则泵浦后的激发概率 Σ(c_sese + c_ee))
    """
    current = float(np.clip(state.c_ee, 0.0, None).sum())
    after_pump = float(np.clip(state.c_ee + state.c_sese, 0.0, None).sum())
    return current, after_pump


def stationary_p_D(fixed_point_state: DensityState, L: Liouvillian,
                   tol: float = DEFAULT_FIXED_POINT_TOL) -> float:
    """
    稳态下泵浦后的激发概率 p_D，并检查其在后续两个周期中保持不变

    Args:
        fixed_point_state: period_map 的收敛不动点（泵浦后的态）
        L: 生成元
        tol: 不动点收敛阈值

    Returns:
        float: p_D

    Raises:
        InconsistentStateError: 后续周期的 p_D 偏差超过 10·tol
    """
    p_d = excitation_probability(fixed_point_state)[0]
    once = period_map(L, fixed_point_state)
    twice = period_map(L, once)
    for label, later in (("一个", once), ("两个", twice)):
        value = excitation_probability(later)[0]
        if abs(value - p_d) > 10 * tol:
            raise InconsistentStateError(
                f"p_D 在{label}周期后由 {p_d:.15g} 变为 {value:.15g}，输入不是收敛的不动点"
            )
    return p_d


def rabi_angle(params: SystemParams, n: int) -> float:
    """光子数 n 下一个泵浦间隔内的 Rabi 角 g·(T/2)·√(n+1)"""
    return params.g * params.pump_interval * np.sqrt(n + 1)


def _is_full_rabi_cycle(angle: float) -> bool:
    k = int(round(angle / np.pi))
    return k >= 1 and abs(angle - k * np.pi) <= RABI_ANGLE_RTOL * k * np.pi


def detect_trapping(p_n, threshold: float, params: SystemParams) -> Optional[int]:
    """
    判定光场是否处于囚禁态

    返回满足以下两个条件的最小 n*：Σ_{n>n*} p_n < threshold，且
    g·(T/2)·√(n*+1) 与 π 的某个整数倍相差不超过 1%。不存在时返回 None。

    Args:
        p_n: 归一化的光子数分布
        threshold: 尾部概率阈值，取值 (0, 1)
        params: 物理参数（提供 g 与 T）

    Returns:
        Optional[int]: 囚禁光子数
    """
    if not 0 < threshold < 1:
        raise DomainError(f"threshold 必须在 (0, 1) 内，得到 {threshold}")
    p = np.clip(np.asarray(p_n, dtype=float), 0.0, None)
    # tails[n] = Σ_{k>n} p_k
    tails = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    for n in range(len(p)):
        if tails[n] < threshold and _is_full_rabi_cycle(rabi_angle(params, n)):
            return n
    return None


def time_average(traj: Trajectory, name: str, window: Tuple[int, int]) -> float:
    """
    观测量在泵浦循环区间 [start, stop]（以 T/2 为单位）上的梯形时间平均

    Args:
        traj: 轨迹
        name: 观测量名称（trajectory_columns 中的列名）
        window: (起始循环, 结束循环)

    Returns:
        float: 时间平均值
    """
    start, stop = window
    n_cycles = len(traj.pump_times)
    if not 0 <= start < stop <= n_cycles:
        raise DomainError(f"窗口 {window} 无效，轨迹包含 {n_cycles} 个泵浦循环")
    values = traj.observable(name)
    interval = traj.params.pump_interval
    t_start, t_stop = start * interval, stop * interval
    mask = (traj.times >= t_start - 1e-9 * interval) & (traj.times <= t_stop + 1e-9 * interval)
    times = traj.times[mask]
    return float(trapezoid(values[mask], times) / (times[-1] - times[0]))

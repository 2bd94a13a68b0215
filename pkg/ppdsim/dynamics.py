"""
阻尼 Jaynes-Cummings 主方程的演化、频闪周期映射及其不动点

在约化系数上，主方程 dρ/dt = g[aS+ - a†S-, ρ] + κ(aρa† - {a†a, ρ}/2) 化为闭合的线性常微分方程组
（c_xx[n_max+1] 与 c_ge[n_max] 视为 0）：

    dc_ee[n]/dt   =  2g√(n+1) Re c_ge[n]   + κ[(n+1) c_ee[n+1] - n c_ee[n]]
    dc_gg[n]/dt   = -2g√n     Re c_ge[n-1] + κ[(n+1) c_gg[n+1] - n c_gg[n]]
    dc_sese[n]/dt =                          κ[(n+1) c_sese[n+1] - n c_sese[n]]
    dc_ge[n]/dt   =  g√(n+1) (c_gg[n+1] - c_ee[n]) - κ(n+1/2) c_ge[n] + κ√((n+1)(n+2)) c_ge[n+1]

相干部分只在 {|e,n>, |g,n+1>} 块内作用，阻尼把 n+1 阶的系数送到 n 阶。
Im c_ge 只受阻尼作用，与布居解耦。
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DomainError, TruncationError
from .state import (
    DensityState,
    DotLevel,
    SystemParams,
    from_dict as state_from_dict,
    from_vector,
    new_pure,
    photon_distribution,
    pump_map,
    pump_matrix,
    to_dict as state_to_dict,
    to_vector,
    vector_size,
)

logger = logging.getLogger(__name__)

DENSE_PROPAGATOR_LIMIT = 4096
PROPAGATOR_CACHE_SIZE = 4
TRAJECTORY_SCHEMA = "ppdsim.trajectory/1"
DEFAULT_EVOLVE_TOL = 1e-10
DEFAULT_FIXED_POINT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
RESIDUAL_BURN_IN = 10


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """
    约化系数向量上的生成元 Λ

    matrix 为稀疏（带状）实矩阵；系数维数不超过 DENSE_PROPAGATOR_LIMIT 时，
    传播子 e^{Λt} 以稠密矩阵指数计算。只有反复使用的时长（泵浦间隔 T/2 与采样步长）
    进入缓存，缓存最多保留 PROPAGATOR_CACHE_SIZE 个传播子，先进先出。
    """

    params: SystemParams
    matrix: scipy.sparse.csr_matrix
    _cache: Dict = field(default_factory=dict, repr=False)
    _propagators: Dict[float, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_max(self) -> int:
        return self.params.n_max

    @property
    def dense(self) -> bool:
        return vector_size(self.n_max) <= DENSE_PROPAGATOR_LIMIT

    def dense_matrix(self) -> np.ndarray:
        if "dense" not in self._cache:
            self._cache["dense"] = self.matrix.toarray()
        return self._cache["dense"]

    def propagator(self, duration: float, cache: bool = False) -> np.ndarray:
        """
        e^{Λ·duration} 的稠密矩阵

        Args:
            duration: 演化时长
            cache: 是否保留结果供后续调用复用

        Returns:
            np.ndarray: 传播子
        """
        key = float(duration)
        if key in self._propagators:
            return self._propagators[key]
        logger.debug("构建传播子: dim=%d, t=%.17g", self.matrix.shape[0], duration)
        matrix = scipy.linalg.expm(self.dense_matrix() * duration)
        if cache:
            if len(self._propagators) >= PROPAGATOR_CACHE_SIZE:
                self._propagators.pop(next(iter(self._propagators)))
            self._propagators[key] = matrix
        return matrix

    @property
    def cached_durations(self) -> List[float]:
        return list(self._propagators)

    def derivative(self, state: DensityState) -> DensityState:
        """Λρ"""
        return from_vector(self.matrix @ to_vector(state), self.n_max)


def build_liouvillian(params: SystemParams) -> Liouvillian:
    """
    根据物理参数组装约化系数上的线性生成元

    Args:
        params: 物理参数

    Returns:
        Liouvillian: 生成元
    """
    n_max = params.n_max
    m = n_max + 1
    g, kappa = params.g, params.kappa

    def ee(n):
        return n

    def gg(n):
        return m + n

    def ss(n):
        return 2 * m + n

    def re(n):
        return 3 * m + n

    def im(n):
        return 3 * m + n_max + n

    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []

    def add(row, col, value):
        if value != 0.0:
            rows.append(row)
            cols.append(col)
            vals.append(value)

    # 腔场阻尼
    for level in (ee, gg, ss):
        for n in range(m):
            add(level(n), level(n), -kappa * n)
            if n + 1 < m:
                add(level(n), level(n + 1), kappa * (n + 1))
    for part in (re, im):
        for n in range(n_max):
            add(part(n), part(n), -kappa * (n + 0.5))
            if n + 1 < n_max:
                add(part(n), part(n + 1), kappa * np.sqrt((n + 1) * (n + 2)))

    # 相干 Jaynes-Cummings 耦合
    for n in range(n_max):
        rate = g * np.sqrt(n + 1)
        add(ee(n), re(n), 2 * rate)
        add(gg(n + 1), re(n), -2 * rate)
        add(re(n), gg(n + 1), rate)
        add(re(n), ee(n), -rate)

    size = vector_size(n_max)
    matrix = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    return Liouvillian(params=params, matrix=matrix)


def _check_tail(params: SystemParams, vector: np.ndarray, time: float) -> None:
    if params.tail_threshold is None:
        return
    n_max = params.n_max
    m = n_max + 1
    tail = float(vector[n_max] + vector[m + n_max] + vector[2 * m + n_max])
    if tail > params.tail_threshold:
        raise TruncationError(time, tail, params.tail_threshold)


def _integrate(L: Liouvillian, vector: np.ndarray, duration: float, tol: float,
               t_eval: Optional[np.ndarray] = None):
    return solve_ivp(
        lambda t, y: L.matrix @ y,
        (0.0, duration),
        vector,
        method="DOP853",
        t_eval=t_eval,
        rtol=tol,
        atol=tol * 1e-2,
    )


def evolve(L: Liouvillian, state: DensityState, duration: float,
           tol: float = DEFAULT_EVOLVE_TOL, t0: float = 0.0) -> DensityState:
    """
    无泵浦的自由演化 ρ(t0 + duration) = e^{Λ·duration} ρ(t0)

    Args:
        L: 生成元
        state: 初态
        duration: 演化时长 (>= 0)
        tol: 积分器的局部误差容限（仅在非稠密路径使用）
        t0: 初态对应的绝对时间，只用于截断错误信息

    Returns:
        DensityState: 演化后的态

    Raises:
        TruncationError: 截断尾部布居超过阈值
    """
    if duration < 0:
        raise DomainError(f"duration 必须 >= 0，得到 {duration}")
    if tol <= 0:
        raise DomainError(f"tol 必须 > 0，得到 {tol}")
    if state.n_max != L.n_max:
        raise DomainError(f"态的 n_max={state.n_max} 与生成元 n_max={L.n_max} 不一致")
    if duration == 0:
        return state

    vector = to_vector(state)
    if L.dense:
        vector = L.propagator(duration, cache=duration == L.params.pump_interval) @ vector
    else:
        solution = _integrate(L, vector, duration, tol, t_eval=np.array([duration]))
        if not solution.success:
            raise DomainError(f"积分失败: {solution.message}")
        vector = solution.y[:, -1]
    _check_tail(L.params, vector, t0 + duration)
    return from_vector(vector, L.n_max)


def period_map(L: Liouvillian, state: DensityState, tol: float = DEFAULT_EVOLVE_TOL,
               t0: float = 0.0) -> DensityState:
    """一个泵浦间隔：自由演化 T/2 后施加瞬时泵浦"""
    return pump_map(evolve(L, state, L.params.pump_interval, tol, t0))


def period_matrix(L: Liouvillian) -> np.ndarray:
    """频闪映射在系数向量上的矩阵 M = P · e^{ΛT/2}（仅稠密路径）"""
    if not L.dense:
        raise DomainError("系数维数过大，无法构建稠密周期矩阵")
    key = "period"
    if key not in L._cache:
        L._cache[key] = pump_matrix(L.n_max) @ L.propagator(L.params.pump_interval, cache=True)
    return L._cache[key]


# ---------------------------------------------------------------------------
# 轨迹
# ---------------------------------------------------------------------------

def trajectory_columns(n_max: int) -> List[str]:
    """轨迹 CSV 的列顺序（固定不变）"""
    return ["t", "mean_n", "p_D_pre", "p_D_post"] + [f"p_{n}" for n in range(n_max + 1)] + ["trace"]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    按时间采样的态序列

    vectors 的每一行是一个采样时刻的系数向量；泵浦时刻的样本保存泵浦后的态，
    泵浦前后的态另存于 pre_pump / post_pump。

    to_frame 的列：
        p_D_pre   Tr(S+S-ρ)，泵浦时刻取泵浦前 t_i-0 的值
        p_D_post  对该时刻的态施加泵浦后的 Tr(S+S-ρ)，泵浦时刻即 t_i+0 的值
    其余列（mean_n、p_n、trace）均取该行样本的态。
    """

    params: SystemParams
    times: np.ndarray
    vectors: np.ndarray
    pump_times: np.ndarray
    pre_pump: List[DensityState]
    post_pump: List[DensityState]

    def __len__(self):
        return len(self.times)

    def state_at(self, index: int) -> DensityState:
        return from_vector(self.vectors[index], self.params.n_max)

    @property
    def final_state(self) -> DensityState:
        return self.state_at(-1)

    def to_frame(self) -> pd.DataFrame:
        m = self.params.n_max + 1
        ee = self.vectors[:, :m]
        gg = self.vectors[:, m:2 * m]
        ss = self.vectors[:, 2 * m:3 * m]
        # 负的舍入误差只在提取观测量时截掉
        p_n = np.clip(ee + gg + ss, 0.0, None)
        p_D_pre = np.clip(ee, 0.0, None).sum(axis=1)
        p_D_post = np.clip(ee + ss, 0.0, None).sum(axis=1)
        if self.pre_pump:
            events = np.searchsorted(self.times, self.pump_times)
            pre = np.array([to_vector(state) for state in self.pre_pump])
            p_D_pre[events] = np.clip(pre[:, :m], 0.0, None).sum(axis=1)
            p_D_post[events] = np.clip(pre[:, :m] + pre[:, 2 * m:3 * m], 0.0, None).sum(axis=1)
        frame = pd.DataFrame({
            "t": self.times,
            "mean_n": p_n @ np.arange(m),
            "p_D_pre": p_D_pre,
            "p_D_post": p_D_post,
        })
        for n in range(m):
            frame[f"p_{n}"] = p_n[:, n]
        frame["trace"] = (ee + gg + ss).sum(axis=1)
        return frame[trajectory_columns(self.params.n_max)]

    def to_dict(self) -> Dict[str, Any]:
        """
        轨迹的 JSON 表示（schema ppdsim.trajectory/1）

        Returns:
            dict: schema、params、times、pump_times、columns（列顺序）、
                frame（列名 -> 数值，与 trajectory.csv 相同）、vectors（系数向量）、
                pre_pump / post_pump（态检查点格式）
        """
        frame = self.to_frame()
        params = self.params
        return {
            "schema": TRAJECTORY_SCHEMA,
            "params": {
                "g": params.g,
                "kappa": params.kappa,
                "T": params.T,
                "n_max": params.n_max,
                "tail_threshold": params.tail_threshold,
            },
            "times": self.times.tolist(),
            "pump_times": self.pump_times.tolist(),
            "columns": list(frame.columns),
            "frame": {name: frame[name].to_numpy().tolist() for name in frame.columns},
            "vectors": self.vectors.tolist(),
            "pre_pump": [state_to_dict(state) for state in self.pre_pump],
            "post_pump": [state_to_dict(state) for state in self.post_pump],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Trajectory":
        """to_dict 的逆；frame 由 vectors 重新计算"""
        if data.get("schema") != TRAJECTORY_SCHEMA:
            raise DomainError(f"未知的轨迹文件 schema: {data.get('schema')!r}")
        try:
            params = SystemParams(**data["params"])
            times = np.asarray(data["times"], dtype=float)
            vectors = np.asarray(data["vectors"], dtype=float)
            pump_times = np.asarray(data["pump_times"], dtype=float)
            pre_pump = [state_from_dict(item) for item in data["pre_pump"]]
            post_pump = [state_from_dict(item) for item in data["post_pump"]]
        except KeyError as e:
            raise DomainError(f"轨迹文件缺少字段 {e}") from e
        if vectors.shape != (len(times), vector_size(params.n_max)):
            raise DomainError(f"vectors 形状 {vectors.shape} 与 times / n_max 不一致")
        if not len(pre_pump) == len(post_pump) == len(pump_times):
            raise DomainError("pre_pump / post_pump 与 pump_times 长度不一致")
        return cls(params, times, vectors, pump_times, pre_pump, post_pump)

    def observable(self, name: str) -> np.ndarray:
        frame = self.to_frame()
        if name not in frame.columns:
            raise DomainError(f"未知的观测量 {name!r}，可选: {list(frame.columns)}")
        return frame[name].to_numpy()


def simulate(L: Liouvillian, initial: DensityState, n_cycles: int, samples_per_cycle: int,
             tol: float = DEFAULT_EVOLVE_TOL) -> Trajectory:
    """
    周期泵浦下的完整演化

    每个循环为一个泵浦间隔 T/2：先自由演化 T/2，再施加泵浦。每个间隔内等距采样
    samples_per_cycle 次，另加 t=0 的初始样本。

    Args:
        L: 生成元
        initial: t=0 的初态
        n_cycles: 泵浦事件数
        samples_per_cycle: 每个泵浦间隔内的采样数

    Returns:
        Trajectory: 采样轨迹
    """
    if n_cycles < 1:
        raise DomainError(f"n_cycles 必须 >= 1，得到 {n_cycles}")
    if samples_per_cycle < 1:
        raise DomainError(f"samples_per_cycle 必须 >= 1，得到 {samples_per_cycle}")
    if initial.n_max != L.n_max:
        raise DomainError(f"态的 n_max={initial.n_max} 与生成元 n_max={L.n_max} 不一致")

    interval = L.params.pump_interval
    dt = interval / samples_per_cycle
    n_samples = n_cycles * samples_per_cycle + 1
    times = np.empty(n_samples)
    vectors = np.empty((n_samples, vector_size(L.n_max)))
    times[0] = 0.0
    vectors[0] = to_vector(initial)
    pump_times = interval * np.arange(1, n_cycles + 1)
    pre_pump: List[DensityState] = []
    post_pump: List[DensityState] = []

    step = L.propagator(dt, cache=True) if L.dense else None
    offsets = dt * np.arange(1, samples_per_cycle + 1)
    vector = vectors[0]
    row = 1
    for k in range(n_cycles):
        start = k * interval
        if step is not None:
            block = np.empty((samples_per_cycle, len(vector)))
            for j in range(samples_per_cycle):
                vector = step @ vector
                block[j] = vector
        else:
            solution = _integrate(L, vector, interval, tol, t_eval=offsets)
            if not solution.success:
                raise DomainError(f"积分失败: {solution.message}")
            block = solution.y.T
        for j in range(samples_per_cycle):
            _check_tail(L.params, block[j], start + offsets[j])

        pre = from_vector(block[-1], L.n_max)
        post = pump_map(pre)
        pre_pump.append(pre)
        post_pump.append(post)
        vector = to_vector(post)
        block[-1] = vector

        times[row:row + samples_per_cycle] = start + offsets
        times[row + samples_per_cycle - 1] = pump_times[k]
        vectors[row:row + samples_per_cycle] = block
        row += samples_per_cycle

    logger.info("模拟完成: %d 次泵浦, %d 个样本", n_cycles, n_samples)
    return Trajectory(L.params, times, vectors, pump_times, pre_pump, post_pump)


# ---------------------------------------------------------------------------
# 频闪不动点（微激光稳态）
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FixedPointResult:
    state: DensityState
    iterations: int
    converged: bool
    residual: float
    residual_history: List[float] = field(default_factory=list, repr=False)

    def require(self) -> DensityState:
        """返回收敛的不动点，未收敛时抛出 ConvergenceError"""
        if not self.converged:
            raise ConvergenceError(self.iterations, self.residual)
        return self.state


def tv_distance(a: np.ndarray, b: np.ndarray) -> float:
    """系数向量上的全变差距离"""
    return 0.5 * float(np.abs(a - b).sum())


def fixed_point(L: Liouvillian, tol: float = DEFAULT_FIXED_POINT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, initial: Optional[DensityState] = None,
                method: str = "power") -> FixedPointResult:
    """
    求频闪映射 period_map 的不动点

    Args:
        L: 生成元
        tol: 收敛阈值（相邻迭代的全变差距离）
        max_iter: 最大迭代次数
        initial: 初始态，默认 |g,0><g,0|
        method: "power" 幂迭代；"eigen" 周期矩阵本征值 1 的本征向量（交叉检验）

    Returns:
        FixedPointResult: 不动点及收敛信息；未收敛时 converged=False 并携带最后一次迭代
    """
    if tol <= 0:
        raise DomainError(f"tol 必须 > 0，得到 {tol}")
    if method == "eigen":
        return _fixed_point_eigen(L, tol)
    if method != "power":
        raise DomainError(f"未知的不动点方法 {method!r}")
    if max_iter < 1:
        raise DomainError(f"max_iter 必须 >= 1，得到 {max_iter}")

    if initial is None:
        initial = new_pure(DotLevel.GROUND, 0, L.n_max)
    interval = L.params.pump_interval
    matrix = period_matrix(L) if L.dense else None

    vector = to_vector(initial)
    history: List[float] = []
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        if matrix is not None:
            new_vector = matrix @ vector
            _check_tail(L.params, new_vector, iteration * interval)
        else:
            state = period_map(L, from_vector(vector, L.n_max), t0=(iteration - 1) * interval)
            new_vector = to_vector(state)
        residual = tv_distance(new_vector, vector)
        history.append(residual)
        vector = new_vector
        if iteration > RESIDUAL_BURN_IN and residual > history[-2]:
            logger.debug("残差在第 %d 次迭代回升: %.3e -> %.3e", iteration, history[-2], residual)
        if residual < tol:
            logger.info("✅ 不动点收敛: %d 次迭代, 残差 %.3e", iteration, residual)
            return FixedPointResult(from_vector(vector, L.n_max), iteration, True, residual, history)

    logger.warning("❌ 不动点 %d 次迭代内未收敛, 残差 %.3e", max_iter, residual)
    return FixedPointResult(from_vector(vector, L.n_max), max_iter, False, float(residual), history)


def _fixed_point_eigen(L: Liouvillian, tol: float) -> FixedPointResult:
    matrix = period_matrix(L)
    eigenvalues, eigenvectors = scipy.linalg.eig(matrix)
    k = int(np.argmin(np.abs(eigenvalues - 1.0)))
    vector = np.real(eigenvectors[:, k])
    m = L.n_max + 1
    vector = vector / vector[:3 * m].sum()
    residual = tv_distance(matrix @ vector, vector)
    logger.info("本征值法不动点: λ=%.15g, 残差 %.3e", eigenvalues[k].real, residual)
    return FixedPointResult(from_vector(vector, L.n_max), 0, residual < tol, residual, [residual])


# ---------------------------------------------------------------------------
# 稠密主方程基准（测试用）
# ---------------------------------------------------------------------------

def _dense_operators(n_max: int):
    m = n_max + 1
    a = np.diag(np.sqrt(np.arange(1, m)), 1).astype(complex)
    s_plus = np.zeros((3, 3), dtype=complex)
    s_plus[DotLevel.EXCITED.index, DotLevel.GROUND.index] = 1.0
    field_a = np.kron(np.eye(3), a)
    coupling = field_a @ np.kron(s_plus, np.eye(m)) - field_a.conj().T @ np.kron(s_plus.T, np.eye(m))
    return coupling, field_a


def dense_oracle_derivative(params: SystemParams, full: np.ndarray) -> np.ndarray:
    """完整密度矩阵上的主方程右端 Λρ"""
    coupling, a = _dense_operators(params.n_max)
    number = a.conj().T @ a
    return (params.g * (coupling @ full - full @ coupling)
            + params.kappa * (a @ full @ a.conj().T - 0.5 * (number @ full + full @ number)))


def dense_oracle_evolve(params: SystemParams, full: np.ndarray, duration: float,
                        rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """
    在完整 3(n_max+1) 维密度矩阵上积分主方程，作为约化演化的基准

    Args:
        params: 物理参数
        full: 初始密度矩阵
        duration: 演化时长

    Returns:
        np.ndarray: 演化后的密度矩阵
    """
    dim = 3 * (params.n_max + 1)
    full = np.asarray(full, dtype=complex)
    if full.shape != (dim, dim):
        raise DomainError(f"矩阵维数应为 {dim}，得到 {full.shape}")
    if duration == 0:
        return full.copy()
    coupling, a = _dense_operators(params.n_max)
    a_dag = a.conj().T
    number = a_dag @ a

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        rho_dot = params.g * (coupling @ rho - rho @ coupling)
        rho_dot += params.kappa * (a @ rho @ a_dag - 0.5 * (number @ rho + rho @ number))
        return rho_dot.ravel()

    solution = solve_ivp(rhs, (0.0, duration), full.ravel(), method="DOP853",
                         t_eval=[duration], rtol=rtol, atol=atol)
    if not solution.success:
        raise DomainError(f"稠密积分失败: {solution.message}")
    return solution.y[:, -1].reshape(dim, dim)


def total_excitation(state: DensityState) -> float:
    """Tr[(S+S- + a†a)ρ]"""
    p_n = photon_distribution(state)
    return float(np.sum(state.c_ee) + np.arange(state.n_max + 1) @ p_n)

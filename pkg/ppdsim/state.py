"""
量子点 ⊗ 截断 Fock 空间的密度算符表示与泵浦映射

约化表示只保存五族系数：
    c_ee[n]   = <e,n|ρ|e,n>,        n = 0..n_max
    c_gg[n]   = <g,n|ρ|g,n>,        n = 0..n_max
    c_sese[n] = <se,n|ρ|se,n>,      n = 0..n_max
    c_ge[n]   = <g,n+1|ρ|e,n>,      n = 0..n_max-1   (c_eg = conj(c_ge)，不单独保存)

完整矩阵的基矢顺序固定为 dot-major: (e, g, se) × (0..n_max)，
即 |level,n> 的下标为 level_index * (n_max + 1) + n。
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from .errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_TAIL_THRESHOLD = 1e-8
STATE_SCHEMA = "ppdsim.density_state/1"

TRACE_TOL = 1e-9
POPULATION_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """
    物理参数

    Args:
        g: 点-腔耦合常数 [1/time]，g=0 表示退耦极限
        kappa: 腔场阻尼率 [1/time]
        T: 泵浦周期（一个完整的电子+空穴周期）[time]
        n_max: Fock 截断（保留的最高光子数）
        tail_threshold: 截断尾部布居阈值，None 表示不检查
    """

    g: float
    kappa: float
    T: float
    n_max: int
    tail_threshold: Optional[float] = DEFAULT_TAIL_THRESHOLD

    def __post_init__(self):
        if not np.isfinite(self.g) or self.g < 0:
            raise DomainError(f"g 必须为非负有限数，得到 {self.g}")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise DomainError(f"kappa 必须 >= 0，得到 {self.kappa}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise DomainError(f"T 必须 > 0，得到 {self.T}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise DomainError(f"n_max 必须为 >= 1 的整数，得到 {self.n_max}")
        if self.tail_threshold is not None and not self.tail_threshold > 0:
            raise DomainError(f"tail_threshold 必须 > 0，得到 {self.tail_threshold}")

    @property
    def pump_interval(self) -> float:
        """相邻泵浦事件的间隔 T/2"""
        return self.T / 2.0


class DotLevel(Enum):
    """量子点的三个能级；SEMI_EXCITED 与光场没有偶极耦合"""

    EXCITED = "excited"
    GROUND = "ground"
    SEMI_EXCITED = "semi_excited"

    @property
    def index(self) -> int:
        return _LEVEL_ORDER.index(self)


_LEVEL_ORDER = (DotLevel.EXCITED, DotLevel.GROUND, DotLevel.SEMI_EXCITED)


def _frozen(values: Any, dtype, length: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    if arr.shape != (length,):
        raise DomainError(f"{name} 的长度应为 {length}，得到 {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityState:
    """
    点+场密度算符的约化系数表示（构造后不可变）
    """

    c_ee: np.ndarray
    c_gg: np.ndarray
    c_sese: np.ndarray
    c_ge: np.ndarray

    def __post_init__(self):
        size = len(np.asarray(self.c_ee).reshape(-1))
        if size < 2:
            raise DomainError("n_max 必须 >= 1")
        object.__setattr__(self, "c_ee", _frozen(self.c_ee, float, size, "c_ee"))
        object.__setattr__(self, "c_gg", _frozen(self.c_gg, float, size, "c_gg"))
        object.__setattr__(self, "c_sese", _frozen(self.c_sese, float, size, "c_sese"))
        object.__setattr__(self, "c_ge", _frozen(self.c_ge, complex, size - 1, "c_ge"))

    @property
    def n_max(self) -> int:
        return len(self.c_ee) - 1

    def __repr__(self):
        return f"DensityState(n_max={self.n_max}, trace={trace(self):.12g})"


def zero_state(n_max: int) -> DensityState:
    zeros = np.zeros(n_max + 1)
    return DensityState(zeros, zeros, zeros, np.zeros(n_max, dtype=complex))


def new_pure(dot: DotLevel, n: int, n_max: int) -> DensityState:
    """
    构造纯积态 |dot,n><dot,n|

    Args:
        dot: 量子点能级
        n: 光子数
        n_max: Fock 截断

    Returns:
        DensityState: 只有一个单位布居的态
    """
    if n_max < 1:
        raise DomainError(f"n_max 必须 >= 1，得到 {n_max}")
    if n < 0 or n > n_max:
        raise DomainError(f"光子数 n={n} 超出截断范围 [0, {n_max}]")
    populations = np.zeros((3, n_max + 1))
    populations[dot.index, n] = 1.0
    return DensityState(populations[0], populations[1], populations[2], np.zeros(n_max, dtype=complex))


def trace(state: DensityState) -> float:
    return float(np.sum(state.c_ee) + np.sum(state.c_gg) + np.sum(state.c_sese))


def photon_distribution(state: DensityState) -> np.ndarray:
    """对量子点求偏迹，得到光子数分布 p_n（不做截断修正）"""
    return state.c_ee + state.c_gg + state.c_sese


def tail_mass(state: DensityState) -> float:
    """截断处 n = n_max 的总布居"""
    n = state.n_max
    return float(state.c_ee[n] + state.c_gg[n] + state.c_sese[n])


def pump_map(state: DensityState) -> DensityState:
    """
    瞬时非相干泵浦事件

    规则：|se,n> -> |e,n>；|g,n> -> |se,n>；|e,n> 保持不变；所有相干项清零。
    迹严格守恒。

    Args:
        state: 泵浦前的态 ρ(t_i - 0)

    Returns:
        DensityState: 泵浦后的态 ρ(t_i + 0)
    """
    n_max = state.n_max
    return DensityState(
        c_ee=state.c_sese + state.c_ee,
        c_gg=np.zeros(n_max + 1),
        c_sese=state.c_gg,
        c_ge=np.zeros(n_max, dtype=complex),
    )


def mixture(weights: Sequence[float], states: Sequence[DensityState]) -> DensityState:
    """线性组合 Σ w_i ρ_i（不做归一化）"""
    if len(weights) != len(states) or not states:
        raise DomainError("weights 与 states 的长度必须相同且非空")
    n_max = states[0].n_max
    if any(s.n_max != n_max for s in states):
        raise DomainError("所有态的 n_max 必须一致")
    vector = sum(w * to_vector(s) for w, s in zip(weights, states))
    return from_vector(vector, n_max)


def validate(state: DensityState, trace_tol: float = TRACE_TOL) -> None:
    """
    检查 DensityState 不变量：归一化、布居非负、每个 2x2 相干块半正定

    Raises:
        DomainError: 任一不变量被破坏
    """
    if abs(trace(state) - 1.0) > trace_tol:
        raise DomainError(f"迹 {trace(state):.15g} 偏离 1 超过 {trace_tol}")
    for name in ("c_ee", "c_gg", "c_sese"):
        lowest = float(np.min(getattr(state, name)))
        if lowest < -POPULATION_TOL:
            raise DomainError(f"{name} 出现负布居 {lowest:.3e}")
    excess = np.abs(state.c_ge) ** 2 - state.c_ee[:-1] * state.c_gg[1:]
    if np.any(excess > POPULATION_TOL):
        n = int(np.argmax(excess))
        raise DomainError(f"相干块 n={n} 不满足正定性: |c_ge|^2 - c_ee c_gg = {excess[n]:.3e}")


# ---------------------------------------------------------------------------
# 实系数向量布局: [c_ee(0..N), c_gg(0..N), c_sese(0..N), Re c_ge(0..N-1), Im c_ge(0..N-1)]
# ---------------------------------------------------------------------------

def vector_size(n_max: int) -> int:
    return 3 * (n_max + 1) + 2 * n_max


def to_vector(state: DensityState) -> np.ndarray:
    return np.concatenate(
        [state.c_ee, state.c_gg, state.c_sese, state.c_ge.real, state.c_ge.imag]
    )


def from_vector(vector: np.ndarray, n_max: int) -> DensityState:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (vector_size(n_max),):
        raise DomainError(f"系数向量长度应为 {vector_size(n_max)}，得到 {vector.shape}")
    m = n_max + 1
    re = vector[3 * m: 3 * m + n_max]
    im = vector[3 * m + n_max:]
    return DensityState(vector[:m], vector[m:2 * m], vector[2 * m:3 * m], re + 1j * im)


def pump_matrix(n_max: int) -> np.ndarray:
    """泵浦映射在实系数向量上的矩阵表示"""
    m = n_max + 1
    matrix = np.zeros((vector_size(n_max), vector_size(n_max)))
    idx = np.arange(m)
    matrix[idx, idx] = 1.0            # e -> e
    matrix[idx, 2 * m + idx] = 1.0    # se -> e
    matrix[2 * m + idx, m + idx] = 1.0  # g -> se
    return matrix


# ---------------------------------------------------------------------------
# 完整矩阵嵌入（仅供稠密主方程基准使用）
# ---------------------------------------------------------------------------

def basis_index(dot: DotLevel, n: int, n_max: int) -> int:
    return dot.index * (n_max + 1) + n


def to_full_matrix(state: DensityState) -> np.ndarray:
    """
    嵌入为完整的 3(n_max+1) 维厄米密度矩阵

    基矢顺序 dot-major: (e, g, se) × (0..n_max)。
    """
    n_max = state.n_max
    m = n_max + 1
    full = np.zeros((3 * m, 3 * m), dtype=complex)
    full[np.diag_indices(3 * m)] = np.concatenate([state.c_ee, state.c_gg, state.c_sese])
    n = np.arange(n_max)
    rows = basis_index(DotLevel.GROUND, 0, n_max) + n + 1
    cols = basis_index(DotLevel.EXCITED, 0, n_max) + n
    full[rows, cols] = state.c_ge
    full[cols, rows] = np.conj(state.c_ge)
    return full


def from_full_matrix(full: np.ndarray, n_max: int) -> DensityState:
    """to_full_matrix 的逆：抽取约化系数，丢弃约化表示之外的矩阵元"""
    m = n_max + 1
    full = np.asarray(full)
    if full.shape != (3 * m, 3 * m):
        raise DomainError(f"矩阵维数应为 {3 * m}，得到 {full.shape}")
    diagonal = np.real(np.diag(full))
    n = np.arange(n_max)
    rows = basis_index(DotLevel.GROUND, 0, n_max) + n + 1
    cols = basis_index(DotLevel.EXCITED, 0, n_max) + n
    return DensityState(diagonal[:m], diagonal[m:2 * m], diagonal[2 * m:], full[rows, cols])


def random_state(n_max: int, rng: np.random.Generator) -> DensityState:
    """
    随机生成一个满足全部不变量的 DensityState（用于性质测试）

    Args:
        n_max: Fock 截断
        rng: numpy 随机数生成器

    Returns:
        DensityState: 归一化、布居非负、相干块半正定的态
    """
    populations = rng.random((3, n_max + 1))
    amplitude = rng.random(n_max) * np.sqrt(populations[0, :-1] * populations[1, 1:])
    phase = np.exp(2j * np.pi * rng.random(n_max))
    norm = populations.sum()
    return DensityState(
        populations[0] / norm, populations[1] / norm, populations[2] / norm, amplitude * phase / norm
    )


# ---------------------------------------------------------------------------
# JSON 检查点
# ---------------------------------------------------------------------------

def to_dict(state: DensityState) -> Dict[str, Any]:
    return {
        "schema": STATE_SCHEMA,
        "n_max": state.n_max,
        "c_ee": state.c_ee.tolist(),
        "c_gg": state.c_gg.tolist(),
        "c_sese": state.c_sese.tolist(),
        "c_ge_re": state.c_ge.real.tolist(),
        "c_ge_im": state.c_ge.imag.tolist(),
    }


def from_dict(data: Dict[str, Any]) -> DensityState:
    if data.get("schema") != STATE_SCHEMA:
        raise DomainError(f"未知的态文件 schema: {data.get('schema')!r}")
    try:
        c_ge = np.asarray(data["c_ge_re"], dtype=float) + 1j * np.asarray(data["c_ge_im"], dtype=float)
        state = DensityState(data["c_ee"], data["c_gg"], data["c_sese"], c_ge)
    except KeyError as e:
        raise DomainError(f"态文件缺少字段 {e}") from e
    if state.n_max != data["n_max"]:
        raise DomainError(f"n_max={data['n_max']} 与系数长度不一致")
    return state


def save_json(state: DensityState, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_dict(state), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug("态检查点已写入 %s", path)
    return path


def load_json(path: Union[str, Path]) -> DensityState:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

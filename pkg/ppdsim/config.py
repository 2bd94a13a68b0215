"""
运行配置：解析 dotenv 风格的 key = value 文档并校验
"""

import io
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from dotenv.parser import parse_stream

from .dynamics import DEFAULT_EVOLVE_TOL, DEFAULT_FIXED_POINT_TOL, DEFAULT_MAX_ITER
from .errors import ConfigError, DomainError
from .state import DEFAULT_TAIL_THRESHOLD, DotLevel, SystemParams

logger = logging.getLogger(__name__)

MODES = ("train", "laser", "sweep", "curves")
SPACINGS = ("linear", "log")

# 默认扫描网格：g=1，κ ∈ {1e-3, 1e-2}，g·T/2 ∈ [0.1, 2π] 取 200 点
DEFAULT_SWEEP_G = 1.0
DEFAULT_SWEEP_AXES = (
    ("kappa", 1e-3, 1e-2, 2, "log"),
    ("T", 0.2, 4 * math.pi, 200, "linear"),
)


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    steps: int
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.start])
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class RunConfig:
    """
    一次批处理运行的全部设置
    """

    mode: str
    params: SystemParams
    initial_dot: DotLevel = DotLevel.EXCITED
    initial_n: int = 0
    n_cycles: int = 40
    samples_per_cycle: int = 1000
    evolve_tol: float = DEFAULT_EVOLVE_TOL
    fixed_point_tol: float = DEFAULT_FIXED_POINT_TOL
    report_tol: float = 1e-9
    max_iter: int = DEFAULT_MAX_ITER
    fixed_point_method: str = "power"
    trap_threshold: float = 1e-2
    average_from_cycle: int = 10
    sweep_axes: Tuple[SweepAxis, ...] = field(default_factory=tuple)
    curve_t_max: Optional[float] = None
    curve_points: int = 2001
    excel: bool = False
    plot: bool = False
    workers: Optional[int] = None

    def grid(self) -> Iterator[SystemParams]:
        """按 g, kappa, T 的顺序展开扫描网格（最后一个轴变化最快）"""
        axes = self.sweep_axes
        for combo in itertools.product(*(axis.values() for axis in axes)):
            overrides = {axis.name: float(value) for axis, value in zip(axes, combo)}
            yield replace(self.params, **overrides)

    @property
    def grid_size(self) -> int:
        return int(np.prod([axis.steps for axis in self.sweep_axes])) if self.sweep_axes else 0


def _as_float(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"无法解析为数值: {text!r}", key) from None
    if not math.isfinite(value):
        raise ConfigError(f"必须为有限数值: {text!r}", key)
    return value


def _as_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = _as_float(key, text)
        if value != int(value):
            raise ConfigError(f"必须为整数: {text!r}", key) from None
        return int(value)


def _as_bool(key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"必须为布尔值 (true/false): {text!r}", key)


def _as_optional_float(key: str, text: str) -> Optional[float]:
    return None if text.strip().lower() == "none" else _as_float(key, text)


def _as_level(key: str, text: str) -> DotLevel:
    try:
        return DotLevel(text.strip().lower())
    except ValueError:
        raise ConfigError(f"必须为 {[d.value for d in DotLevel]} 之一: {text!r}", key) from None


def _as_choice(choices) -> Callable[[str, str], str]:
    def convert(key: str, text: str) -> str:
        lowered = text.strip().lower()
        if lowered not in choices:
            raise ConfigError(f"必须为 {list(choices)} 之一: {text!r}", key)
        return lowered
    return convert


def _as_axis(key: str, text: str) -> SweepAxis:
    name = {"g": "g", "kappa": "kappa", "t": "T"}[key[len("sweep_"):]]
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ConfigError("格式应为 'min, max, steps[, linear|log]'", key)
    start, stop = _as_float(key, parts[0]), _as_float(key, parts[1])
    steps = _as_int(key, parts[2])
    spacing = _as_choice(SPACINGS)(key, parts[3]) if len(parts) == 4 else "linear"
    if steps < 1:
        raise ConfigError(f"steps 必须 >= 1，得到 {steps}", key)
    if stop < start:
        raise ConfigError(f"max ({stop}) 不能小于 min ({start})", key)
    if spacing == "log" and start <= 0:
        raise ConfigError("对数轴要求 min > 0", key)
    return SweepAxis(name, start, stop, steps, spacing)


_CONVERTERS: Dict[str, Callable[[str, str], Any]] = {
    "mode": _as_choice(MODES),
    "g": _as_float,
    "kappa": _as_float,
    "t": _as_float,
    "n_max": _as_int,
    "tail_threshold": _as_optional_float,
    "initial_dot": _as_level,
    "initial_n": _as_int,
    "n_cycles": _as_int,
    "samples_per_cycle": _as_int,
    "evolve_tol": _as_float,
    "fixed_point_tol": _as_float,
    "report_tol": _as_float,
    "max_iter": _as_int,
    "fixed_point_method": _as_choice(("power", "eigen")),
    "trap_threshold": _as_float,
    "average_from_cycle": _as_int,
    "curve_t_max": _as_float,
    "curve_points": _as_int,
    "excel": _as_bool,
    "plot": _as_bool,
    "workers": _as_int,
    "sweep_g": _as_axis,
    "sweep_kappa": _as_axis,
    "sweep_t": _as_axis,
}


def read_document(text: str) -> Dict[str, str]:
    """
    读取 key = value 文档，键名不区分大小写

    Raises:
        ConfigError: 无法解析的行、缺少取值或重复的键
    """
    values: Dict[str, str] = {}
    for binding in parse_stream(io.StringIO(text)):
        if binding.error:
            raise ConfigError(f"第 {binding.original.line} 行无法解析: {binding.original.string.strip()!r}")
        if binding.key is None:
            continue
        key = binding.key.strip().lower()
        if binding.value is None or binding.value.strip() == "":
            raise ConfigError(f"第 {binding.original.line} 行缺少取值", key)
        if key in values:
            raise ConfigError("重复的配置项", key)
        values[key] = binding.value.strip()
    return values


def parse_config(text: str, mode: Optional[str] = None) -> RunConfig:
    """
    解析并校验运行配置

    Args:
        text: dotenv 风格的配置文档
        mode: 命令行子命令给出的模式；与文档中的 mode 必须一致

    Returns:
        RunConfig: 已填充默认值的配置

    Raises:
        ConfigError: 文档格式错误、未知配置项或约束不满足
    """
    raw = read_document(text)
    unknown = sorted(set(raw) - set(_CONVERTERS))
    if unknown:
        raise ConfigError(f"未知的配置项，可选: {sorted(_CONVERTERS)}", unknown[0])
    values = {key: _CONVERTERS[key](key, text_value) for key, text_value in raw.items()}

    doc_mode = values.pop("mode", None)
    if mode is not None and doc_mode is not None and mode != doc_mode:
        raise ConfigError(f"文档指定 {doc_mode!r}，命令行指定 {mode!r}", "mode")
    mode = mode or doc_mode
    if mode not in MODES:
        raise ConfigError(f"必须为 {list(MODES)} 之一", "mode")

    axes: List[SweepAxis] = [values.pop(k) for k in ("sweep_g", "sweep_kappa", "sweep_t") if k in values]
    if axes and mode != "sweep":
        raise ConfigError("扫描轴只能用于 sweep 模式", f"sweep_{axes[0].name.lower()}")
    if mode == "sweep" and not axes:
        axes = [SweepAxis(*spec) for spec in DEFAULT_SWEEP_AXES]
        values.setdefault("g", DEFAULT_SWEEP_G)
    swept = {axis.name for axis in axes}

    base = {}
    for name, key in (("g", "g"), ("kappa", "kappa"), ("T", "t")):
        if key in values:
            base[name] = values.pop(key)
        elif name in swept:
            base[name] = next(a.start for a in axes if a.name == name)
        else:
            raise ConfigError("缺少必需的配置项", name)

    for name in ("g", "kappa", "T"):
        if name in ("g", "kappa") and base[name] < 0:
            raise ConfigError(f"必须 >= 0，得到 {base[name]}", name)
        if name == "T" and base[name] <= 0:
            raise ConfigError(f"必须 > 0，得到 {base[name]}", name)
    for axis in axes:
        if axis.name == "T" and axis.start <= 0:
            raise ConfigError("T 轴要求 min > 0", "sweep_t")
        if axis.start < 0:
            raise ConfigError(f"{axis.name} 轴要求 min >= 0", f"sweep_{axis.name.lower()}")

    if mode == "train":
        n_max = values.pop("n_max", 1)
        tail = values.pop("tail_threshold", None)
    else:
        n_max = values.pop("n_max", 30)
        tail = values.pop("tail_threshold", DEFAULT_TAIL_THRESHOLD)
    if n_max < 1:
        raise ConfigError(f"必须 >= 1，得到 {n_max}", "n_max")
    try:
        params = SystemParams(base["g"], base["kappa"], base["T"], n_max, tail)
    except DomainError as e:
        raise ConfigError(str(e), "tail_threshold") from e

    for key in ("evolve_tol", "fixed_point_tol", "report_tol"):
        if key in values and not values[key] > 0:
            raise ConfigError(f"容限必须 > 0，得到 {values[key]}", key)
    for key in ("n_cycles", "samples_per_cycle", "max_iter", "curve_points", "workers"):
        if key in values and values[key] < 1:
            raise ConfigError(f"必须 >= 1，得到 {values[key]}", key)
    if "trap_threshold" in values and not 0 < values["trap_threshold"] < 1:
        raise ConfigError("必须在 (0, 1) 内", "trap_threshold")
    if "curve_t_max" in values and not values["curve_t_max"] > 0:
        raise ConfigError("必须 > 0", "curve_t_max")
    if "initial_n" in values and not 0 <= values["initial_n"] <= n_max:
        raise ConfigError(f"必须在 [0, {n_max}] 内", "initial_n")
    n_cycles = values.get("n_cycles", RunConfig.n_cycles)
    start = values.get("average_from_cycle", RunConfig.average_from_cycle if n_cycles > 10 else 0)
    if not 0 <= start < n_cycles:
        raise ConfigError(f"必须在 [0, {n_cycles}) 内", "average_from_cycle")
    values["average_from_cycle"] = start

    config = RunConfig(mode=mode, params=params, sweep_axes=tuple(axes), **values)
    logger.debug("配置解析完成: %s", config)
    return config

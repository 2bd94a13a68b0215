"""
批处理命令行：train / laser / sweep / curves 四种运行模式

    python app.py train  --config configs/train.env --out results/train
    python app.py sweep  --config configs/sweep.env --out results/sweep --workers 4

退出码：0 成功；1 配置错误；2 运行失败（扫描中全部网格点失败也算运行失败）。
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from tqdm import tqdm

from . import __version__
from .analytic import TrainParams, g1, g1_first_zero, mean_photon_number, p1, photon_train
from .config import MODES, RunConfig, parse_config
from .dynamics import build_liouvillian, fixed_point, simulate
from .errors import ConfigError, PPDSimError
from .formatter import ResultFormatter
from .observables import detect_trapping, statistics, stationary_p_D, time_average
from .state import new_pure, save_json, validate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_FAILURE = 2


def _train_params(config: RunConfig) -> TrainParams:
    p = config.params
    return TrainParams(p.g, p.kappa, p.T)


def _average_window(config: RunConfig) -> tuple:
    """平均窗口按完整周期 T（两个泵浦间隔）对齐"""
    start, stop = config.average_from_cycle, config.n_cycles
    if (stop - start) % 2 and stop - start > 1:
        logger.debug("平均窗口 [%d, %d] 不是整周期，起点后移一个泵浦间隔", start, stop)
        start += 1
    return start, stop


def _maybe_plot(config: RunConfig, out_dir: str, draw) -> None:
    if not config.plot:
        return
    try:
        from .plotter import FigureGenerator
        draw(FigureGenerator(out_dir))
    except Exception as e:
        # 图像不影响数值结果
        logger.warning("❌ 绘图失败: %s", e)


def run_train(config: RunConfig, formatter: ResultFormatter) -> Dict[str, Any]:
    """
    光子列模式：周期泵浦下的完整轨迹，与解析光子列对比

    输出 trajectory.csv、trajectory.json、analytic_overlay.csv 与 summary.json
    """
    train = _train_params(config)
    L = build_liouvillian(config.params)
    initial = new_pure(config.initial_dot, config.initial_n, config.params.n_max)
    traj = simulate(L, initial, config.n_cycles, config.samples_per_cycle, config.evolve_tol)

    frame = traj.to_frame()
    formatter.export_to_csv(frame, "trajectory.csv", time_column="t")
    formatter.export_to_json(traj.to_dict(), "trajectory.json")

    times = frame["t"].to_numpy()
    overlay = pd.DataFrame({
        "t": times,
        "mean_n": frame["mean_n"].to_numpy(),
        "photon_train": photon_train(times, train),
        "p1": p1(times, train),
    })
    formatter.export_to_csv(overlay, "analytic_overlay.csv", time_column="t")

    window = _average_window(config)
    numeric = time_average(traj, "mean_n", window)
    analytic = mean_photon_number(train)
    summary = {
        "mode": "train",
        "params": {"g": train.g, "kappa": train.kappa, "T": train.T, "n_max": config.params.n_max},
        "regime": train.regime.value,
        "n_cycles": config.n_cycles,
        "average_window_cycles": list(window),
        "mean_n_numeric": numeric,
        "mean_n_analytic": analytic,
        "relative_error": abs(numeric - analytic) / analytic,
        "max_overlay_deviation": float(np.max(np.abs(overlay["mean_n"] - overlay["photon_train"]))),
        "final_trace": float(frame["trace"].iloc[-1]),
    }
    formatter.export_to_json(summary, "summary.json")
    _maybe_plot(config, formatter.output_dir, lambda fig: fig.plot_train(frame, overlay))
    return summary


def run_laser(config: RunConfig, formatter: ResultFormatter) -> Dict[str, Any]:
    """
    微激光模式：频闪映射的不动点及其光子统计

    输出 fixed_point_state.json、laser_pn.csv 与 laser_stats.json
    """
    params = config.params
    L = build_liouvillian(params)
    result = fixed_point(L, config.fixed_point_tol, config.max_iter, method=config.fixed_point_method)
    # 未收敛时也保留最后一次迭代，便于排查
    save_json(result.state, os.path.join(formatter.output_dir, "fixed_point_state.json"))
    state = result.require()
    validate(state, trace_tol=config.report_tol)

    stats = statistics(state)
    p_d = stationary_p_D(state, L, config.fixed_point_tol)
    n_trap = detect_trapping(stats.p_n, config.trap_threshold, params)

    formatter.export_to_csv(pd.DataFrame({"n": np.arange(len(stats.p_n)), "p_n": stats.p_n}), "laser_pn.csv")
    summary = {
        "mode": "laser",
        "params": {"g": params.g, "kappa": params.kappa, "T": params.T, "n_max": params.n_max},
        "fixed_point_method": config.fixed_point_method,
        "iterations": result.iterations,
        "residual": result.residual,
        "p_D": p_d,
        "n_trap": n_trap,
        "trap_threshold": config.trap_threshold,
        **stats.as_dict(),
    }
    formatter.export_to_json(summary, "laser_stats.json")
    _maybe_plot(config, formatter.output_dir, lambda fig: fig.plot_distribution(stats.p_n))
    return summary


def _sweep_point(task) -> Dict[str, Any]:
    """单个网格点；在子进程中执行，错误记录在结果行中"""
    index, params, config = task
    row: Dict[str, Any] = {
        "index": index, "g": params.g, "kappa": params.kappa, "T": params.T,
        "mean_n": np.nan, "Q": np.nan, "classification": None, "p_D": np.nan, "n_trap": None,
        "status": "failed", "iterations": None, "residual": np.nan, "message": None,
    }
    try:
        L = build_liouvillian(params)
        result = fixed_point(L, config.fixed_point_tol, config.max_iter, method=config.fixed_point_method)
        row["iterations"] = result.iterations
        row["residual"] = result.residual
        state = result.require()
        validate(state, trace_tol=config.report_tol)
        stats = statistics(state)
        row.update({
            "mean_n": stats.mean_n,
            "Q": np.nan if stats.mandel_Q is None else stats.mandel_Q,
            "classification": stats.classification.value if stats.classification else None,
            "p_D": stationary_p_D(state, L, config.fixed_point_tol),
            "n_trap": detect_trapping(stats.p_n, config.trap_threshold, params),
            "status": "converged",
        })
    except PPDSimError as e:
        row["message"] = str(e)
        logger.warning("❌ 网格点 %d (g=%g, kappa=%g, T=%g) 失败: %s", index, params.g, params.kappa, params.T, e)
    return row


def run_sweep(config: RunConfig, formatter: ResultFormatter, workers: int = 1) -> Dict[str, Any]:
    """
    参数扫描：对网格上每个点求微激光不动点

    行按网格下标排序，与完成顺序无关；失败的点记录为 status=failed。
    """
    tasks = [(index, params, config) for index, params in enumerate(config.grid())]
    logger.info("开始扫描: %d 个网格点, %d 个进程", len(tasks), workers)
    progress = dict(total=len(tasks), desc="sweep", unit="pt", disable=None)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(tqdm(executor.map(_sweep_point, tasks), **progress))
    else:
        rows = [_sweep_point(task) for task in tqdm(tasks, **progress)]

    frame = formatter.format_sweep_dataframe(rows)
    formatter.export_to_csv(frame, "sweep.csv")
    if config.excel:
        formatter.export_to_excel(frame, "sweep.xlsx")
    _maybe_plot(config, formatter.output_dir, lambda fig: fig.plot_sweep(frame))

    converged = frame[frame["status"] == "converged"]
    return {
        "mode": "sweep",
        "points": len(frame),
        "converged": len(converged),
        "failed": len(frame) - len(converged),
        "sub-Poissonian": int((converged["classification"] == "sub-Poissonian").sum()),
        "super-Poissonian": int((converged["classification"] == "super-Poissonian").sum()),
        "min_Q": float(converged["Q"].min()) if len(converged) else None,
        "max_Q": float(converged["Q"].max()) if len(converged) else None,
    }


def run_curves(config: RunConfig, formatter: ResultFormatter) -> Dict[str, Any]:
    """
    解析曲线：p1、光子列 p(t) 与 g1(τ) 在同一网格上求值

    输出 curves.csv 与 curves_summary.json；时间网格默认覆盖三个周期 T。
    """
    train = _train_params(config)
    t_max = config.curve_t_max if config.curve_t_max is not None else 3.0 * train.T
    t = np.linspace(0.0, t_max, config.curve_points)
    curves = pd.DataFrame({"t": t, "p1": p1(t, train), "photon_train": photon_train(t, train), "g1": g1(t, train)})
    formatter.export_to_csv(curves, "curves.csv", time_column="t")

    summary = {
        "mode": "curves",
        "params": {"g": train.g, "kappa": train.kappa, "T": train.T},
        "regime": train.regime.value,
        "mean_photon_number": mean_photon_number(train) if train.kappa > 0 else None,
        "g1_first_zero": g1_first_zero(train),
        "p1_max": float(curves["p1"].max()),
        "t_max": t_max,
        "points": config.curve_points,
    }
    formatter.export_to_json(summary, "curves_summary.json")
    _maybe_plot(config, formatter.output_dir, lambda fig: fig.plot_curves(curves))
    return summary


def run(config: RunConfig, out_dir: str, workers: int = 1) -> int:
    """
    执行一次运行并写出结果文件

    Args:
        config: 已校验的运行配置
        out_dir: 输出目录（不存在时创建）
        workers: 扫描模式的并行进程数

    Returns:
        int: 退出码
    """
    logger.info("开始运行: mode=%s, %s", config.mode, config.params)
    try:
        formatter = ResultFormatter(out_dir)
        if config.mode == "train":
            summary = run_train(config, formatter)
        elif config.mode == "laser":
            summary = run_laser(config, formatter)
        elif config.mode == "sweep":
            summary = run_sweep(config, formatter, workers)
        else:
            summary = run_curves(config, formatter)
    except PPDSimError as e:
        logger.error("❌ 运行失败: %s", e)
        return EXIT_RUNTIME_FAILURE
    except OSError as e:
        logger.error("❌ 无法写出结果文件: %s", e)
        return EXIT_RUNTIME_FAILURE

    print(formatter.create_summary_report(f"PPDSim {config.mode} 结果", summary))
    if config.mode == "sweep" and summary["converged"] == 0:
        logger.error("❌ 所有网格点均失败")
        return EXIT_RUNTIME_FAILURE
    logger.info("✅ 运行完成，结果位于 %s", out_dir)
    return EXIT_OK


def load_config(path: str, mode: Optional[str] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}", "config") from e
    return parse_config(text, mode)


def _resolve_workers(cli_value: Optional[int], config: RunConfig) -> int:
    """命令行 > 配置文档 > 环境变量 PPDSIM_WORKERS > 1"""
    if cli_value is not None:
        workers = cli_value
    elif config.workers is not None:
        workers = config.workers
    else:
        env_value = os.getenv("PPDSIM_WORKERS", "1")
        try:
            workers = int(env_value)
        except ValueError:
            raise ConfigError(f"无法解析为整数: {env_value!r}", "PPDSIM_WORKERS") from None
    if workers < 1:
        raise ConfigError(f"必须 >= 1，得到 {workers}", "workers")
    return workers


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppdsim", description="周期泵浦量子点 + 单模腔模拟器")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sub = subparsers.add_parser(mode, help=f"{mode} 模式")
        sub.add_argument("--config", required=True, help="key = value 配置文档路径")
        sub.add_argument("--out", default=os.path.join("results", mode), help="输出目录")
        sub.add_argument("--workers", type=int, default=None, help="扫描并行进程数")
        sub.add_argument("--verbose", action="store_true", help="输出 DEBUG 日志")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose else os.getenv("PPDSIM_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')

    try:
        config = load_config(args.config, args.mode)
        workers = _resolve_workers(args.workers, config)
    except ConfigError as e:
        logger.error("❌ 配置错误: %s", e)
        return EXIT_CONFIG_ERROR
    return run(config, args.out, workers)


if __name__ == "__main__":
    sys.exit(main())

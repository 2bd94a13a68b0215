import logging
import os

import matplotlib
# 设置非交互式后端，防止多线程报错
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

logger = logging.getLogger(__name__)


class FigureGenerator:
    """
    用 matplotlib 把轨迹、解析曲线和扫描结果画成 PNG
    """

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        plt.rcParams['axes.unicode_minus'] = False

    def _save(self, fig, filename: str) -> str:
        path = os.path.join(self.output_dir, filename)
        # 去掉 Software 元数据，同版本 matplotlib 下输出可复现
        fig.savefig(path, format='png', bbox_inches='tight', dpi=150, metadata={"Software": None})
        plt.close(fig)
        logger.info("✅ 图像已保存 %s", path)
        return path

    def plot_train(self, trajectory: pd.DataFrame, overlay: pd.DataFrame) -> str:
        """数值光子数与解析光子列叠加"""
        fig, (ax_n, ax_d) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
        ax_n.plot(trajectory["t"], trajectory["mean_n"], lw=1.2, label="numeric <n>")
        ax_n.plot(overlay["t"], overlay["photon_train"], "--", lw=1.0, label="photon train p(t)")
        ax_n.set_ylabel("photon number")
        ax_n.legend(loc="upper right")
        ax_d.plot(trajectory["t"], trajectory["p_D_pre"], lw=1.0, label="Tr(S+S- rho)")
        ax_d.set_xlabel("t")
        ax_d.set_ylabel("dot excitation")
        ax_d.legend(loc="upper right")
        return self._save(fig, "train.png")

    def plot_curves(self, curves: pd.DataFrame) -> str:
        fig, (ax_p, ax_g) = plt.subplots(1, 2, figsize=(11, 4))
        ax_p.plot(curves["t"], curves["p1"], label="p1(t)")
        ax_p.plot(curves["t"], curves["photon_train"], "--", label="p(t)")
        ax_p.set_xlabel("t")
        ax_p.legend()
        ax_g.plot(curves["t"], curves["g1"], color="tab:red")
        ax_g.axhline(0.0, color="grey", lw=0.5)
        ax_g.set_xlabel("tau")
        ax_g.set_ylabel("g1(tau)")
        return self._save(fig, "curves.png")

    def plot_distribution(self, p_n) -> str:
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(range(len(p_n)), p_n, color="tab:blue")
        ax.set_xlabel("n")
        ax.set_ylabel("p_n")
        return self._save(fig, "laser_pn.png")

    def plot_sweep(self, sweep: pd.DataFrame) -> str:
        """Mandel Q 随周期 T 的变化，按 kappa 分组"""
        fig, ax = plt.subplots(figsize=(9, 4))
        converged = sweep[sweep["status"] == "converged"]
        for kappa, group in converged.groupby("kappa"):
            ax.plot(group["T"], group["Q"], marker=".", lw=0.8, label=f"kappa={kappa:g}")
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_xlabel("T")
        ax.set_ylabel("Mandel Q")
        ax.legend()
        return self._save(fig, "sweep.png")

import csv
import json
import logging
import math
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import xlsxwriter
from tabulate import tabulate

from .errors import PPDSimError

logger = logging.getLogger(__name__)

# 17 位有效数字，保证重复运行输出逐字节一致
FLOAT_FORMAT = "%.17g"

SWEEP_COLUMNS = [
    "index", "g", "kappa", "T", "mean_n", "Q", "classification", "p_D", "n_trap",
    "status", "iterations", "residual", "message",
]


class SchemaError(PPDSimError):
    """输出文件未通过 schema 自检"""


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class ResultFormatter:
    """
    结果格式化器类，负责把模拟结果写成 CSV / JSON / Excel 文件
    """

    def __init__(self, output_dir: str = "data/exports"):
        self.output_dir = output_dir

        # 确保输出目录存在
        if not os.path.exists(self.output_dir):
            os.makedirs(self.output_dir)

    def _path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def format_sweep_dataframe(self, rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
        """
        将扫描结果行转换为 DataFrame，列顺序固定为 SWEEP_COLUMNS

        Args:
            rows: 按网格下标排序的结果行

        Returns:
            pd.DataFrame: 扫描表
        """
        frame = pd.DataFrame(list(rows), columns=SWEEP_COLUMNS)
        frame["n_trap"] = frame["n_trap"].astype("Int64")
        frame["iterations"] = frame["iterations"].astype("Int64")
        return frame

    def export_to_csv(self, frame: pd.DataFrame, filename: str,
                      time_column: Optional[str] = None) -> str:
        """
        导出 CSV 并做 schema 自检

        Args:
            frame: 数据表
            filename: 文件名
            time_column: 若给出，检查该列严格递增

        Returns:
            str: 导出文件的路径
        """
        output_path = self._path(filename)
        frame.to_csv(output_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.check_csv_schema(output_path, list(frame.columns), time_column)
        logger.info("✅ 已写入 %s (%d 行)", output_path, len(frame))
        return output_path

    @staticmethod
    def check_csv_schema(path: str, columns: List[str], time_column: Optional[str] = None) -> None:
        """
        读回 CSV，检查表头、每行列数以及时间列单调递增

        Raises:
            SchemaError: 任一检查失败
        """
        with open(path, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
        if not rows or rows[0] != columns:
            raise SchemaError(f"{path}: 表头与预期列 {columns} 不一致")
        for number, row in enumerate(rows[1:], start=2):
            if len(row) != len(columns):
                raise SchemaError(f"{path}: 第 {number} 行列数错误")
        if time_column is not None:
            times = pd.read_csv(path, usecols=[time_column])[time_column].to_numpy()
            if len(times) > 1 and not np.all(np.diff(times) > 0):
                raise SchemaError(f"{path}: {time_column} 列不是严格递增")

    def export_to_json(self, data: Dict[str, Any], filename: str) -> str:
        """
        将结果字典导出为 JSON 文件（键排序，不带时间戳）

        Returns:
            str: 导出文件的路径
        """
        output_path = self._path(filename)
        with open(output_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        logger.info("✅ 已写入 %s", output_path)
        return output_path

    def export_to_excel(self, frame: pd.DataFrame, filename: str = "sweep.xlsx") -> str:
        """
        将扫描表导出为 Excel，按光子统计类型着色

        Args:
            frame: format_sweep_dataframe 的结果
            filename: 文件名

        Returns:
            str: 导出文件的路径
        """
        output_path = self._path(filename)
        workbook = xlsxwriter.Workbook(output_path, {"nan_inf_to_errors": True})
        # 固定创建时间，避免文件随运行时刻变化
        workbook.set_properties({"created": datetime(2000, 1, 1)})

        header_format = workbook.add_format({
            'bold': True,
            'text_wrap': True,
            'valign': 'top',
            'fg_color': '#D7E4BC',
            'border': 1
        })
        row_formats = {
            "sub-Poissonian": workbook.add_format({'bg_color': '#D4EDDA', 'border': 1}),   # 浅绿色
            "Poissonian": workbook.add_format({'bg_color': '#FFF3CD', 'border': 1}),       # 浅黄色
            "super-Poissonian": workbook.add_format({'bg_color': '#F8D7DA', 'border': 1}), # 浅红色
        }
        failed_format = workbook.add_format({'font_color': '#888888', 'border': 1})

        worksheet = workbook.add_worksheet("sweep")
        for col_num, value in enumerate(frame.columns):
            worksheet.write(0, col_num, value, header_format)
            worksheet.set_column(col_num, col_num, max(len(value) + 2, 12))

        for row_num, row in enumerate(frame.itertuples(index=False), start=1):
            record = row._asdict()
            if record["status"] != "converged":
                cell_format = failed_format
            else:
                cell_format = row_formats.get(record["classification"])
            for col_num, value in enumerate(row):
                if value is None or value is pd.NA or (isinstance(value, float) and math.isnan(value)):
                    worksheet.write_blank(row_num, col_num, None, cell_format)
                else:
                    worksheet.write(row_num, col_num, value.item() if hasattr(value, "item") else value, cell_format)

        workbook.close()
        logger.info("✅ 已写入 %s", output_path)
        return output_path

    @staticmethod
    def create_summary_report(title: str, items: Dict[str, Any]) -> str:
        """
        生成控制台摘要表

        Args:
            title: 标题
            items: 名称到取值的映射

        Returns:
            str: 表格文本
        """
        rows = [(key, "N/A" if value is None else value) for key, value in items.items()]
        return f"{title}\n" + tabulate(rows, headers=["项目", "值"], tablefmt="github", floatfmt=".10g")

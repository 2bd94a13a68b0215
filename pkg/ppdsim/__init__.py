# PPDSim 工具包
"""
周期泵浦量子点（PPD）+ 单模腔的模拟工具包

包含密度算符表示、主方程演化、光子列解析式、光子统计以及批处理命令行。
"""

__version__ = "1.0.0"

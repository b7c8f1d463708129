"""
结果导出

把仿真报告整理成 pandas 表并写成 CSV：逐周表、汇总表、Θ 轨迹表、多策略对比表、
耗时表，以及对已写出文件的表头/取值校验。墙钟耗时指标只进耗时表，
汇总表、对比表与扫描表在同一清单重跑时逐字节一致。
"""

import logging
from pathlib import Path
from typing import Iterable, List

import pandas as pd

from config.constants import (
    WEEKLY_CSV_COLUMNS, AGGREGATE_CSV_COLUMNS, SWEEP_CSV_COLUMNS, THETA_CSV_COLUMNS_PREFIX, WALL_TIME_METRICS,
)
from config.models import SimulationReport

logger = logging.getLogger(__name__)

# 逐周表中必须非负的数值列
_NONNEGATIVE_WEEKLY = [
    "waiting_list_size", "scheduled", "c_p", "c_h_mean", "c_h_std", "c_mean",
    "o_mean", "o_std", "e_mean", "e_std", "t_ms",
]


def _join(values: Iterable) -> str:
    return " ".join(str(v) for v in values)


def weekly_frame(reports: List[SimulationReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for week in report.weeks:
            row = week.model_dump()
            row["policy"] = report.policy
            row["action"] = _join(week.action)
            row["o_j_mean"] = _join(f"{v:.6g}" for v in week.o_j_mean)
            row["o_j_std"] = _join(f"{v:.6g}" for v in week.o_j_std)
            row["evaluated_actions"] = str(week.evaluated_actions)
            row["full_actions"] = str(week.full_actions)
            rows.append(row)
    return pd.DataFrame(rows, columns=WEEKLY_CSV_COLUMNS)


def aggregate_frame(reports: List[SimulationReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for name, stat in report.metrics.items():
            if name in WALL_TIME_METRICS:
                continue
            rows.append({"policy": report.policy, "metric": name, "mean": stat.mean, "std": stat.std})
        for wait in report.waiting_times:
            rows.append({"policy": report.policy, "metric": f"omega_{wait.specialty}_{wait.urgency}",
                         "mean": wait.mean, "std": wait.std})
        rows.append({"policy": report.policy, "metric": "action_ratio", "mean": report.action_ratio, "std": 0.0})
        rows.append({"policy": report.policy, "metric": "max_full_actions",
                     "mean": float(report.max_full_actions), "std": 0.0})
        rows.append({"policy": report.policy, "metric": "max_evaluated_actions",
                     "mean": float(report.max_evaluated_actions), "std": 0.0})
    return pd.DataFrame(rows, columns=AGGREGATE_CSV_COLUMNS)


def timing_frame(reports: List[SimulationReport]) -> pd.DataFrame:
    """每周决策耗时 t_ms 与总耗时 T_s"""
    rows = [{"policy": report.policy, "metric": name, "mean": stat.mean, "std": stat.std}
            for report in reports for name, stat in report.metrics.items() if name in WALL_TIME_METRICS]
    return pd.DataFrame(rows, columns=AGGREGATE_CSV_COLUMNS)


def theta_frame(reports: List[SimulationReport]) -> pd.DataFrame:
    rows = []
    width = 0
    for report in reports:
        for record in report.theta_trace:
            width = max(width, len(record.theta))
            row = {"policy": report.policy, "week": record.week,
                   "trajectories": record.trajectories, "converged": record.converged}
            row.update({f"theta_{i + 1}": value for i, value in enumerate(record.theta)})
            rows.append(row)
    columns = THETA_CSV_COLUMNS_PREFIX + [f"theta_{i + 1}" for i in range(width)]
    return pd.DataFrame(rows, columns=columns)


def comparison_frame(reports: List[SimulationReport]) -> pd.DataFrame:
    """指标 × 策略 的均值对比表"""
    aggregate = aggregate_frame(reports)
    table = aggregate.pivot(index="metric", columns="policy", values="mean")
    order = list(dict.fromkeys(aggregate["metric"]))
    return table.reindex(order)[[r.policy for r in reports]]


def sweep_frame(rows: List[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=SWEEP_CSV_COLUMNS)


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info("已写出 %s (%d 行)", path, len(frame))
    return path


def validate_csv(path: Path, expected_columns: List[str], prefix_only: bool = False) -> List[str]:
    """按文档表头检查 CSV；返回问题列表，为空表示通过"""
    problems: List[str] = []
    try:
        frame = pd.read_csv(path, dtype={"action": str, "o_j_mean": str, "o_j_std": str,
                                         "evaluated_actions": str, "full_actions": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        return [f"{path}: 无法读取 ({e})"]

    columns = list(frame.columns)
    header = columns[:len(expected_columns)] if prefix_only else columns
    if header != list(expected_columns):
        problems.append(f"{path}: 表头 {columns} 与约定 {list(expected_columns)} 不一致")
        return problems
    if frame.empty:
        problems.append(f"{path}: 没有数据行")

    if expected_columns == WEEKLY_CSV_COLUMNS:
        for column in _NONNEGATIVE_WEEKLY:
            values = pd.to_numeric(frame[column], errors="coerce")
            if values.isna().any():
                problems.append(f"{path}: 列 {column} 含非数值")
            elif (values < 0).any():
                problems.append(f"{path}: 列 {column} 含负值")
        gap = (frame["c_mean"] - frame["c_p"] - frame["c_h_mean"]).abs()
        if (gap > 1e-6 * frame["c_mean"].abs().clip(lower=1.0)).any():
            problems.append(f"{path}: c_mean != c_p + c_h_mean")
    elif expected_columns in (AGGREGATE_CSV_COLUMNS, SWEEP_CSV_COLUMNS):
        numeric = pd.to_numeric(frame["mean"], errors="coerce")
        missing = numeric.isna()
        if "error" in frame.columns:
            missing &= frame["error"].isna()
        if missing.any():
            problems.append(f"{path}: mean 列含非数值")
    return problems

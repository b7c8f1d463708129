"""
配置模块

包含项目的常量定义、数据模型和内置问题实例。
"""

from .constants import (
    SolverKind, ActionSource, StreamPurpose, SweepParameter,
    WEEKLY_CSV_COLUMNS, AGGREGATE_CSV_COLUMNS, SWEEP_CSV_COLUMNS, THETA_CSV_COLUMNS_PREFIX,
)

from .models import (
    UrgencyGroup, SpecialtyConfig, UnitCosts, ProblemConfig, AdpParameters, SolverSpec,
    SimulationPlan, SweepSpec, WeekRecord, MetricStat, WaitingTimeStat, ThetaRecord,
    SimulationReport, RunManifest,
)

from .instances import InstanceLibrary

__all__ = [
    # 枚举类
    'SolverKind', 'ActionSource', 'StreamPurpose', 'SweepParameter',

    # CSV 表头
    'WEEKLY_CSV_COLUMNS', 'AGGREGATE_CSV_COLUMNS', 'SWEEP_CSV_COLUMNS', 'THETA_CSV_COLUMNS_PREFIX',

    # 实例配置
    'UrgencyGroup', 'SpecialtyConfig', 'UnitCosts', 'ProblemConfig', 'InstanceLibrary',

    # 求解与仿真
    'AdpParameters', 'SolverSpec', 'SimulationPlan', 'SweepSpec',

    # 报告
    'WeekRecord', 'MetricStat', 'WaitingTimeStat', 'ThetaRecord', 'SimulationReport', 'RunManifest',
]

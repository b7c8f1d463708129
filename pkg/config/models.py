"""
数据模型

基于 pydantic 的实例配置 (专科、紧急程度组、单位成本)、求解器与仿真计划、
扫描规格、仿真报告与运行清单。配置类模型不可变，校验失败时抛出 ValidationError。
"""

import logging
import re
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .constants import (
    SolverKind, SweepParameter, DEFAULT_TRUNCATION_THRESHOLD, DEFAULT_DISCOUNT,
    DEFAULT_LAMBDA, DEFAULT_BETA, DEFAULT_TRAJECTORY_DEPTH, DEFAULT_EPSILON,
    DEFAULT_MAX_TRAJECTORIES, DEFAULT_RESYMMETRIZE_EVERY, DEFAULT_SCENARIO_COUNT,
    DEFAULT_HORIZON_WEEKS, DEFAULT_SEED, DEFAULT_STOP_RESIDUAL, DEFAULT_MAX_SWEEPS,
)

logger = logging.getLogger(__name__)

_OR_CAPACITY_PARAM = re.compile(r"^B_(\d+)$")


class UrgencyGroup(BaseModel):
    """同一专科内的一个紧急程度组 (u, W_ju, n̄_ju)"""
    model_config = ConfigDict(frozen=True)

    urgency: int = Field(gt=0)
    max_wait_weeks: int = Field(ge=1)
    arrival_rate_per_week: float = Field(ge=0)
    arrival_cap: Optional[int] = Field(default=None, ge=0)  # 显式截断上限，覆盖 support_cap


class SpecialtyConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    importance: float = Field(gt=0)                   # v_j
    or_capacity_hours: float = Field(ge=0)            # B_j
    duration_mean_hours: float = Field(gt=0)          # d̄_j
    duration_std_hours: float = Field(ge=0)           # σ(d_j)
    los_mean_days: float = Field(gt=0)                # l̄_j
    los_std_days: float = Field(ge=0)                 # σ(l_j)
    urgency_groups: List[UrgencyGroup] = Field(min_length=1)

    @field_validator("urgency_groups")
    @classmethod
    def _sorted_distinct(cls, groups: List[UrgencyGroup]) -> List[UrgencyGroup]:
        coefficients = [g.urgency for g in groups]
        if len(set(coefficients)) != len(coefficients):
            raise ValueError(f"同一专科内紧急系数必须互不相同: {coefficients}")
        # 规范顺序: 紧急系数升序
        return sorted(groups, key=lambda g: g.urgency)


class UnitCosts(BaseModel):
    model_config = ConfigDict(frozen=True)

    surgery_per_priority_unit: float = Field(ge=0)    # c_b
    waiting_per_priority_unit: float = Field(ge=0)    # c_d
    or_overtime_per_hour: float = Field(ge=0)         # c_o
    sicu_shortage_per_bed_day: float = Field(ge=0)    # c_e


class ProblemConfig(BaseModel):
    """完整的问题实例描述"""
    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    specialties: List[SpecialtyConfig] = Field(min_length=1)
    sicu_capacity_bed_days: float = Field(ge=0)       # R
    or_availability_rate: float = Field(gt=0, le=1)   # ρ1
    sicu_availability_rate: float = Field(gt=0, le=1) # ρ2
    costs: UnitCosts
    discount: float = Field(default=DEFAULT_DISCOUNT, ge=0, lt=1)  # γ
    poisson_truncation_threshold: float = Field(default=DEFAULT_TRUNCATION_THRESHOLD, gt=0, lt=1)
    truncate_arrivals: bool = True
    allow_nonincreasing_waiting_cost: bool = False

    @model_validator(mode="after")
    def _check_cost_incentive(self) -> "ProblemConfig":
        c_b = self.costs.surgery_per_priority_unit
        c_d = self.costs.waiting_per_priority_unit
        if c_d <= c_b:
            if not self.allow_nonincreasing_waiting_cost:
                raise ValueError(
                    f"等待成本 c_d={c_d} 必须大于手术成本 c_b={c_b}；"
                    "如确需如此，请设置 allow_nonincreasing_waiting_cost: true"
                )
            logger.warning("实例 %s: c_d=%s <= c_b=%s，结构化剪枝的前提不成立", self.name, c_d, c_b)
        return self

    def with_parameter(self, parameter: str, value: float) -> "ProblemConfig":
        """返回修改了一个敏感性参数的新实例 (c_d, c_o, c_e, B_j, R)"""
        costs = self.costs
        if parameter == SweepParameter.WAITING_COST.value:
            return self.model_copy(update={"costs": costs.model_copy(update={"waiting_per_priority_unit": value})})
        if parameter == SweepParameter.OVERTIME_COST.value:
            return self.model_copy(update={"costs": costs.model_copy(update={"or_overtime_per_hour": value})})
        if parameter == SweepParameter.SHORTAGE_COST.value:
            return self.model_copy(update={"costs": costs.model_copy(update={"sicu_shortage_per_bed_day": value})})
        if parameter == SweepParameter.SICU_CAPACITY.value:
            return self.model_copy(update={"sicu_capacity_bed_days": value})
        match = _OR_CAPACITY_PARAM.match(parameter)
        if match:
            j = int(match.group(1)) - 1
            if not 0 <= j < len(self.specialties):
                raise ValueError(f"专科编号越界: {parameter}")
            specialties = list(self.specialties)
            specialties[j] = specialties[j].model_copy(update={"or_capacity_hours": value})
            return self.model_copy(update={"specialties": specialties})
        raise ValueError(f"不支持的实例参数: {parameter}")


class AdpParameters(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, ser_json_inf_nan="constants")

    trace_decay: float = Field(default=DEFAULT_LAMBDA, ge=0, le=1, alias="lambda")  # λ
    beta: float = Field(default=DEFAULT_BETA, gt=0)                                  # P_0 = βI
    trajectory_depth: int = Field(default=DEFAULT_TRAJECTORY_DEPTH, ge=1)            # N
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0)                            # ε，可为 inf
    max_trajectories: int = Field(default=DEFAULT_MAX_TRAJECTORIES, ge=1)            # M_max
    resymmetrize_every: int = Field(default=DEFAULT_RESYMMETRIZE_EVERY, ge=0)        # 0 表示关闭


class SolverSpec(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    kind: SolverKind = SolverKind.MYOPIC
    adp: AdpParameters = AdpParameters()
    stop_residual: float = Field(default=DEFAULT_STOP_RESIDUAL, gt=0)
    max_sweeps: int = Field(default=DEFAULT_MAX_SWEEPS, ge=1)

    @property
    def label(self) -> str:
        return self.kind.value


class SimulationPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    horizon_weeks: int = Field(default=DEFAULT_HORIZON_WEEKS, ge=1)      # τ_max
    scenario_count: int = Field(default=DEFAULT_SCENARIO_COUNT, ge=1)
    master_seed: int = Field(default=DEFAULT_SEED, ge=0)
    policies: List[str] = Field(default_factory=list)
    initial_state: Optional[List[int]] = None


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    parameter: str
    values: List[float] = Field(min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [DEFAULT_SEED], min_length=1)
    solver: SolverSpec = SolverSpec()
    plan: SimulationPlan = SimulationPlan()

    @model_validator(mode="after")
    def _check_parameter(self) -> "SweepSpec":
        names = {p.value for p in SweepParameter} - {SweepParameter.OR_CAPACITY.value}
        if self.parameter not in names and not _OR_CAPACITY_PARAM.match(self.parameter):
            raise ValueError(f"不支持的扫描参数: {self.parameter}")
        if self.parameter in (SweepParameter.LAMBDA.value, SweepParameter.BETA.value) and not self.solver.kind.is_adp:
            raise ValueError(f"参数 {self.parameter} 仅对 ADP 求解器有效")
        return self


class WeekRecord(BaseModel):
    """一周的仿真记录"""
    week: int
    waiting_list_size: int
    action: List[int]
    scheduled: int
    c_p: float
    c_h_mean: float
    c_h_std: float
    c_mean: float
    o_mean: float
    o_std: float
    o_j_mean: List[float]
    o_j_std: List[float]
    e_mean: float
    e_std: float
    t_ms: float
    evaluated_actions: int
    full_actions: int


class MetricStat(BaseModel):
    mean: float
    std: float


class WaitingTimeStat(BaseModel):
    specialty: int     # 从 1 开始
    urgency: int
    mean: float
    std: float
    patients: int


class ThetaRecord(BaseModel):
    week: int
    trajectories: int
    converged: bool
    theta: List[float]


class SimulationReport(BaseModel):
    policy: str
    weeks: List[WeekRecord]
    waiting_times: List[WaitingTimeStat]
    metrics: Dict[str, MetricStat]
    action_ratio: float
    max_full_actions: int
    max_evaluated_actions: int
    waiting_list_sizes: List[int]
    total_cpu_seconds: float
    theta_trace: List[ThetaRecord] = Field(default_factory=list)


class RunManifest(BaseModel):
    """足以复现一次实验的全部信息"""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    tool_version: str
    library_versions: Dict[str, str]
    instance: ProblemConfig
    solvers: List[SolverSpec]
    plan: SimulationPlan
    outputs: List[str] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)

"""
多周蒙特卡洛仿真

按周执行策略，患者相关成本精确计算，手术时长与 SICU 住院天数按对数正态分布
在大量场景中抽样得到医院相关成本。同一计划下所有策略共享到达序列。
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config.models import MetricStat, SimulationPlan, SimulationReport, ThetaRecord, WaitingTimeStat, WeekRecord
from core.errors import ModelDomainError, SimulationError, StateSpaceError
from core.mdp_model import AdmissionMDP
from core.policies import Policy
from core.random_streams import StreamManager

logger = logging.getLogger(__name__)


@dataclass
class HospitalCostStats:
    mean: float
    std: float
    overtime_mean: np.ndarray   # 各专科 o_j
    overtime_std: np.ndarray
    total_overtime_mean: float  # o = Σ_j o_j
    total_overtime_std: float
    shortage_mean: float        # e
    shortage_std: float


def lognormal_params(mean: float, std: float) -> Tuple[float, float]:
    """矩匹配: 返回底层正态分布的 (μ, σ)"""
    if mean <= 0:
        raise ModelDomainError(f"对数正态分布均值必须为正: {mean}")
    if std < 0:
        raise ModelDomainError(f"对数正态分布标准差不能为负: {std}")
    variance = math.log1p((std / mean) ** 2)
    mu = math.log(mean) - 0.5 * variance
    return mu, math.sqrt(variance)


def sample_arrivals(mdp: AdmissionMDP, rng: np.random.Generator) -> np.ndarray:
    return mdp.draw_arrivals(rng)


def _scenario_totals(rng: np.random.Generator, mean: float, std: float, count: int, scenarios: int) -> np.ndarray:
    """每个场景中 count 名患者抽样值之和"""
    if count == 0:
        return np.zeros(scenarios)
    mu, sigma = lognormal_params(mean, std)
    if sigma == 0:
        return np.full(scenarios, mean * count)
    return rng.lognormal(mu, sigma, size=(scenarios, count)).sum(axis=1)


def realized_hospital_cost(mdp: AdmissionMDP, action, scenarios: int,
                           duration_rng: np.random.Generator,
                           los_rng: Optional[np.random.Generator] = None) -> HospitalCostStats:
    """按场景抽样医院相关成本；各专科使用各自的子流"""
    if scenarios < 1:
        raise ModelDomainError(f"场景数必须 >= 1: {scenarios}")
    los_rng = duration_rng if los_rng is None else los_rng
    config = mdp.config
    counts = np.asarray(action) @ mdp.specialty_onehot
    duration_streams = duration_rng.spawn(mdp.n_specialties)
    los_streams = los_rng.spawn(mdp.n_specialties)

    overtime = np.zeros((scenarios, mdp.n_specialties))
    los_total = np.zeros(scenarios)
    for j, spec in enumerate(config.specialties):
        scheduled = int(round(counts[j]))
        durations = _scenario_totals(duration_streams[j], spec.duration_mean_hours, spec.duration_std_hours,
                                     scheduled, scenarios)
        overtime[:, j] = np.maximum(durations - mdp.effective_or_capacity[j], 0.0)
        los_total += _scenario_totals(los_streams[j], spec.los_mean_days, spec.los_std_days, scheduled, scenarios)
    shortage = np.maximum(los_total - mdp.effective_sicu_capacity, 0.0)
    total_overtime = overtime.sum(axis=1)
    cost = mdp.c_o * total_overtime + mdp.c_e * shortage
    return HospitalCostStats(
        mean=float(cost.mean()), std=float(cost.std()),
        overtime_mean=overtime.mean(axis=0), overtime_std=overtime.std(axis=0),
        total_overtime_mean=float(total_overtime.mean()), total_overtime_std=float(total_overtime.std()),
        shortage_mean=float(shortage.mean()), shortage_std=float(shortage.std()),
    )


def _plain(values: List[float]) -> MetricStat:
    array = np.asarray(values, dtype=float)
    return MetricStat(mean=float(array.mean()), std=float(array.std()))


def _pooled(means: List[float], stds: List[float]) -> MetricStat:
    """把各周场景样本合并后的均值和标准差"""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    mean = means.mean()
    variance = np.mean(stds ** 2 + means ** 2) - mean ** 2
    return MetricStat(mean=float(mean), std=float(math.sqrt(max(variance, 0.0))))


def initial_state(mdp: AdmissionMDP, plan: SimulationPlan, streams: StreamManager) -> np.ndarray:
    if plan.initial_state is not None:
        return mdp.as_vector(plan.initial_state, "初始状态")
    return mdp.lift_arrivals(mdp.draw_arrivals(streams.arrivals(0)))


def run_simulation(mdp: AdmissionMDP, policy: Policy, plan: SimulationPlan,
                   progress: Optional[Callable[[int], None]] = None) -> SimulationReport:
    streams = StreamManager(plan.master_seed)
    state = initial_state(mdp, plan, streams)
    try:
        policy.check_state(state)
    except (StateSpaceError, ModelDomainError) as e:
        raise SimulationError(0, f"初始状态 {state.tolist()} 超出策略 {policy.label} 的定义域: {e}") from e
    weeks: List[WeekRecord] = []
    theta_trace: List[ThetaRecord] = []
    waits = np.zeros((len(mdp.groups), max(g.max_wait for g in mdp.groups) + 1), dtype=np.int64)
    sizes: List[int] = []

    for week in range(1, plan.horizon_weeks + 1):
        started = time.perf_counter()
        try:
            decision = policy.decide(state, week)
        except (StateSpaceError, ModelDomainError) as e:
            raise SimulationError(week, f"策略 {policy.label} 无法对状态 {state.tolist()} 决策: {e}") from e
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        action = np.asarray(decision.action)
        try:
            feasible = mdp.is_feasible(state, action)
        except ModelDomainError as e:
            raise SimulationError(week, f"策略 {policy.label} 给出非法动作: {e}") from e
        if not feasible:
            raise SimulationError(week, f"策略 {policy.label} 的动作 {action.tolist()} 对状态 {state.tolist()} 不可行")

        np.add.at(waits, (mdp.group_of, mdp.waits), action)
        patient = float(mdp.patient_costs(state, action)[0])
        hospital = realized_hospital_cost(mdp, action, plan.scenario_count,
                                          streams.durations(week), streams.los(week))
        sizes.append(int(state.sum()))
        weeks.append(WeekRecord(
            week=week,
            waiting_list_size=int(state.sum()),
            action=action.tolist(),
            scheduled=int(action.sum()),
            c_p=patient,
            c_h_mean=hospital.mean,
            c_h_std=hospital.std,
            c_mean=patient + hospital.mean,
            o_mean=hospital.total_overtime_mean,
            o_std=hospital.total_overtime_std,
            o_j_mean=hospital.overtime_mean.tolist(),
            o_j_std=hospital.overtime_std.tolist(),
            e_mean=hospital.shortage_mean,
            e_std=hospital.shortage_std,
            t_ms=elapsed_ms,
            evaluated_actions=decision.evaluated_actions,
            full_actions=decision.full_actions,
        ))
        if decision.theta is not None:
            theta_trace.append(ThetaRecord(week=week, trajectories=decision.trajectories,
                                           converged=decision.converged, theta=decision.theta.tolist()))

        arrivals = mdp.draw_arrivals(streams.arrivals(week))
        state = mdp.post_action_state(state, action) + mdp.lift_arrivals(arrivals)
        if progress:
            progress(week)

    return _build_report(mdp, policy.label, weeks, waits, sizes, theta_trace)


def waiting_time_stats(mdp: AdmissionMDP, waits: np.ndarray) -> List[WaitingTimeStat]:
    """每名被安排的患者计一次观测"""
    stats = []
    for g, group in enumerate(mdp.groups):
        histogram = waits[g]
        patients = int(histogram.sum())
        if patients == 0:
            stats.append(WaitingTimeStat(specialty=group.j + 1, urgency=group.u, mean=0.0, std=0.0, patients=0))
            continue
        support = np.arange(len(histogram))
        mean = float(support @ histogram / patients)
        std = float(math.sqrt(((support - mean) ** 2) @ histogram / patients))
        stats.append(WaitingTimeStat(specialty=group.j + 1, urgency=group.u, mean=mean, std=std, patients=patients))
    return stats


def _build_report(mdp: AdmissionMDP, label: str, weeks: List[WeekRecord], waits: np.ndarray,
                  sizes: List[int], theta_trace: List[ThetaRecord]) -> SimulationReport:
    metrics: Dict[str, MetricStat] = {
        "c": _pooled([w.c_mean for w in weeks], [w.c_h_std for w in weeks]),
        "c_p": _plain([w.c_p for w in weeks]),
        "c_h": _pooled([w.c_h_mean for w in weeks], [w.c_h_std for w in weeks]),
        "o": _pooled([w.o_mean for w in weeks], [w.o_std for w in weeks]),
        "e": _pooled([w.e_mean for w in weeks], [w.e_std for w in weeks]),
        "waiting_list_size": _plain(sizes),
        "scheduled": _plain([w.scheduled for w in weeks]),
        "t_ms": _plain([w.t_ms for w in weeks]),
    }
    for j in range(mdp.n_specialties):
        metrics[f"o_{j + 1}"] = _pooled([w.o_j_mean[j] for w in weeks], [w.o_j_std[j] for w in weeks])
    total_seconds = sum(w.t_ms for w in weeks) / 1000.0
    metrics["T_s"] = MetricStat(mean=total_seconds, std=0.0)

    evaluated = sum(w.evaluated_actions for w in weeks)
    full = sum(w.full_actions for w in weeks)
    return SimulationReport(
        policy=label,
        weeks=weeks,
        waiting_times=waiting_time_stats(mdp, waits),
        metrics=metrics,
        action_ratio=evaluated / full if full else 1.0,
        max_full_actions=max(w.full_actions for w in weeks),
        max_evaluated_actions=max(w.evaluated_actions for w in weeks),
        waiting_list_sizes=sizes,
        total_cpu_seconds=total_seconds,
        theta_trace=theta_trace,
    )

"""
入院控制 MDP 模型

定义患者类型的规范排列、状态/动作的合法性、状态转移、
截断泊松到达分布、优先级分数以及单周成本函数。
状态和动作都用一维整数向量表示，顺序为 专科 → 紧急系数(升序) → 等待周数(升序)。
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.stats import poisson

from config.models import ProblemConfig
from core.errors import ModelDomainError


@dataclass(frozen=True)
class PatientType:
    j: int  # 专科下标，从 0 开始
    u: int  # 紧急系数
    w: int  # 已等待周数，1..W_ju


@dataclass(frozen=True)
class ArrivalGroup:
    j: int
    u: int
    max_wait: int
    rate: float
    cap: int
    first_row: int  # w=1 行在状态向量中的位置


class StageCost(NamedTuple):
    total: float
    patient: float   # C_p
    hospital: float  # C_h


def support_cap(rate: float, threshold: float) -> int:
    """原始泊松 pmf(k) >= threshold 的最大 k；不存在时返回 0"""
    if rate < 0:
        raise ModelDomainError(f"到达率不能为负: {rate}")
    if not 0 < threshold < 1:
        raise ModelDomainError(f"截断阈值必须位于 (0,1): {threshold}")
    k = int(math.floor(rate))
    if poisson.pmf(k, rate) < threshold:
        return 0
    while poisson.pmf(k + 1, rate) >= threshold:
        k += 1
    return k


def truncated_poisson_vector(rate: float, cap: int) -> np.ndarray:
    """{0..cap} 上重新归一化的泊松 pmf"""
    if rate < 0:
        raise ModelDomainError(f"到达率不能为负: {rate}")
    if rate == 0:
        pmf = np.zeros(cap + 1)
        pmf[0] = 1.0
        return pmf
    pmf = poisson.pmf(np.arange(cap + 1), rate)
    return pmf / pmf.sum()


def truncated_poisson_pmf(rate: float, k: int, cap: int) -> float:
    if rate < 0:
        raise ModelDomainError(f"到达率不能为负: {rate}")
    if k < 0 or k > cap:
        return 0.0
    return float(truncated_poisson_vector(rate, cap)[k])


class AdmissionMDP:
    """一个问题实例上的 MDP：布局、预计算量以及全部纯函数运算"""

    def __init__(self, config: ProblemConfig):
        self.config = config
        costs = config.costs
        self.c_b = costs.surgery_per_priority_unit
        self.c_d = costs.waiting_per_priority_unit
        self.c_o = costs.or_overtime_per_hour
        self.c_e = costs.sicu_shortage_per_bed_day
        self.gamma = config.discount

        types: List[PatientType] = []
        groups: List[ArrivalGroup] = []
        for j, spec in enumerate(config.specialties):
            for group in spec.urgency_groups:
                cap = group.arrival_cap
                if cap is None:
                    cap = support_cap(group.arrival_rate_per_week, config.poisson_truncation_threshold)
                groups.append(ArrivalGroup(
                    j=j, u=group.urgency, max_wait=group.max_wait_weeks,
                    rate=group.arrival_rate_per_week, cap=cap, first_row=len(types),
                ))
                types.extend(PatientType(j, group.urgency, w) for w in range(1, group.max_wait_weeks + 1))

        self.types: Tuple[PatientType, ...] = tuple(types)
        self.groups: Tuple[ArrivalGroup, ...] = tuple(groups)
        self.size = len(types)  # Ξ
        self.n_specialties = len(config.specialties)
        self._index = {(t.j, t.u, t.w): i for i, t in enumerate(types)}

        specialties = config.specialties
        self.specialty_of = np.array([t.j for t in types], dtype=np.int64)
        self.waits = np.array([t.w for t in types], dtype=np.int64)
        self.group_of = np.repeat(np.arange(len(groups)), [g.max_wait for g in groups])
        self.due_mask = np.array(
            [t.w == groups[g].max_wait for t, g in zip(types, self.group_of)], dtype=bool)
        self.first_rows = np.array([g.first_row for g in groups], dtype=np.int64)
        self.caps = np.array([g.cap for g in groups], dtype=np.int64)
        self.rates = np.array([g.rate for g in groups], dtype=float)
        self.priorities = np.array(
            [specialties[t.j].importance * t.u * t.w for t in types], dtype=float)

        # 每类患者对应专科的期望手术时长 / SICU 住院天数
        self.duration_means = np.array([s.duration_mean_hours for s in specialties], dtype=float)
        self.los_means = np.array([s.los_mean_days for s in specialties], dtype=float)
        self.los_per_type = self.los_means[self.specialty_of]
        self.or_capacity = np.array([s.or_capacity_hours for s in specialties], dtype=float)
        self.effective_or_capacity = config.or_availability_rate * self.or_capacity
        self.effective_sicu_capacity = config.sicu_availability_rate * config.sicu_capacity_bed_days
        self.specialty_onehot = np.zeros((self.size, self.n_specialties))
        self.specialty_onehot[np.arange(self.size), self.specialty_of] = 1.0

        # 推迟成本的减少量超过医院成本的最大增量时必须全部安排
        max_hospital_increase = self.c_o * self.duration_means + self.c_e * self.los_means
        self.cost_forced_mask = (self.c_d - self.c_b) * self.priorities > max_hospital_increase[self.specialty_of]
        self.forced_mask = self.cost_forced_mask | self.due_mask

        # 老化: 第 w 行 (w<W) 移到 w+1 行
        self.age_source = np.flatnonzero(~self.due_mask)
        self.age_target = self.age_source + 1

        self.arrival_pmfs = [truncated_poisson_vector(g.rate, g.cap) for g in groups]
        self._arrival_cdfs = []
        for pmf in self.arrival_pmfs:
            cdf = np.cumsum(pmf)
            cdf[-1] = 1.0
            self._arrival_cdfs.append(cdf)

    # ------------------------------------------------------------------
    # 基本量

    def index_of(self, j: int, u: int, w: int) -> int:
        try:
            return self._index[(j, u, w)]
        except KeyError:
            raise ModelDomainError(f"非法的患者类型 (j={j}, u={u}, w={w})") from None

    def priority_score(self, j: int, u: int, w: int) -> float:
        """动态优先级分数 v_j·u·w"""
        return float(self.priorities[self.index_of(j, u, w)])

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.size, dtype=np.int64)

    def state_space_size(self) -> int:
        """Π (cap_ju+1)^W_ju，精确大整数"""
        return math.prod((g.cap + 1) ** g.max_wait for g in self.groups)

    def as_vector(self, values, what: str = "状态") -> np.ndarray:
        vector = np.asarray(values)
        if vector.shape != (self.size,):
            raise ModelDomainError(f"{what}维度应为 ({self.size},)，实际为 {vector.shape}")
        if np.any(vector < 0):
            raise ModelDomainError(f"{what}含有负数: {vector.tolist()}")
        return vector.astype(np.int64, copy=False)

    # ------------------------------------------------------------------
    # 可行性与转移

    def is_feasible(self, state, action) -> bool:
        state = self.as_vector(state)
        action = np.asarray(action)
        if action.shape != state.shape:
            raise ModelDomainError(f"动作维度 {action.shape} 与状态维度 {state.shape} 不一致")
        if np.any(action < 0) or np.any(action > state):
            return False
        return bool(np.all(action[self.due_mask] == state[self.due_mask]))

    def _require_feasible(self, state, action) -> Tuple[np.ndarray, np.ndarray]:
        if not self.is_feasible(state, action):
            raise ModelDomainError(f"动作 {np.asarray(action).tolist()} 对状态 {np.asarray(state).tolist()} 不可行")
        return self.as_vector(state), self.as_vector(action, "动作")

    def post_action_state(self, state, action) -> np.ndarray:
        """决策后、新到达前的状态 G"""
        state, action = self._require_feasible(state, action)
        return self._post_action_unchecked(state, action)

    def _post_action_unchecked(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        post = np.zeros_like(state)
        post[self.age_target] = (state - action)[self.age_source]
        return post

    def post_action_states(self, state: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """一组动作 (K×Ξ) 的决策后状态，调用方保证可行"""
        post = np.zeros_like(actions)
        post[:, self.age_target] = (state[None, :] - actions)[:, self.age_source]
        return post

    def lift_arrivals(self, arrivals) -> np.ndarray:
        """把 (j,u) 到达数放到 w=1 行，得到 Ψ"""
        arrivals = np.asarray(arrivals)
        if arrivals.shape[-1] != len(self.groups):
            raise ModelDomainError(f"到达向量长度应为 {len(self.groups)}，实际为 {arrivals.shape[-1]}")
        lifted = np.zeros(arrivals.shape[:-1] + (self.size,), dtype=arrivals.dtype)
        lifted[..., self.first_rows] = arrivals
        return lifted

    def expected_arrival_state(self) -> np.ndarray:
        """Ψ̄: 期望到达数放在 w=1 行的实值向量"""
        return self.lift_arrivals(self.rates)

    def successor(self, state, action, arrivals) -> np.ndarray:
        return self.post_action_state(state, action) + self.lift_arrivals(np.asarray(arrivals, dtype=np.int64))

    def arrival_probability(self, arrivals: np.ndarray) -> float:
        probability = 1.0
        for g, (group, k) in enumerate(zip(self.groups, arrivals)):
            if self.config.truncate_arrivals:
                if k > group.cap:
                    return 0.0
                probability *= self.arrival_pmfs[g][k]
            else:
                probability *= poisson.pmf(k, group.rate)
        return float(probability)

    def transition_probability(self, state, action, next_state) -> float:
        post = self.post_action_state(state, action)
        next_state = self.as_vector(next_state, "后继状态")
        carried = np.ones(self.size, dtype=bool)
        carried[self.first_rows] = False
        if np.any(next_state[carried] != post[carried]):
            return 0.0
        return self.arrival_probability(next_state[self.first_rows])

    def arrival_outcomes(self) -> Tuple[np.ndarray, np.ndarray]:
        """截断支撑的笛卡尔积: (O×G 的到达矩阵, O 个概率)"""
        shape = tuple(int(c) + 1 for c in self.caps)
        outcomes = np.indices(shape).reshape(len(shape), -1).T.astype(np.int64)
        probabilities = np.ones(len(outcomes))
        for g, pmf in enumerate(self.arrival_pmfs):
            probabilities *= pmf[outcomes[:, g]]
        return outcomes, probabilities

    def draw_arrivals(self, rng: np.random.Generator, count: Optional[int] = None) -> np.ndarray:
        """抽取到达数；截断时按重新归一化的 pmf 逆变换抽样"""
        shape = (len(self.groups),) if count is None else (count, len(self.groups))
        if not self.config.truncate_arrivals:
            return rng.poisson(self.rates, size=shape).astype(np.int64)
        uniforms = rng.random(shape)
        draws = np.empty(shape, dtype=np.int64)
        for g, cdf in enumerate(self._arrival_cdfs):
            draws[..., g] = np.searchsorted(cdf, uniforms[..., g], side="right")
        return draws

    # ------------------------------------------------------------------
    # 成本

    def hospital_costs(self, actions: np.ndarray) -> np.ndarray:
        """C_h: 只依赖各专科安排人数"""
        actions = np.atleast_2d(actions)
        per_specialty = actions @ self.specialty_onehot
        overtime = np.maximum(per_specialty * self.duration_means - self.effective_or_capacity, 0.0)
        shortage = np.maximum(actions @ self.los_per_type - self.effective_sicu_capacity, 0.0)
        return self.c_o * overtime.sum(axis=1) + self.c_e * shortage

    def patient_costs(self, state: np.ndarray, actions: np.ndarray) -> np.ndarray:
        actions = np.atleast_2d(actions)
        scheduled = actions @ self.priorities
        waiting = (state[None, :] - actions) @ self.priorities
        return self.c_b * scheduled + self.c_d * waiting

    def stage_costs(self, state: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """一组可行动作的总成本，调用方保证可行"""
        return self.patient_costs(state, actions) + self.hospital_costs(actions)

    def stage_cost(self, state, action) -> StageCost:
        state, action = self._require_feasible(state, action)
        patient = float(self.patient_costs(state, action)[0])
        hospital = float(self.hospital_costs(action)[0])
        return StageCost(patient + hospital, patient, hospital)

    def describe_type(self, index: int) -> str:
        t = self.types[index]
        return f"j={t.j + 1},u={t.u},w={t.w}"


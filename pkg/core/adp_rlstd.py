"""
基于 RLS-TD(λ) 的近似动态规划求解器

值函数用线性形式 V̂(s) = Φ(s)ᵀΘ 近似，特征即各类型患者人数。
每周决策前从当前状态出发模拟若干条轨迹，用递推最小二乘 TD 更新 Θ，
再用期望到达 Ψ̄ 选出本周动作。z、P、Θ 跨周保留。
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np

from config.constants import (
    ActionSource, SINGULAR_UPDATE_FLOOR, RELATIVE_CHANGE_GUARD, LEARNER_CHECKPOINT_VERSION,
)
from config.models import AdpParameters
from core.action_space import ActionSpace
from core.errors import ModelDomainError, SingularUpdateError
from core.mdp_model import AdmissionMDP

logger = logging.getLogger(__name__)


@dataclass
class LearnerState:
    """Θ、资格迹 z、方差矩阵 P 以及超参数；单写者，按周串行更新"""
    theta: np.ndarray
    trace: np.ndarray
    variance: np.ndarray
    params: AdpParameters
    gamma: float
    steps: int = 0
    trajectories: int = 0
    singular_resets: int = 0
    week: int = 0  # 下一次决策的周序号，续跑时用于恢复随机子流

    @classmethod
    def initial(cls, size: int, params: AdpParameters, gamma: float) -> "LearnerState":
        return cls(
            theta=np.zeros(size),
            trace=np.zeros(size),
            variance=params.beta * np.eye(size),
            params=params,
            gamma=gamma,
        )

    @property
    def size(self) -> int:
        return len(self.theta)

    def reset(self):
        self.theta = np.zeros(self.size)
        self.trace = np.zeros(self.size)
        self.variance = self.params.beta * np.eye(self.size)
        self.steps = 0

    def reset_variance(self):
        self.variance = self.params.beta * np.eye(self.size)


class SimStep(NamedTuple):
    action: np.ndarray
    arrivals: np.ndarray
    cost: float
    successor: np.ndarray


class AdpDecision(NamedTuple):
    action: np.ndarray
    trajectories: int
    converged: bool
    singular_resets: int
    evaluated_actions: int


def feature_vector(mdp: AdmissionMDP, state) -> np.ndarray:
    """φ_ξ(s) = n_juw；允许实值分量 (决策后状态 + Ψ̄)"""
    features = np.asarray(state, dtype=float)
    if features.shape != (mdp.size,):
        raise ModelDomainError(f"特征维度应为 ({mdp.size},)，实际为 {features.shape}")
    return features


def approx_value(features, theta) -> float:
    features = np.asarray(features, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if features.shape != theta.shape:
        raise ModelDomainError(f"特征维度 {features.shape} 与参数维度 {theta.shape} 不一致")
    return float(features @ theta)


def select_sim_action(mdp: AdmissionMDP, action_space: ActionSpace, state, theta: np.ndarray,
                      rng: np.random.Generator, source: ActionSource = ActionSource.REDUCED) -> SimStep:
    """
    对每个候选动作独立抽一次到达 Ψ^a，按 C(s,a) + γΦᵀ(G + Ψ^a)Θ 取最小，
    返回所选动作及其自身的到达样本。动作集分块扫描，到达按动作的规范序依次抽取。
    """
    state = mdp.as_vector(state)
    best: Optional[SimStep] = None
    best_score = math.inf
    for actions in action_space.action_blocks(state, source):
        arrivals = mdp.draw_arrivals(rng, len(actions))
        successors = mdp.post_action_states(state, actions) + mdp.lift_arrivals(arrivals)
        costs = mdp.stage_costs(state, actions)
        scores = costs + mdp.gamma * (successors @ theta)
        k = int(np.argmin(scores))
        if best is None or scores[k] < best_score:
            best_score = float(scores[k])
            best = SimStep(actions[k].copy(), arrivals[k].copy(), float(costs[k]), successors[k].copy())
    return best


def rls_step(learner: LearnerState, features: np.ndarray, next_features: np.ndarray, cost: float,
             trajectory_index: Optional[int] = None) -> LearnerState:
    """一次 RLS-TD(λ) 递推，原地更新并返回 learner"""
    params = learner.params
    gamma = learner.gamma
    difference = features - gamma * next_features
    error = cost - difference @ learner.theta
    trace = gamma * params.trace_decay * learner.trace + features
    weighted = learner.variance @ trace
    denominator = 1.0 + difference @ weighted
    if abs(denominator) < SINGULAR_UPDATE_FLOOR:
        raise SingularUpdateError(denominator, trajectory_index)

    learner.variance = learner.variance - np.outer(weighted, difference @ learner.variance) / denominator
    learner.theta = learner.theta + weighted * (error / denominator)
    learner.trace = trace
    learner.steps += 1
    if params.resymmetrize_every and learner.steps % params.resymmetrize_every == 0:
        learner.variance = 0.5 * (learner.variance + learner.variance.T)
    return learner


def run_trajectory(mdp: AdmissionMDP, action_space: ActionSpace, learner: LearnerState, start,
                   rng: np.random.Generator, source: ActionSource = ActionSource.REDUCED,
                   trajectory_index: Optional[int] = None) -> LearnerState:
    """每一步使用从 rng 派生的独立子流，某一步的动作集规模不会改变其他步的抽样"""
    state = mdp.as_vector(start)
    for step_rng in rng.spawn(learner.params.trajectory_depth):
        step = select_sim_action(mdp, action_space, state, learner.theta, step_rng, source)
        rls_step(learner, state.astype(float), step.successor.astype(float), step.cost, trajectory_index)
        state = step.successor
    learner.trajectories += 1
    return learner


def relative_change(before: np.ndarray, after: np.ndarray) -> float:
    """‖(Θ_n − Θ_0) / max(|Θ_0|, δ)‖₂"""
    return float(np.linalg.norm((after - before) / np.maximum(np.abs(before), RELATIVE_CHANGE_GUARD)))


def greedy_action(mdp: AdmissionMDP, action_space: ActionSpace, state, theta: np.ndarray,
                  source: ActionSource = ActionSource.REDUCED) -> Tuple[np.ndarray, int]:
    """argmin C(s,a) + γΦᵀ(G_a^s + Ψ̄)Θ，同时返回评估的动作数"""
    state = mdp.as_vector(state)
    expected_arrivals = mdp.expected_arrival_state()

    def score(actions: np.ndarray) -> np.ndarray:
        expected = mdp.post_action_states(state, actions) + expected_arrivals
        return mdp.stage_costs(state, actions) + mdp.gamma * (expected @ theta)

    action, _, evaluated = action_space.best_action(state, source, score)
    return action, evaluated


def adp_decide(mdp: AdmissionMDP, action_space: ActionSpace, learner: LearnerState, state,
               rng: np.random.Generator, source: ActionSource = ActionSource.REDUCED) -> AdpDecision:
    """从 s_τ 反复模拟轨迹直到 Θ 的相对变化低于 ε 或达到 M_max，再给出本周动作"""
    state = mdp.as_vector(state)
    params = learner.params
    converged = False
    resets = 0
    used = 0
    for index in range(1, params.max_trajectories + 1):
        used = index
        before = learner.theta.copy()
        try:
            run_trajectory(mdp, action_space, learner, state, rng.spawn(1)[0], source, trajectory_index=index)
        except SingularUpdateError as e:
            logger.warning("第 %d 周 %s，重置 P = βI", learner.week, e)
            learner.reset_variance()
            learner.singular_resets += 1
            resets += 1
            continue
        if relative_change(before, learner.theta) < params.epsilon:
            converged = True
            break
    if not converged:
        logger.debug("第 %d 周在 %d 条轨迹内未收敛", learner.week, params.max_trajectories)

    action, actions_evaluated = greedy_action(mdp, action_space, state, learner.theta, source)
    learner.week += 1
    return AdpDecision(action, used, converged, resets, actions_evaluated)


# ----------------------------------------------------------------------
# 检查点

def save_learner(path: Path, learner: LearnerState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format_version": LEARNER_CHECKPOINT_VERSION,
        "params": learner.params.model_dump(mode="json", by_alias=True),
        "gamma": learner.gamma,
        "steps": learner.steps,
        "trajectories": learner.trajectories,
        "singular_resets": learner.singular_resets,
        "week": learner.week,
    }
    with open(path, "wb") as handle:
        np.savez(handle, header=np.array(json.dumps(header)),
                 theta=learner.theta, trace=learner.trace, variance=learner.variance)
    return path


def load_learner(path: Path, size: Optional[int] = None) -> LearnerState:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        theta, trace, variance = data["theta"], data["trace"], data["variance"]
    if header.get("format_version") != LEARNER_CHECKPOINT_VERSION:
        raise ModelDomainError(f"学习器检查点版本不匹配: {header.get('format_version')}")
    if size is not None and len(theta) != size:
        raise ModelDomainError(f"检查点维度 {len(theta)} 与实例 Ξ={size} 不一致")
    return LearnerState(
        theta=theta, trace=trace, variance=variance,
        params=AdpParameters.model_validate(header["params"]),
        gamma=header["gamma"], steps=header["steps"], trajectories=header["trajectories"],
        singular_resets=header["singular_resets"], week=header["week"],
    )

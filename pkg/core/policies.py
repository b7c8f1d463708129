"""
仿真中可用的决策策略

所有策略都实现 decide(state, week)，返回本周动作以及用于统计的动作集规模。
"""

import logging
from typing import NamedTuple, Optional

import numpy as np

from config.constants import ActionSource, SolverKind
from config.models import SolverSpec
from core.action_space import ActionSpace
from core.adp_rlstd import LearnerState, adp_decide
from core.errors import ModelDomainError
from core.exact_solvers import PolicyTable, myopic_action
from core.mdp_model import AdmissionMDP
from core.random_streams import StreamManager

logger = logging.getLogger(__name__)


class PolicyDecision(NamedTuple):
    action: np.ndarray
    evaluated_actions: int
    full_actions: int
    trajectories: int = 0
    converged: bool = True
    theta: Optional[np.ndarray] = None


class Policy:
    """策略基类"""

    def __init__(self, label: str, action_space: ActionSpace, source: ActionSource):
        self.label = label
        self.action_space = action_space
        self.source = source

    def evaluated_count(self, state) -> int:
        if self.source is ActionSource.REDUCED:
            return self.action_space.reduced_action_count(state)
        return self.action_space.full_action_count(state)

    def check_state(self, state: np.ndarray):
        """状态不在策略定义域内时抛出异常；默认所有状态均可决策"""

    def decide(self, state: np.ndarray, week: int) -> PolicyDecision:
        raise NotImplementedError


class MyopicPolicy(Policy):
    """只最小化本周成本"""

    def __init__(self, action_space: ActionSpace, label: str = SolverKind.MYOPIC.value):
        super().__init__(label, action_space, ActionSource.REDUCED)

    def decide(self, state: np.ndarray, week: int) -> PolicyDecision:
        action = myopic_action(self.action_space, state)
        return PolicyDecision(action, self.evaluated_count(state), self.action_space.full_action_count(state))


class TablePolicy(Policy):
    """查表执行值迭代得到的策略"""

    def __init__(self, table: PolicyTable, action_space: ActionSpace, source: ActionSource, label: str):
        super().__init__(label, action_space, source)
        self.table = table

    def check_state(self, state: np.ndarray):
        self.table.space.encode(state)

    def decide(self, state: np.ndarray, week: int) -> PolicyDecision:
        action = self.table.action(state)
        return PolicyDecision(action, self.evaluated_count(state), self.action_space.full_action_count(state))


class AdpPolicy(Policy):
    """每周在线运行 RLS-TD(λ) 后决策；学习器状态跨周保留"""

    def __init__(self, mdp: AdmissionMDP, action_space: ActionSpace, learner: LearnerState,
                 streams: StreamManager, source: ActionSource, label: str):
        super().__init__(label, action_space, source)
        self.mdp = mdp
        self.learner = learner
        self.streams = streams

    def decide(self, state: np.ndarray, week: int) -> PolicyDecision:
        self.learner.week = week
        decision = adp_decide(self.mdp, self.action_space, self.learner, state,
                              self.streams.adp(week), self.source)
        return PolicyDecision(
            action=decision.action,
            evaluated_actions=decision.evaluated_actions,
            full_actions=self.action_space.full_action_count(state),
            trajectories=decision.trajectories,
            converged=decision.converged,
            theta=self.learner.theta.copy(),
        )


def build_policy(solver: SolverSpec, mdp: AdmissionMDP, action_space: ActionSpace,
                 streams: StreamManager, table: Optional[PolicyTable] = None,
                 learner: Optional[LearnerState] = None) -> Policy:
    kind = solver.kind
    source = ActionSource.REDUCED if kind.uses_reduced_actions else ActionSource.FULL
    if kind is SolverKind.MYOPIC:
        return MyopicPolicy(action_space)
    if kind.is_exact:
        if table is None:
            raise ModelDomainError(f"{kind.value} 策略需要先求解值表")
        return TablePolicy(table, action_space, source, solver.label)
    if learner is None:
        learner = LearnerState.initial(mdp.size, solver.adp, mdp.gamma)
    elif learner.size != mdp.size:
        raise ModelDomainError(f"学习器维度 {learner.size} 与实例 Ξ={mdp.size} 不一致")
    else:
        logger.info("%s 从已有学习器状态继续 (已完成 %d 条轨迹)", solver.label, learner.trajectories)
    return AdpPolicy(mdp, action_space, learner, streams, source, solver.label)

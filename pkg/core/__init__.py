"""
核心模块

包含 MDP 模型、动作空间、精确求解器、RLS-TD(λ) 近似求解器和仿真器。
"""

from .errors import (
    AdmissionError, ModelDomainError, GuardRefusalError, SingularUpdateError,
    SimulationError, StateSpaceError,
)
from .mdp_model import AdmissionMDP, PatientType
from .action_space import ActionSpace, ActionSetStats

__all__ = [
    # 异常
    'AdmissionError', 'ModelDomainError', 'GuardRefusalError', 'SingularUpdateError',
    'SimulationError', 'StateSpaceError',

    # 模型
    'AdmissionMDP', 'PatientType', 'ActionSpace', 'ActionSetStats',
]

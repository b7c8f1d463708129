#!/usr/bin/env python3
"""
测试脚本 - 蒙特卡洛仿真: 对数正态参数、医院成本抽样、共享到达序列与可复现性
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.constants import ActionSource
from config.instances import InstanceLibrary
from config.models import AdpParameters, ProblemConfig, SimulationPlan
from core.action_space import ActionSpace
from core.adp_rlstd import LearnerState
from core.errors import ModelDomainError, SimulationError
from core.exact_solvers import PolicyTable, StateSpace
from core.mdp_model import AdmissionMDP
from core.policies import AdpPolicy, MyopicPolicy, Policy, PolicyDecision, TablePolicy
from core.random_streams import StreamManager
from core.simulator import lognormal_params, realized_hospital_cost, run_simulation, sample_arrivals


def _model(**update):
    config = InstanceLibrary.get("small-2spec")
    if update:
        config = config.model_copy(update=update)
    mdp = AdmissionMDP(config)
    return mdp, ActionSpace(mdp)


def _without_arrivals():
    config = InstanceLibrary.get("small-2spec")
    specialties = [
        spec.model_copy(update={"urgency_groups": [
            g.model_copy(update={"arrival_rate_per_week": 0.0}) for g in spec.urgency_groups]})
        for spec in config.specialties
    ]
    return _model(specialties=specialties)


def _deterministic_durations():
    config = InstanceLibrary.get("small-2spec")
    specialties = [spec.model_copy(update={"duration_std_hours": 0.0, "los_std_days": 0.0})
                   for spec in config.specialties]
    return _model(specialties=specialties)


class RecordingPolicy(MyopicPolicy):
    """记录每周看到的状态"""

    def __init__(self, action_space, label):
        super().__init__(action_space, label)
        self.states = []

    def decide(self, state, week):
        self.states.append(state.copy())
        return super().decide(state, week)


class IdlePolicy(Policy):
    """只安排到期患者"""

    def __init__(self, action_space, label="idle"):
        super().__init__(label, action_space, ActionSource.REDUCED)
        self.states = []

    def decide(self, state, week):
        self.states.append(state.copy())
        action = np.where(self.action_space.mdp.due_mask, state, 0)
        return PolicyDecision(action, 1, self.action_space.full_action_count(state))


class BrokenPolicy(Policy):
    def decide(self, state, week):
        if week < 3:
            return PolicyDecision(np.where(self.action_space.mdp.due_mask, state, 0), 1, 1)
        return PolicyDecision(state + 1, 1, 1)


def _plan(**update) -> SimulationPlan:
    values = {"horizon_weeks": 20, "scenario_count": 200, "master_seed": 5}
    values.update(update)
    return SimulationPlan(**values)


# ----------------------------------------------------------------------
# 抽样

def test_lognormal_params():
    mu, sigma = lognormal_params(2.0, 2.0)
    assert mu == pytest.approx(math.log(4 / math.sqrt(8)))
    assert mu == pytest.approx(0.3466, abs=1e-4)
    assert sigma ** 2 == pytest.approx(math.log(2))
    mu, sigma = lognormal_params(3.0, 0.0)
    assert mu == pytest.approx(math.log(3.0))
    assert sigma == 0.0
    with pytest.raises(ModelDomainError):
        lognormal_params(0.0, 1.0)


def test_arrival_streams_are_reproducible():
    mdp, _ = _model()
    first = [sample_arrivals(mdp, StreamManager(11).arrivals(w)) for w in range(10)]
    second = [sample_arrivals(mdp, StreamManager(11).arrivals(w)) for w in range(10)]
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
    assert all(np.all(a <= mdp.caps) for a in first)

    mdp, _ = _without_arrivals()
    assert not sample_arrivals(mdp, StreamManager(11).arrivals(1)).any()


def test_streams_are_independent_by_purpose():
    streams = StreamManager(3)
    assert streams.arrivals(1).random() != streams.durations(1).random()
    assert streams.arrivals(1).random() == StreamManager(3).arrivals(1).random()
    assert streams.arrivals(1).random() != streams.arrivals(2).random()


# ----------------------------------------------------------------------
# 医院成本

def test_empty_action_has_no_hospital_cost():
    mdp, _ = _model()
    stats = realized_hospital_cost(mdp, mdp.zero_state(), 500, np.random.default_rng(1))
    assert stats.mean == 0.0
    assert stats.std == 0.0
    assert stats.shortage_mean == 0.0


def test_degenerate_durations_match_expected_cost():
    mdp, _ = _deterministic_durations()
    rng = np.random.default_rng(2)
    for _ in range(20):
        action = rng.integers(0, 4, size=mdp.size)
        stats = realized_hospital_cost(mdp, action, 50, np.random.default_rng(3))
        assert stats.std == 0.0
        assert stats.mean == pytest.approx(mdp.hospital_costs(action)[0])


def test_hospital_cost_vanishes_with_capacity():
    mdp, _ = _model()
    action = mdp.zero_state()
    action[0] = 1
    means = []
    for capacity in [3.0, 6.0, 12.0, 48.0]:
        config = mdp.config
        specialties = [spec.model_copy(update={"or_capacity_hours": capacity}) for spec in config.specialties]
        roomy = AdmissionMDP(config.model_copy(update={"specialties": specialties,
                                                       "sicu_capacity_bed_days": 4 * capacity}))
        means.append(realized_hospital_cost(roomy, action, 100_000, np.random.default_rng(4)).mean)
    assert all(a >= b for a, b in zip(means, means[1:]))
    assert means[-1] < 1.0


def test_hospital_cost_statistics_are_consistent():
    mdp, _ = _model()
    action = np.array([1, 1, 0, 1, 0, 1, 1, 0, 1, 0, 0])
    stats = realized_hospital_cost(mdp, action, 20_000, np.random.default_rng(5), np.random.default_rng(6))
    assert stats.overtime_mean.shape == (2,)
    assert stats.total_overtime_mean == pytest.approx(stats.overtime_mean.sum())
    assert stats.mean == pytest.approx(mdp.c_o * stats.total_overtime_mean + mdp.c_e * stats.shortage_mean)
    assert stats.mean >= mdp.hospital_costs(action)[0] * 0.5


# ----------------------------------------------------------------------
# 多周仿真

def test_zero_arrival_simulation_is_all_zero():
    mdp, space = _without_arrivals()
    report = run_simulation(mdp, MyopicPolicy(space), _plan())
    assert len(report.weeks) == 20
    for name in ["c", "c_p", "c_h", "o", "e", "waiting_list_size"]:
        assert report.metrics[name].mean == 0.0
    assert all(w.patients == 0 for w in report.waiting_times)


def test_simulation_is_reproducible():
    mdp, space = _model()
    first = run_simulation(mdp, MyopicPolicy(space), _plan())
    second = run_simulation(mdp, MyopicPolicy(space), _plan())
    strip = lambda report: [w.model_dump(exclude={"t_ms"}) for w in report.weeks]
    assert strip(first) == strip(second)
    assert first.waiting_times == second.waiting_times
    assert first.metrics["c"] == second.metrics["c"]


def test_policies_share_arrivals():
    mdp, space = _model()
    myopic = RecordingPolicy(space, "myopic")
    idle = IdlePolicy(space)
    run_simulation(mdp, myopic, _plan())
    run_simulation(mdp, idle, _plan())
    rows = mdp.first_rows
    for a, b in zip(myopic.states, idle.states):
        assert np.array_equal(a[rows], b[rows])
    assert any(not np.array_equal(a, b) for a, b in zip(myopic.states, idle.states))


def test_initial_state_from_plan():
    mdp, space = _model()
    start = [0] * mdp.size
    start[2] = 3
    policy = RecordingPolicy(space, "myopic")
    run_simulation(mdp, policy, _plan(horizon_weeks=1, initial_state=start))
    assert policy.states[0].tolist() == start


def test_waiting_times_within_bounds():
    mdp, space = _model()
    report = run_simulation(mdp, MyopicPolicy(space), _plan(horizon_weeks=40))
    scheduled = sum(w.scheduled for w in report.weeks)
    assert sum(w.patients for w in report.waiting_times) == scheduled
    for wait, group in zip(report.waiting_times, mdp.groups):
        if wait.patients:
            assert 1 <= wait.mean <= group.max_wait
            assert wait.std >= 0


def test_report_cost_decomposition():
    mdp, space = _model()
    report = run_simulation(mdp, MyopicPolicy(space), _plan())
    for week in report.weeks:
        assert week.c_mean == pytest.approx(week.c_p + week.c_h_mean)
        assert week.evaluated_actions <= week.full_actions
    metrics = report.metrics
    assert metrics["c"].mean == pytest.approx(metrics["c_p"].mean + metrics["c_h"].mean)
    assert metrics["o"].mean == pytest.approx(metrics["o_1"].mean + metrics["o_2"].mean)
    assert 0 < report.action_ratio <= 1
    assert report.max_full_actions >= report.max_evaluated_actions


def test_infeasible_action_names_the_week():
    mdp, space = _model()
    policy = BrokenPolicy("broken", space, ActionSource.REDUCED)
    with pytest.raises(SimulationError) as info:
        run_simulation(mdp, policy, _plan())
    assert info.value.week == 3


def _table_policy(truncate_arrivals: bool = True):
    """单专科小实例上只安排到期患者的查表策略"""
    config = ProblemConfig.model_validate({
        "name": "table",
        "specialties": [{
            "name": "a", "importance": 1, "or_capacity_hours": 3,
            "duration_mean_hours": 2, "duration_std_hours": 1, "los_mean_days": 2, "los_std_days": 1,
            "urgency_groups": [{"urgency": 1, "max_wait_weeks": 2, "arrival_rate_per_week": 1.0}],
        }],
        "sicu_capacity_bed_days": 4,
        "or_availability_rate": 1.0,
        "sicu_availability_rate": 1.0,
        "costs": {"surgery_per_priority_unit": 50, "waiting_per_priority_unit": 100,
                  "or_overtime_per_hour": 400, "sicu_shortage_per_bed_day": 500},
        "poisson_truncation_threshold": 0.2,
        "truncate_arrivals": truncate_arrivals,
    })
    mdp = AdmissionMDP(config)
    space = ActionSpace(mdp)
    states = StateSpace(mdp)
    actions = np.where(mdp.due_mask, states.enumerate(), 0).astype(np.int16)
    return mdp, TablePolicy(PolicyTable(states, actions), space, ActionSource.FULL, "vi")


def test_table_policy_runs_within_caps():
    mdp, policy = _table_policy()
    report = run_simulation(mdp, policy, _plan(horizon_weeks=30, scenario_count=20))
    assert len(report.weeks) == 30


def test_initial_state_beyond_table_caps_is_rejected():
    mdp, policy = _table_policy()
    start = (mdp.caps[mdp.group_of] + 1).tolist()
    with pytest.raises(SimulationError) as info:
        run_simulation(mdp, policy, _plan(horizon_weeks=3, initial_state=start))
    assert info.value.week == 0


def test_untruncated_arrivals_leaving_table_name_the_week():
    mdp, policy = _table_policy(truncate_arrivals=False)
    with pytest.raises(SimulationError) as info:
        run_simulation(mdp, policy, _plan(horizon_weeks=500, scenario_count=5, initial_state=[0] * mdp.size))
    assert info.value.week >= 2
    assert "vi" in str(info.value)


def test_large_instance_simulates_with_reduced_actions():
    config = InstanceLibrary.get("multi-9spec")
    mdp = AdmissionMDP(config)
    space = ActionSpace(mdp)
    # 约 1.2e7 个约简动作，只能分块扫描
    start = mdp.lift_arrivals(np.ceil(mdp.rates).astype(np.int64))
    plan = _plan(horizon_weeks=2, scenario_count=50, master_seed=11, initial_state=start.tolist())
    assert space.reduced_action_count(start) > space.max_reduced_actions

    myopic = run_simulation(mdp, MyopicPolicy(space), plan)
    assert len(myopic.weeks) == 2
    assert myopic.weeks[0].evaluated_actions == space.reduced_action_count(start)

    learner = LearnerState.initial(mdp.size, AdpParameters(trajectory_depth=1, max_trajectories=1), mdp.gamma)
    adp_policy = AdpPolicy(mdp, space, learner, StreamManager(plan.master_seed), ActionSource.REDUCED, "adp-star")
    report = run_simulation(mdp, adp_policy, plan)
    assert len(report.weeks) == 2
    assert all(np.isfinite(record.theta).all() for record in report.theta_trace)


if __name__ == "__main__":
    print("🚀 Admission ADP - 仿真测试")
    print("=" * 40)
    for name, func in list(globals().items()):
        if name.startswith("test_") and callable(func):
            func()
            print(f"  ✓ {name}")
    print("\n✅ 仿真测试通过！")

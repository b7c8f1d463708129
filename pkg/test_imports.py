#!/usr/bin/env python3
"""
测试脚本 - 验证所有模块可以正常导入
"""

import sys
from pathlib import Path

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))


def test_imports():
    """测试所有模块导入"""
    print("🔍 测试模块导入...")

    # 测试config模块
    print("  ✓ 导入 config.constants...")
    from config.constants import SolverKind, ActionSource

    print("  ✓ 导入 config.models...")
    from config.models import ProblemConfig, SimulationPlan, SweepSpec

    print("  ✓ 导入 config.loader...")
    from config.loader import load_config, load_runtime_settings

    print("  ✓ 导入 config.instances...")
    from config.instances import InstanceLibrary

    # 测试core模块
    print("  ✓ 导入 core.mdp_model...")
    from core.mdp_model import AdmissionMDP

    print("  ✓ 导入 core.action_space...")
    from core.action_space import ActionSpace

    print("  ✓ 导入 core.exact_solvers...")
    from core.exact_solvers import ValueIterationSolver, myopic_action

    print("  ✓ 导入 core.adp_rlstd...")
    from core.adp_rlstd import LearnerState, adp_decide

    print("  ✓ 导入 core.simulator...")
    from core.simulator import run_simulation

    print("  ✓ 导入 core.experiment_runner...")
    from core.experiment_runner import ExperimentRunner

    print("  ✓ 导入 ui.terminal_ui...")
    from ui.terminal_ui import TerminalUI

    print("\n✅ 所有模块导入成功！")


def test_basic_functionality():
    """测试基本功能"""
    print("\n🧪 测试基本功能...")

    from config.instances import InstanceLibrary
    from core.action_space import ActionSpace
    from core.exact_solvers import myopic_action
    from core.mdp_model import AdmissionMDP

    # 测试内置实例
    print("  ✓ 测试内置实例...")
    mdp = AdmissionMDP(InstanceLibrary.get("small-2spec"))
    assert mdp.size == 11

    # 测试短视策略
    print("  ✓ 测试短视策略...")
    space = ActionSpace(mdp)
    state = mdp.zero_state()
    state[0] = 2
    action = myopic_action(space, state)
    assert mdp.is_feasible(state, action)

    print("\n✅ 基本功能测试通过！")


if __name__ == "__main__":
    print("🚀 Admission ADP - 导入测试")
    print("=" * 40)

    try:
        test_imports()
    except Exception as e:
        print(f"\n❌ 导入测试失败，请检查代码: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)

    try:
        test_basic_functionality()
    except Exception as e:
        print(f"\n⚠️ 功能测试失败，但导入正常: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)

    print("\n🎉 所有测试通过！项目可以正常运行。")
    sys.exit(0)

#!/usr/bin/env python3
"""
Admission ADP - 择期手术患者入院控制

无限期折扣 MDP 模型下的入院决策工具：结构化动作剪枝、值迭代精确求解、
短视策略、RLS-TD(λ) 近似动态规划，以及共享到达序列的多周蒙特卡洛仿真。
"""

import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.text import Text

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

try:
    from config.constants import (
        APP_NAME, APP_VERSION, SolverKind, EXIT_OK, EXIT_FAILURE, EXIT_VALIDATION, EXIT_GUARD_REFUSAL,
        DEFAULT_HORIZON_WEEKS, DEFAULT_SCENARIO_COUNT, DEFAULT_LAMBDA, DEFAULT_BETA,
        DEFAULT_TRAJECTORY_DEPTH, DEFAULT_EPSILON, DEFAULT_MAX_TRAJECTORIES, DEFAULT_STOP_RESIDUAL,
        DEFAULT_MAX_SWEEPS,
    )
    from config.loader import ConfigValidationError, RuntimeSettings, load_runtime_settings, resolve_instance
    from config.models import AdpParameters, SimulationPlan, SolverSpec, SweepSpec
    from core.errors import AdmissionError, GuardRefusalError
    from core.experiment_runner import ExperimentRunner
    from core.mdp_model import AdmissionMDP
    from core import reporting
    from ui.terminal_ui import TerminalUI
except ImportError as e:
    console = Console()
    console.print(f"[red]导入错误: {e}[/red]")
    console.print("[yellow]请确保所有依赖已安装: pip install -r requirements.txt[/yellow]")
    sys.exit(1)

logger = logging.getLogger("admission")


class AdmissionApp:
    """命令行应用主类：持有运行时设置、界面和实验编排器"""

    def __init__(self, settings: RuntimeSettings, verbose: bool = False):
        self.settings = settings
        self.verbose = verbose
        self.ui = TerminalUI()
        self.runner = ExperimentRunner(settings, self.ui)

    def output_dir(self, out: Optional[str], command: str) -> Path:
        if out:
            return Path(out)
        return self.settings.output_dir / command

    async def execute(self, coroutine) -> int:
        """统一的异常到退出码映射"""
        try:
            await coroutine
            return EXIT_OK
        except (ConfigValidationError, ValidationError) as e:
            self.ui.show_error(str(e), "配置校验失败")
            return EXIT_VALIDATION
        except GuardRefusalError as e:
            self.ui.show_error(str(e), "规模保护")
            return EXIT_GUARD_REFUSAL
        except AdmissionError as e:
            self.ui.show_error(str(e), "运行失败")
            return EXIT_FAILURE
        except KeyboardInterrupt:
            self.ui.show_system_message("用户中断", "警告")
            return EXIT_FAILURE

    # ------------------------------------------------------------------

    async def validate(self, instance: Optional[str], config_path: Optional[str]):
        config = resolve_instance(instance, config_path)
        mdp = AdmissionMDP(config)
        mandatory = [mdp.describe_type(i) for i in range(mdp.size)
                     if mdp.cost_forced_mask[i] and not mdp.due_mask[i]]
        self.ui.show_instance_summary(mdp, mandatory)
        self.ui.show_system_message(f"实例 {config.name} 校验成功", "成功")

    async def solve_exact(self, instance, config_path, solver: SolverSpec, out: Optional[str]):
        config = resolve_instance(instance, config_path)
        cache_dir = self.output_dir(out, "solve-exact")
        values, _, path = self.runner.solve_exact(config, solver, cache_dir)
        self.ui.show_system_message(
            f"{solver.label} 完成: {values.iterations} 轮, 残差 {values.residual:.3e}, "
            f"V 范围 [{values.values.min():,.2f}, {values.values.max():,.2f}]", "成功")
        self.ui.show_outputs([path])

    async def simulate(self, instance, config_path, solvers: List[SolverSpec], plan: SimulationPlan,
                       out: Optional[str], resume_learner: Optional[str], command: str):
        config = resolve_instance(instance, config_path)
        result = self.runner.run_experiment(
            config, solvers, plan, self.output_dir(out, command),
            learner_path=Path(resume_learner) if resume_learner else None, command=command)
        self._show_result(result.reports)
        self.ui.show_outputs(result.outputs + [result.manifest_path])

    async def rerun(self, manifest: str, out: Optional[str], workers: int):
        result = await self.runner.rerun_manifest(Path(manifest), self.output_dir(out, "rerun"), workers)
        self._show_result(result.reports)
        self.ui.show_outputs(result.outputs + [result.manifest_path])

    async def sweep(self, instance, config_path, spec: SweepSpec, out: Optional[str], workers: int):
        config = resolve_instance(instance, config_path)
        result = await self.runner.run_sweep(spec, config, self.output_dir(out, "sweep"), workers)
        self.ui.show_outputs(result.outputs + [result.manifest_path])

    def _show_result(self, reports):
        for report in reports:
            self.ui.show_report_summary(report)
            self.ui.show_separator()
        if len(reports) > 1:
            self.ui.show_comparison(reporting.comparison_frame(reports))


def setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=verbose, show_path=verbose)],
    )


def instance_options(func):
    func = click.option('--instance', '-i', help='内置实例: small-2spec / cabg / multi-9spec')(func)
    return click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                        help='实例配置文件 (YAML)')(func)


ADP_OPTIONS = [
    click.option('--lambda', 'trace_decay', type=click.FloatRange(0, 1), default=DEFAULT_LAMBDA,
                 show_default=True, help='资格迹衰减 λ'),
    click.option('--beta', type=float, default=DEFAULT_BETA, show_default=True, help='P 初值 βI'),
    click.option('--traj-depth', type=click.IntRange(min=1), default=DEFAULT_TRAJECTORY_DEPTH,
                 show_default=True, help='轨迹长度 N'),
    click.option('--epsilon', type=float, default=DEFAULT_EPSILON, show_default=True,
                 help='Θ 相对变化停止阈值 ε (可取 inf)'),
    click.option('--max-trajectories', type=click.IntRange(min=1), default=DEFAULT_MAX_TRAJECTORIES,
                 show_default=True, help='每周最多轨迹数'),
    click.option('--stop-residual', type=float, default=DEFAULT_STOP_RESIDUAL, show_default=True,
                 help='值迭代停止残差'),
    click.option('--max-sweeps', type=click.IntRange(min=1), default=DEFAULT_MAX_SWEEPS,
                 show_default=True, help='值迭代最大轮数'),
]


PLAN_OPTIONS = [
    click.option('--weeks', type=click.IntRange(min=1), default=DEFAULT_HORIZON_WEEKS, show_default=True,
                 help='仿真周数 τ_max'),
    click.option('--scenarios', type=click.IntRange(min=1), default=DEFAULT_SCENARIO_COUNT, show_default=True,
                 help='每周医院成本抽样场景数'),
    click.option('--seed', type=click.IntRange(min=0), default=None, help='主随机种子'),
    click.option('--out', type=click.Path(file_okay=False), help='输出目录'),
]


def adp_options(func):
    for option in reversed(ADP_OPTIONS):
        func = option(func)
    return func


def plan_options(func):
    for option in reversed(PLAN_OPTIONS):
        func = option(func)
    return func


SOLVER_CHOICE = click.Choice([k.value for k in SolverKind])


def build_solver(kind: str, opts: dict) -> SolverSpec:
    adp = AdpParameters(
        trace_decay=opts["trace_decay"], beta=opts["beta"], trajectory_depth=opts["traj_depth"],
        epsilon=opts["epsilon"], max_trajectories=opts["max_trajectories"],
    )
    return SolverSpec(kind=SolverKind(kind), adp=adp,
                      stop_residual=opts["stop_residual"], max_sweeps=opts["max_sweeps"])


def build_plan(settings: RuntimeSettings, solvers: List[SolverSpec], opts: dict) -> SimulationPlan:
    seed = opts["seed"] if opts["seed"] is not None else settings.default_seed
    return SimulationPlan(horizon_weeks=opts["weeks"], scenario_count=opts["scenarios"],
                          master_seed=seed, policies=[s.label for s in solvers])


def run_app(ctx: click.Context, build):
    """在 click 上下文中构造协程并以对应退出码退出"""
    app: AdmissionApp = ctx.obj
    app.ui.show_header({"命令": ctx.info_name, "输出目录": str(app.settings.output_dir),
                        "默认种子": str(app.settings.default_seed)})
    try:
        coroutine = build(app)
    except (ConfigValidationError, ValidationError) as e:
        app.ui.show_error(str(e), "配置校验失败")
        sys.exit(EXIT_VALIDATION)
    sys.exit(asyncio.run(app.execute(coroutine)))


@click.group(invoke_without_command=True)
@click.option('--env-file', '-e', default='.env', help='环境变量文件路径 (默认: .env)', type=click.Path())
@click.option('--verbose', is_flag=True, help='启用详细日志')
@click.option('--version', '-v', is_flag=True, help='显示版本信息')
@click.pass_context
def main(ctx: click.Context, env_file: str, verbose: bool, version: bool):
    """
    Admission ADP - 择期手术患者入院控制

    \b
    使用示例:
        python main.py validate -i small-2spec
        python main.py solve-exact -i small-2spec --solver vi-star
        python main.py simulate -i cabg --solver adp-star --lambda 0.5 --weeks 100
        python main.py compare -i small-2spec --solver myopic --solver vi-star --solver adp-star
        python main.py sweep -i small-2spec --param c_o --values 200,400,800 --seeds 1,2,3
        python main.py simulate --manifest runs/simulate/manifest.json

    \b
    环境变量 (.env):
        ADMISSION_OUTPUT_DIR    默认输出目录
        ADMISSION_DEFAULT_SEED  默认主随机种子
        ADMISSION_MAX_STATES    状态空间枚举上限
        ADMISSION_MAX_ACTIONS   单状态完整动作集上限

    \b
    退出码: 0 成功, 1 运行失败, 2 配置校验失败, 3 规模保护拒绝
    """
    console = Console()
    if version:
        version_text = Text()
        version_text.append(f"{APP_NAME} ", style="bold bright_blue")
        version_text.append(f"v{APP_VERSION}", style="bold bright_green")
        console.print(version_text)
        ctx.exit(EXIT_OK)
    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())
        ctx.exit(EXIT_OK)

    setup_logging(verbose)
    try:
        settings = load_runtime_settings(env_file)
    except ConfigValidationError as e:
        TerminalUI(console).show_error(str(e), "配置校验失败")
        ctx.exit(EXIT_VALIDATION)
    if verbose:
        logger.debug("加载环境文件: %s, 输出目录: %s", env_file, settings.output_dir)
    ctx.obj = AdmissionApp(settings, verbose)


@main.command()
@instance_options
@click.pass_context
def validate(ctx, config_path, instance):
    """校验实例配置并显示派生信息"""
    run_app(ctx, lambda app: app.validate(instance, config_path))


@main.command('solve-exact')
@instance_options
@click.option('--solver', type=click.Choice([SolverKind.VI.value, SolverKind.VI_STAR.value]),
              default=SolverKind.VI_STAR.value, show_default=True)
@click.option('--stop-residual', type=float, default=DEFAULT_STOP_RESIDUAL, show_default=True)
@click.option('--max-sweeps', type=click.IntRange(min=1), default=DEFAULT_MAX_SWEEPS, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), help='值表输出目录')
@click.pass_context
def solve_exact(ctx, config_path, instance, solver, stop_residual, max_sweeps, out):
    """值迭代求解并缓存值表"""
    def build(app):
        spec = SolverSpec(kind=SolverKind(solver), stop_residual=stop_residual, max_sweeps=max_sweeps)
        return app.solve_exact(instance, config_path, spec, out)
    run_app(ctx, build)


@main.command()
@instance_options
@click.option('--solver', type=SOLVER_CHOICE, default=SolverKind.MYOPIC.value, show_default=True)
@adp_options
@plan_options
@click.option('--resume-learner', type=click.Path(exists=True, dir_okay=False), help='从学习器检查点继续')
@click.option('--manifest', type=click.Path(exists=True, dir_okay=False), help='按运行清单重跑')
@click.pass_context
def simulate(ctx, config_path, instance, solver, resume_learner, manifest, **opts):
    """仿真单个策略"""
    def build(app):
        if manifest:
            return app.rerun(manifest, opts["out"], workers=1)
        solvers = [build_solver(solver, opts)]
        plan = build_plan(app.settings, solvers, opts)
        return app.simulate(instance, config_path, solvers, plan, opts["out"], resume_learner, "simulate")
    run_app(ctx, build)


@main.command()
@instance_options
@click.option('--solver', 'solver_kinds', type=SOLVER_CHOICE, multiple=True, required=True,
              help='可重复指定多个策略')
@adp_options
@plan_options
@click.pass_context
def compare(ctx, config_path, instance, solver_kinds, **opts):
    """多策略共享到达序列对比"""
    def build(app):
        solvers = [build_solver(kind, opts) for kind in dict.fromkeys(solver_kinds)]
        plan = build_plan(app.settings, solvers, opts)
        return app.simulate(instance, config_path, solvers, plan, opts["out"], None, "compare")
    run_app(ctx, build)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"应为逗号分隔的数值: {text}")


@main.command()
@instance_options
@click.option('--solver', type=SOLVER_CHOICE, default=SolverKind.MYOPIC.value, show_default=True)
@click.option('--param', 'parameter', required=True, help='c_d / c_o / c_e / B_<j> / R / lambda / beta')
@click.option('--values', 'values_text', required=True, help='逗号分隔的取值')
@click.option('--seeds', 'seeds_text', default=None, help='逗号分隔的种子 (默认使用 --seed)')
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True, help='并行进程数')
@adp_options
@plan_options
@click.pass_context
def sweep(ctx, config_path, instance, solver, parameter, values_text, seeds_text, workers, **opts):
    """敏感性扫描，输出长表 CSV"""
    def build(app):
        solver_spec = build_solver(solver, opts)
        plan = build_plan(app.settings, [solver_spec], opts)
        seeds = [int(v) for v in _float_list(seeds_text)] if seeds_text else [plan.master_seed]
        spec = SweepSpec(parameter=parameter, values=_float_list(values_text), seeds=seeds,
                         solver=solver_spec, plan=plan)
        return app.sweep(instance, config_path, spec, opts["out"], workers)
    run_app(ctx, build)


if __name__ == "__main__":
    main()

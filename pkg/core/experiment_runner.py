"""
实验编排

把实例、求解器与仿真计划组合成一次实验: 精确求解 (值表可缓存)、共享到达序列的多策略仿真、
CSV 与运行清单输出、敏感性扫描 (可多进程) 以及按清单重跑。
"""

import asyncio
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import pandas as pd

from config.constants import (
    APP_VERSION, ActionSource, SweepParameter, WEEKLY_CSV_COLUMNS, AGGREGATE_CSV_COLUMNS,
    SWEEP_CSV_COLUMNS, THETA_CSV_COLUMNS_PREFIX, WALL_TIME_METRICS,
)
from config.loader import RuntimeSettings, config_fingerprint, load_manifest
from config.models import ProblemConfig, RunManifest, SimulationPlan, SimulationReport, SolverSpec, SweepSpec
from core.action_space import ActionSpace
from core.adp_rlstd import load_learner, save_learner
from core.errors import AdmissionError, ModelDomainError
from core.exact_solvers import (
    PolicyTable, StateSpace, ValueIterationSolver, ValueTable, load_tables, save_tables,
)
from core.mdp_model import AdmissionMDP
from core.policies import AdpPolicy, Policy, build_policy
from core.random_streams import StreamManager
from core import reporting
from core.simulator import run_simulation
from ui.terminal_ui import TerminalUI

logger = logging.getLogger(__name__)

_TRACKED_PACKAGES = ["numpy", "scipy", "pandas", "pydantic", "PyYAML", "click", "rich", "python-dotenv"]


class ExperimentResult(NamedTuple):
    reports: List[SimulationReport]
    outputs: List[Path]
    manifest_path: Path


def library_versions() -> Dict[str, str]:
    versions = {}
    for package in _TRACKED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


class ExperimentRunner:
    """实验编排 - 求解、仿真、敏感性扫描与结果导出"""

    def __init__(self, settings: Optional[RuntimeSettings] = None, ui: Optional[TerminalUI] = None):
        self.settings = settings or RuntimeSettings()
        self.ui = ui

    def build_model(self, config: ProblemConfig) -> Tuple[AdmissionMDP, ActionSpace]:
        mdp = AdmissionMDP(config)
        return mdp, ActionSpace(mdp, max_full_actions=self.settings.max_actions)

    # ------------------------------------------------------------------
    # 精确求解

    def cache_path(self, config: ProblemConfig, solver: SolverSpec, cache_dir: Path) -> Path:
        return Path(cache_dir) / f"{config.name}-{solver.label}-{config_fingerprint(config)[:12]}.npz"

    def solve_exact(self, config: ProblemConfig, solver: SolverSpec,
                    cache_dir: Optional[Path] = None) -> Tuple[ValueTable, PolicyTable, Optional[Path]]:
        """值迭代；cache_dir 给定时先查缓存，求解后写回"""
        if not solver.kind.is_exact:
            raise ModelDomainError(f"{solver.label} 不是精确求解器")
        mdp, space = self.build_model(config)
        source = ActionSource.REDUCED if solver.kind.uses_reduced_actions else ActionSource.FULL
        fingerprint = config_fingerprint(config)
        path = self.cache_path(config, solver, cache_dir) if cache_dir else None

        if path and path.exists():
            try:
                values, policy, _ = load_tables(path, mdp, fingerprint, self.settings.max_states)
                logger.info("使用缓存值表 %s (%d 轮)", path, values.iterations)
                return values, policy, path
            except (ModelDomainError, KeyError, ValueError) as e:
                logger.warning("缓存值表不可用，重新求解: %s", e)

        solver_engine = ValueIterationSolver(mdp, space, StateSpace(mdp, self.settings.max_states), source)
        solver_engine.prepare()
        if self.ui:
            with self.ui.track(f"{solver.label} 值迭代", total=None) as advance:
                values, policy = solver_engine.solve(
                    solver.stop_residual, solver.max_sweeps,
                    progress=lambda sweep, residual: advance(f"第 {sweep} 轮 残差 {residual:.2e}"))
        else:
            values, policy = solver_engine.solve(solver.stop_residual, solver.max_sweeps)
        if path:
            save_tables(path, values, policy, fingerprint, source)
        return values, policy, path

    # ------------------------------------------------------------------
    # 仿真

    def simulate_policies(self, config: ProblemConfig, solvers: List[SolverSpec], plan: SimulationPlan,
                          learner_path: Optional[Path] = None,
                          cache_dir: Optional[Path] = None) -> Tuple[List[SimulationReport], List[Policy]]:
        mdp, space = self.build_model(config)
        reports: List[SimulationReport] = []
        policies: List[Policy] = []
        for solver in solvers:
            streams = StreamManager(plan.master_seed)
            table = None
            learner = None
            if solver.kind.is_exact:
                _, table, _ = self.solve_exact(config, solver, cache_dir)
            if solver.kind.is_adp and learner_path:
                learner = load_learner(learner_path, mdp.size)
            policy = build_policy(solver, mdp, space, streams, table=table, learner=learner)

            if self.ui:
                with self.ui.track(f"仿真 {policy.label}", total=plan.horizon_weeks) as advance:
                    report = run_simulation(mdp, policy, plan, progress=lambda week: advance())
            else:
                report = run_simulation(mdp, policy, plan)
            logger.info("%s: 平均周成本 %.2f", policy.label, report.metrics["c"].mean)
            reports.append(report)
            policies.append(policy)
        return reports, policies

    def _write_reports(self, reports: List[SimulationReport], out_dir: Path) -> List[Path]:
        outputs = [
            reporting.write_csv(reporting.weekly_frame(reports), out_dir / "weekly.csv"),
            reporting.write_csv(reporting.aggregate_frame(reports), out_dir / "aggregate.csv"),
            reporting.write_csv(reporting.timing_frame(reports), out_dir / "timing.csv"),
        ]
        problems = reporting.validate_csv(outputs[0], WEEKLY_CSV_COLUMNS)
        problems += reporting.validate_csv(outputs[1], AGGREGATE_CSV_COLUMNS)
        problems += reporting.validate_csv(outputs[2], AGGREGATE_CSV_COLUMNS)
        if any(r.theta_trace for r in reports):
            theta_path = reporting.write_csv(reporting.theta_frame(reports), out_dir / "theta.csv")
            problems += reporting.validate_csv(theta_path, THETA_CSV_COLUMNS_PREFIX, prefix_only=True)
            outputs.append(theta_path)
        if len(reports) > 1:
            comparison = reporting.comparison_frame(reports).reset_index()
            outputs.append(reporting.write_csv(comparison, out_dir / "comparison.csv"))
        if problems:
            raise AdmissionError("输出文件校验失败: " + "; ".join(problems))
        return outputs

    def _write_manifest(self, out_dir: Path, config: ProblemConfig, solvers: List[SolverSpec],
                        plan: SimulationPlan, outputs: List[Path], extra: Dict[str, Any]) -> Path:
        manifest = RunManifest(
            tool_version=APP_VERSION,
            library_versions=library_versions(),
            instance=config,
            solvers=solvers,
            plan=plan,
            outputs=[p.name for p in outputs],
            extra={"created_at": datetime.now().isoformat(timespec="seconds"), **extra},
        )
        path = out_dir / "manifest.json"
        path.write_text(manifest.model_dump_json(indent=2, by_alias=True), encoding="utf-8")
        return path

    def run_experiment(self, config: ProblemConfig, solvers: List[SolverSpec], plan: SimulationPlan,
                       out_dir: Path, learner_path: Optional[Path] = None,
                       command: str = "simulate") -> ExperimentResult:
        """运行一组策略 (共享到达序列) 并写出 CSV 与清单"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        reports, policies = self.simulate_policies(config, solvers, plan, learner_path,
                                                   cache_dir=self.settings.output_dir / "cache")
        outputs = self._write_reports(reports, out_dir)
        for policy in policies:
            if isinstance(policy, AdpPolicy):
                outputs.append(save_learner(out_dir / f"learner-{policy.label}.npz", policy.learner))

        extra: Dict[str, Any] = {"command": command}
        if learner_path:
            extra["resume_learner"] = str(learner_path)
        manifest_path = self._write_manifest(out_dir, config, solvers, plan, outputs, extra)
        return ExperimentResult(reports, outputs, manifest_path)

    # ------------------------------------------------------------------
    # 敏感性扫描

    async def run_sweep(self, spec: SweepSpec, config: ProblemConfig, out_dir: Path,
                        workers: int = 1) -> ExperimentResult:
        """每个 (取值, 种子) 组合独立运行一次；单点失败只记录，不中断扫描"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        points = [(value, seed) for value in spec.values for seed in spec.seeds]
        arguments = [
            (config.model_dump_json(), spec.model_dump_json(by_alias=True), value, seed,
             self.settings.max_states, self.settings.max_actions)
            for value, seed in points
        ]

        results: List[List[dict]] = []
        if workers <= 1:
            for args in arguments:
                results.append(sweep_point(*args))
                if self.ui:
                    self.ui.show_sweep_point(spec.parameter, args[2], args[3], results[-1])
        else:
            loop = asyncio.get_running_loop()
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [loop.run_in_executor(pool, sweep_point, *args) for args in arguments]
                results = await asyncio.gather(*futures)
            if self.ui:
                for args, rows in zip(arguments, results):
                    self.ui.show_sweep_point(spec.parameter, args[2], args[3], rows)

        rows = [row for point_rows in results for row in point_rows]
        timing = [row for row in rows if row["metric"] in WALL_TIME_METRICS]
        rows = [row for row in rows if row["metric"] not in WALL_TIME_METRICS]
        path = reporting.write_csv(reporting.sweep_frame(rows), out_dir / "sweep.csv")
        timing_path = reporting.write_csv(reporting.sweep_frame(timing), out_dir / "sweep_timing.csv")
        problems = reporting.validate_csv(path, SWEEP_CSV_COLUMNS)
        if problems:
            raise AdmissionError("输出文件校验失败: " + "; ".join(problems))
        failed = sum(1 for r in rows if r["error"])
        if failed:
            logger.warning("扫描中有 %d 个点失败，详见 %s 的 error 列", failed, path)
        manifest_path = self._write_manifest(
            out_dir, config, [spec.solver], spec.plan, [path, timing_path],
            {"command": "sweep", "sweep": spec.model_dump(mode="json", by_alias=True)})
        return ExperimentResult([], [path, timing_path], manifest_path)

    # ------------------------------------------------------------------

    async def rerun_manifest(self, manifest_path: Path, out_dir: Path, workers: int = 1) -> ExperimentResult:
        """按清单重跑实验"""
        manifest = load_manifest(manifest_path)
        command = manifest.extra.get("command", "simulate")
        if command == "sweep":
            spec = SweepSpec.model_validate(manifest.extra["sweep"])
            return await self.run_sweep(spec, manifest.instance, out_dir, workers)
        learner = manifest.extra.get("resume_learner")
        return self.run_experiment(manifest.instance, manifest.solvers, manifest.plan, out_dir,
                                   learner_path=Path(learner) if learner else None, command=command)


def sweep_point(config_json: str, spec_json: str, value: float, seed: int,
                max_states: int, max_actions: int) -> List[dict]:
    """单个扫描点；在子进程中执行，参数均为可序列化的基本类型"""
    config = ProblemConfig.model_validate_json(config_json)
    spec = SweepSpec.model_validate_json(spec_json)
    solver = spec.solver
    base = {"parameter": spec.parameter, "value": value, "seed": seed, "policy": solver.label}
    try:
        if spec.parameter == SweepParameter.LAMBDA.value:
            solver = solver.model_copy(update={"adp": solver.adp.model_copy(update={"trace_decay": value})})
        elif spec.parameter == SweepParameter.BETA.value:
            solver = solver.model_copy(update={"adp": solver.adp.model_copy(update={"beta": value})})
        else:
            config = config.with_parameter(spec.parameter, value)
        plan = spec.plan.model_copy(update={"master_seed": seed})
        runner = ExperimentRunner(RuntimeSettings(max_states=max_states, max_actions=max_actions))
        reports, _ = runner.simulate_policies(config, [solver], plan)
    except (AdmissionError, ValueError) as e:
        logger.warning("扫描点 %s=%s (seed %d) 失败: %s", spec.parameter, value, seed, e)
        return [{**base, "metric": "", "mean": math.nan, "std": math.nan, "error": str(e)}]

    frame = pd.concat([reporting.aggregate_frame(reports), reporting.timing_frame(reports)], ignore_index=True)
    return [{**base, "metric": row["metric"], "mean": row["mean"], "std": row["std"], "error": ""}
            for row in frame.to_dict("records")]

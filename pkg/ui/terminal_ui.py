from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional

import pandas as pd
from rich.align import Align
from rich.box import DOUBLE, HEAVY, ROUNDED, SIMPLE
from rich.console import Console, Group
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn, TimeElapsedColumn
from rich.rule import Rule
from rich.table import Table
from rich.text import Text

from config.constants import APP_NAME, APP_VERSION
from config.models import SimulationReport
from core.errors import format_count


class TerminalUI:
    """终端界面 - 用 Rich 展示实例信息、求解进度和实验结果"""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console(width=120, legacy_windows=False)

        # 消息类型样式
        self.styles = {
            "信息": {"emoji": "ℹ️", "color": "yellow"},
            "成功": {"emoji": "✅", "color": "bright_green"},
            "警告": {"emoji": "⚠️", "color": "bright_red"},
        }

    def show_header(self, info: Optional[Dict[str, str]] = None):
        """显示应用标题和运行配置"""
        title_text = Text(APP_NAME, style="bold bright_blue")
        subtitle = Text(f"🏥 择期手术入院控制 - 精确求解 / RLS-TD(λ) 近似动态规划  v{APP_VERSION}",
                        style="italic bright_cyan")

        config_table = None
        if info:
            config_table = Table(show_header=False, box=None, padding=(0, 1))
            config_table.add_column(style="dim")
            config_table.add_column(style="bright_white")
            for key, value in info.items():
                config_table.add_row(f"{key}:", str(value))

        header_content = Group(
            Align.center(title_text),
            Align.center(subtitle),
            "",
            Align.center(config_table) if config_table else Text(""),
        )
        self.console.print(Panel(
            header_content,
            title="🚀 启动",
            title_align="center",
            border_style="bright_blue",
            box=DOUBLE,
            padding=(1, 2),
        ))
        self.console.print()

    def show_instance_summary(self, mdp, mandatory: List[str]):
        """validate 命令: 显示实例的派生量"""
        config = mdp.config
        table = Table(title=f"📋 实例 {config.name}", box=ROUNDED, border_style="cyan")
        table.add_column("专科", style="bold")
        table.add_column("u", justify="right")
        table.add_column("W", justify="right")
        table.add_column("到达率", justify="right")
        table.add_column("截断上限", justify="right", style="bright_green")
        for group in mdp.groups:
            table.add_row(config.specialties[group.j].name, str(group.u), str(group.max_wait),
                          f"{group.rate:g}", str(group.cap))
        self.console.print(table)

        size = mdp.state_space_size()
        facts = Table(show_header=False, box=None, padding=(0, 1))
        facts.add_column(style="dim")
        facts.add_column(style="bright_white")
        facts.add_row("Ξ (特征维度):", str(mdp.size))
        facts.add_row("状态空间规模:", f"{format_count(size)}")
        facts.add_row("精确值:", str(size) if size < 10 ** 30 else f"{len(str(size))} 位整数")
        facts.add_row("强制安排类型:", ", ".join(mandatory) or "仅到期类型")
        self.console.print(Panel(facts, title="🔍 派生信息", border_style="bright_cyan", box=ROUNDED))
        self.console.print()

    @contextmanager
    def track(self, description: str, total: Optional[int]) -> Iterator[Callable[..., None]]:
        """进度条；yield 出的函数每调用一次前进一步，可选地更新描述"""
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TimeElapsedColumn(),
            console=self.console,
            transient=True,
        ) as progress:
            task = progress.add_task(f"🔄 {description}", total=total)

            def advance(text: Optional[str] = None):
                if text:
                    progress.update(task, advance=1, description=f"🔄 {description} {text}")
                else:
                    progress.update(task, advance=1)

            yield advance

    def show_report_summary(self, report: SimulationReport):
        """单个策略的主要指标"""
        table = Table(title=f"📊 策略 {report.policy}", box=ROUNDED, border_style="bright_green")
        table.add_column("指标", style="bold")
        table.add_column("均值", justify="right")
        table.add_column("标准差", justify="right")
        for name in ["c", "c_p", "c_h", "o", "e", "waiting_list_size", "t_ms"]:
            stat = report.metrics.get(name)
            if stat:
                table.add_row(name, f"{stat.mean:,.2f}", f"{stat.std:,.2f}")
        for wait in report.waiting_times:
            table.add_row(f"ω(j={wait.specialty},u={wait.urgency})", f"{wait.mean:.2f}", f"{wait.std:.2f}")
        table.add_row("‖A*‖/‖A‖", f"{report.action_ratio:.4f}", "")
        table.add_row("max ‖A(s)‖", format_count(report.max_full_actions), "")
        table.add_row("T (s)", f"{report.total_cpu_seconds:.2f}", "")
        self.console.print(table)
        self.console.print()

    def show_comparison(self, frame: pd.DataFrame):
        """多策略对比表 (共享到达序列)"""
        table = Table(title="⚖️ 策略对比", box=HEAVY, border_style="bright_magenta")
        table.add_column("指标", style="bold")
        for column in frame.columns:
            table.add_column(str(column), justify="right")
        for metric, row in frame.iterrows():
            table.add_row(str(metric), *[f"{v:,.3f}" for v in row.values])
        self.console.print(table)
        self.console.print()

    def show_sweep_point(self, parameter: str, value: float, seed: int, rows: List[dict]):
        failed = [r for r in rows if r["error"]]
        if failed:
            self.console.print(f"[red]❌ {parameter}={value:g} seed={seed}: {failed[0]['error']}[/red]")
            return
        cost = next((r for r in rows if r["metric"] == "c"), None)
        hospital = next((r for r in rows if r["metric"] == "c_h"), None)
        text = Text()
        text.append(f"✔ {parameter}={value:g} seed={seed}", style="bright_green")
        if cost and hospital:
            text.append(f"  c̄={cost['mean']:,.1f}  c̄_h={hospital['mean']:,.1f}", style="dim")
        self.console.print(text)

    def show_outputs(self, paths: List[Path]):
        table = Table(show_header=False, box=SIMPLE)
        table.add_column("📁", style="bold")
        table.add_column("文件", style="bright_white")
        for path in paths:
            table.add_row("•", str(path))
        self.console.print(Panel(table, title="💾 输出文件", border_style="bright_cyan", box=ROUNDED))
        self.console.print()

    def show_error(self, error_message: str, error_type: str = "错误"):
        """显示错误信息"""
        self.console.print(Panel(
            f"❌ {error_message}",
            title=f"🚨 {error_type}",
            title_align="left",
            border_style="bright_red",
            box=HEAVY,
            padding=(0, 1),
        ))
        self.console.print()

    def show_system_message(self, message: str, message_type: str = "信息"):
        style = self.styles.get(message_type, self.styles["信息"])
        self.console.print(Panel(
            f"{style['emoji']} {message}",
            title=f"📢 {message_type}",
            title_align="left",
            border_style=style["color"],
            box=ROUNDED,
            padding=(0, 1),
        ))
        self.console.print()

    def show_separator(self, style: str = "dim", char: str = "─"):
        self.console.print(Rule(style=style, characters=char))

"""
用户界面模块

包含终端界面和用户交互组件。
"""

from .terminal_ui import TerminalUI

__all__ = [
    'TerminalUI'
]
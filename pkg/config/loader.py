"""
配置读写

实例文件为 YAML，字段名带单位；运行时默认值来自环境变量 (.env)。
"""

import hashlib
import os
from pathlib import Path
from typing import List, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from core.errors import AdmissionError

from .constants import (
    ENV_OUTPUT_DIR, ENV_DEFAULT_SEED, ENV_MAX_STATES, ENV_MAX_ACTIONS,
    DEFAULT_OUTPUT_DIR, DEFAULT_SEED, DEFAULT_MAX_STATES, DEFAULT_MAX_FULL_ACTIONS,
)
from .instances import InstanceLibrary
from .models import ProblemConfig, RunManifest


class ConfigValidationError(AdmissionError, ValueError):
    """配置文件无法解析或不满足约束"""

    def __init__(self, source: str, problems: List[str]):
        self.source = source
        self.problems = problems
        super().__init__(f"{source}: " + "; ".join(problems))


class RuntimeSettings(BaseModel):
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    default_seed: int = DEFAULT_SEED
    max_states: int = DEFAULT_MAX_STATES
    max_actions: int = DEFAULT_MAX_FULL_ACTIONS


def load_runtime_settings(env_file: Optional[str] = None) -> RuntimeSettings:
    """读取 .env 与环境变量中的运行时默认值"""
    if env_file and Path(env_file).exists():
        load_dotenv(env_file)
    else:
        load_dotenv()
    values = {
        "output_dir": os.getenv(ENV_OUTPUT_DIR),
        "default_seed": os.getenv(ENV_DEFAULT_SEED),
        "max_states": os.getenv(ENV_MAX_STATES),
        "max_actions": os.getenv(ENV_MAX_ACTIONS),
    }
    try:
        return RuntimeSettings(**{k: v for k, v in values.items() if v})
    except ValidationError as e:
        raise ConfigValidationError("环境变量", _describe(e)) from e


def _describe(error: ValidationError) -> List[str]:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        problems.append(f"{location}: {item['msg']}")
    return problems


def parse_config(data, source: str = "<memory>") -> ProblemConfig:
    if not isinstance(data, dict):
        raise ConfigValidationError(source, ["顶层必须是键值映射"])
    try:
        return ProblemConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(source, _describe(e)) from e


def load_config(path: Union[str, Path]) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError(str(path), [f"无法读取文件: {e.strerror}"]) from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"第 {mark.line + 1} 行第 {mark.column + 1} 列: " if mark else ""
        raise ConfigValidationError(str(path), [f"{where}{getattr(e, 'problem', None) or e}"]) from e
    return parse_config(data, str(path))


def save_config(config: ProblemConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(config.model_dump(mode="json"), handle, allow_unicode=True, sort_keys=False)
    return path


def resolve_instance(instance: Optional[str] = None, config_path: Optional[str] = None) -> ProblemConfig:
    """--config 优先于 --instance"""
    if config_path:
        return load_config(config_path)
    if instance:
        try:
            return InstanceLibrary.get(instance)
        except KeyError as e:
            raise ConfigValidationError("--instance", [str(e.args[0])]) from e
    raise ConfigValidationError("命令行", ["必须指定 --config 或 --instance"])


def config_fingerprint(config: ProblemConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()


def load_manifest(path: Union[str, Path]) -> RunManifest:
    path = Path(path)
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigValidationError(str(path), [f"无法读取文件: {e.strerror}"]) from e
    except ValidationError as e:
        raise ConfigValidationError(str(path), _describe(e)) from e

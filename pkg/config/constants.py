from enum import Enum

APP_NAME = "Admission ADP"
APP_VERSION = "1.0.0"


class SolverKind(Enum):
    MYOPIC = "myopic"
    VI = "vi"                # 全动作集 A(s)
    VI_STAR = "vi-star"      # 约简动作集 A*(s)
    ADP = "adp"
    ADP_STAR = "adp-star"

    @property
    def uses_reduced_actions(self) -> bool:
        return self in (SolverKind.MYOPIC, SolverKind.VI_STAR, SolverKind.ADP_STAR)

    @property
    def is_exact(self) -> bool:
        return self in (SolverKind.VI, SolverKind.VI_STAR)

    @property
    def is_adp(self) -> bool:
        return self in (SolverKind.ADP, SolverKind.ADP_STAR)


class ActionSource(Enum):
    FULL = "full"        # A(s)
    REDUCED = "reduced"  # A*(s)


class StreamPurpose(Enum):
    """随机数子流用途，与 SeedSequence 的 spawn_key 一一对应"""
    ARRIVALS = 1
    DURATIONS = 2
    LOS = 3
    ADP = 4


class SweepParameter(Enum):
    WAITING_COST = "c_d"
    OVERTIME_COST = "c_o"
    SHORTAGE_COST = "c_e"
    OR_CAPACITY = "B_j"       # 命令行中写作 B_1, B_2, ...
    SICU_CAPACITY = "R"
    LAMBDA = "lambda"
    BETA = "beta"


# 模型默认值
DEFAULT_TRUNCATION_THRESHOLD = 0.005
DEFAULT_DISCOUNT = 0.99

# 动作/状态规模保护
DEFAULT_MAX_STATES = 5_000_000
DEFAULT_MAX_FULL_ACTIONS = 200_000
DEFAULT_MAX_REDUCED_ACTIONS = 2_000_000      # 一次性物化 A*(s) 的上限 (值迭代)
DEFAULT_MAX_STREAMED_ACTIONS = 200_000_000   # 分块扫描 A*(s) 求 argmin 的上限
DEFAULT_ACTION_BLOCK_ROWS = 16_384
DEFAULT_MAX_STATE_ACTION_PAIRS = 150_000_000

# 值迭代
DEFAULT_STOP_RESIDUAL = 1e-6
DEFAULT_MAX_SWEEPS = 20_000
VALUE_TABLE_FORMAT_VERSION = 1
VALUE_SWEEP_CHUNK = 4_000_000       # 每块处理的状态-动作对数

# RLS-TD(λ)
DEFAULT_LAMBDA = 0.0
DEFAULT_BETA = 1.0
DEFAULT_TRAJECTORY_DEPTH = 25
DEFAULT_EPSILON = 0.01
DEFAULT_MAX_TRAJECTORIES = 200
SINGULAR_UPDATE_FLOOR = 1e-12
RELATIVE_CHANGE_GUARD = 1e-8
DEFAULT_RESYMMETRIZE_EVERY = 0
LEARNER_CHECKPOINT_VERSION = 1

# 仿真
DEFAULT_SCENARIO_COUNT = 10_000
DEFAULT_HORIZON_WEEKS = 100
DEFAULT_SEED = 20240101

# 环境变量
ENV_OUTPUT_DIR = "ADMISSION_OUTPUT_DIR"
ENV_DEFAULT_SEED = "ADMISSION_DEFAULT_SEED"
ENV_MAX_STATES = "ADMISSION_MAX_STATES"
ENV_MAX_ACTIONS = "ADMISSION_MAX_ACTIONS"
DEFAULT_OUTPUT_DIR = "runs"

# 退出码
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_GUARD_REFUSAL = 3

# CSV 表头
WEEKLY_CSV_COLUMNS = [
    "policy", "week", "waiting_list_size", "scheduled", "action",
    "c_p", "c_h_mean", "c_h_std", "c_mean",
    "o_mean", "o_std", "o_j_mean", "o_j_std", "e_mean", "e_std",
    "t_ms", "evaluated_actions", "full_actions",
]
AGGREGATE_CSV_COLUMNS = ["policy", "metric", "mean", "std"]
SWEEP_CSV_COLUMNS = ["parameter", "value", "seed", "policy", "metric", "mean", "std", "error"]
THETA_CSV_COLUMNS_PREFIX = ["policy", "week", "trajectories", "converged"]
WALL_TIME_COLUMNS = {"t_ms"}
WALL_TIME_METRICS = {"t_ms", "T_s"}

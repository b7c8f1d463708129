"""
动作空间

枚举完整可行动作集 A(s)，并按贪心填充构造约简动作集 A*(s)。
动作集以整数矩阵返回，每行一个动作，行序即规范序；
取 argmin 时第一个最小行胜出。决策时用 best_action 分块扫描 A*(s)，
不必一次物化整个动作集。
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np

from config.constants import (
    ActionSource,
    DEFAULT_ACTION_BLOCK_ROWS,
    DEFAULT_MAX_FULL_ACTIONS,
    DEFAULT_MAX_REDUCED_ACTIONS,
    DEFAULT_MAX_STREAMED_ACTIONS,
)
from core.errors import GuardRefusalError
from core.mdp_model import AdmissionMDP

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActionSetStats:
    full_count: int            # ‖A(s)‖，Python 大整数
    reduced_count: int         # ‖A*(s)‖ = Π(N_j+1)
    pool_sizes: tuple          # 各专科可选患者数 N_j


class ActionSpace:
    """一个 MDP 实例上的动作集构造器"""

    def __init__(self, mdp: AdmissionMDP,
                 max_full_actions: int = DEFAULT_MAX_FULL_ACTIONS,
                 max_reduced_actions: int = DEFAULT_MAX_REDUCED_ACTIONS,
                 max_streamed_actions: int = DEFAULT_MAX_STREAMED_ACTIONS):
        self.mdp = mdp
        self.max_full_actions = max_full_actions
        self.max_reduced_actions = max_reduced_actions
        self.max_streamed_actions = max_streamed_actions

        # 非强制行上可自由选择 0..n
        self.free_rows = np.flatnonzero(~mdp.due_mask)
        self.optional_mask = ~mdp.forced_mask

        # 每个专科的贪心填充顺序: 优先级降序，同分时 u 大者、w 大者、下标小者优先。
        # 专科内 v_j 相同，直接比较整数 u·w；推迟一周的优先级增量与 u 成正比
        self.fill_orders: List[np.ndarray] = []
        types = mdp.types
        for j in range(mdp.n_specialties):
            rows = np.flatnonzero(self.optional_mask & (mdp.specialty_of == j))
            keys = sorted(rows, key=lambda i: (-types[i].u * types[i].w, -types[i].u, -types[i].w, i))
            self.fill_orders.append(np.array(keys, dtype=np.int64))

    # ------------------------------------------------------------------
    # A(s)

    def full_action_count(self, state) -> int:
        state = self.mdp.as_vector(state)
        return math.prod(int(state[i]) + 1 for i in self.free_rows)

    def enumerate_full_actions(self, state) -> Iterator[np.ndarray]:
        """逐个产生 A(s) 中的动作，顺序与 full_action_matrix 的行序一致"""
        state = self.mdp.as_vector(state)
        base = np.where(self.mdp.due_mask, state, 0)
        ranges = [range(int(state[i]) + 1) for i in self.free_rows]
        for combo in itertools.product(*ranges):
            action = base.copy()
            action[self.free_rows] = combo
            yield action

    def full_action_matrix(self, state, limit: Optional[int] = None) -> np.ndarray:
        state = self.mdp.as_vector(state)
        limit = self.max_full_actions if limit is None else limit
        count = self.full_action_count(state)
        if count > limit:
            raise GuardRefusalError("完整动作集 A(s)", count, limit)
        shape = tuple(int(state[i]) + 1 for i in self.free_rows)
        actions = np.tile(np.where(self.mdp.due_mask, state, 0), (count, 1))
        if shape:
            actions[:, self.free_rows] = np.indices(shape).reshape(len(shape), -1).T
        return actions

    # ------------------------------------------------------------------
    # A*(s)

    def mandatory_schedule(self, state) -> np.ndarray:
        """基础动作 a′: 到期患者与推迟必然不划算的患者全部安排"""
        state = self.mdp.as_vector(state)
        return np.where(self.mdp.forced_mask, state, 0)

    def optional_pool_sizes(self, state) -> tuple:
        state = self.mdp.as_vector(state)
        return tuple(int(state[order].sum()) for order in self.fill_orders)

    def reduced_action_count(self, state) -> int:
        return math.prod(n + 1 for n in self.optional_pool_sizes(state))

    def _fill_tables(self, state, pools: tuple) -> List[np.ndarray]:
        """各专科 M_j = 0..N_j 时按填充顺序安排到每一行的人数"""
        tables = []
        for j, order in enumerate(self.fill_orders):
            counts = state[order]
            before = np.cumsum(counts) - counts
            totals = np.arange(pools[j] + 1)[:, None]
            tables.append(np.clip(totals - before[None, :], 0, counts[None, :]))
        return tables

    def _reduced_rows(self, state, pools: tuple, tables: List[np.ndarray], flat: np.ndarray) -> np.ndarray:
        """A*(s) 中规范序号为 flat 的各行"""
        actions = np.tile(self.mandatory_schedule(state), (len(flat), 1))
        combos = np.unravel_index(flat, tuple(n + 1 for n in pools))
        for j, order in enumerate(self.fill_orders):
            if len(order) == 0 or pools[j] == 0:
                continue
            actions[:, order] += tables[j][combos[j]]
        return actions

    def reduced_action_set(self, state, limit: Optional[int] = None) -> np.ndarray:
        """
        对每个 (M_1..M_J) 组合，在 a′ 之上安排各专科优先级最高的 M_j 名可选患者。
        行按 (M_1..M_J) 字典序排列。
        """
        state = self.mdp.as_vector(state)
        limit = self.max_reduced_actions if limit is None else limit
        pools = self.optional_pool_sizes(state)
        count = math.prod(n + 1 for n in pools)
        if count > limit:
            logger.debug("A*(s) 规模 %d 超过上限 %d, N_j=%s", count, limit, pools)
            raise GuardRefusalError("约简动作集 A*(s)", count, limit)
        return self._reduced_rows(state, pools, self._fill_tables(state, pools), np.arange(count))

    def iter_reduced_blocks(self, state, block_rows: int = DEFAULT_ACTION_BLOCK_ROWS) -> Iterator[np.ndarray]:
        """按规范序分块产生 A*(s)，拼接后与 reduced_action_set 相同"""
        state = self.mdp.as_vector(state)
        pools = self.optional_pool_sizes(state)
        count = math.prod(n + 1 for n in pools)
        if count > self.max_streamed_actions:
            raise GuardRefusalError("约简动作集 A*(s)", count, self.max_streamed_actions)
        tables = self._fill_tables(state, pools)
        for start in range(0, count, block_rows):
            yield self._reduced_rows(state, pools, tables, np.arange(start, min(start + block_rows, count)))

    # ------------------------------------------------------------------

    def action_matrix(self, state, source: ActionSource) -> np.ndarray:
        if source is ActionSource.REDUCED:
            return self.reduced_action_set(state)
        return self.full_action_matrix(state)

    def action_blocks(self, state, source: ActionSource) -> Iterator[np.ndarray]:
        if source is ActionSource.REDUCED:
            return self.iter_reduced_blocks(state)
        return iter([self.full_action_matrix(state)])

    def best_action(self, state, source: ActionSource,
                    score: Callable[[np.ndarray], np.ndarray]) -> Tuple[np.ndarray, float, int]:
        """
        逐块评分求 argmin，返回 (动作, 分数, 评估的动作数)。
        块内取第一个最小行，块间只有严格更小才替换，结果与整表 argmin 一致。
        """
        best, best_score, evaluated = None, math.inf, 0
        for actions in self.action_blocks(state, source):
            scores = score(actions)
            k = int(np.argmin(scores))
            if best is None or scores[k] < best_score:
                best, best_score = actions[k].copy(), float(scores[k])
            evaluated += len(actions)
        return best, best_score, evaluated

    def stats(self, state) -> ActionSetStats:
        pools = self.optional_pool_sizes(state)
        return ActionSetStats(
            full_count=self.full_action_count(state),
            reduced_count=math.prod(n + 1 for n in pools),
            pool_sizes=pools,
        )

    def priority_total(self, action) -> float:
        """动作的优先级总分 Σ v_j·u·w·m_juw"""
        return float(np.asarray(action) @ self.mdp.priorities)

    def specialty_totals(self, action) -> np.ndarray:
        return np.asarray(action) @ self.mdp.specialty_onehot

    def priority_comparable(self, action, other) -> bool:
        """各专科安排总数相同即可比"""
        return bool(np.array_equal(self.specialty_totals(action), self.specialty_totals(other)))


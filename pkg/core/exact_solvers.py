"""
精确求解器

在截断后的有限状态空间上做同步值迭代，并提供短视 (单周最优) 策略。
状态用混合进制整数编码 (基数 = 截断上限 + 1)，值表按编码下标存放。
"""

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from config.constants import (
    ActionSource, DEFAULT_MAX_STATES, DEFAULT_MAX_STATE_ACTION_PAIRS,
    DEFAULT_STOP_RESIDUAL, DEFAULT_MAX_SWEEPS, VALUE_TABLE_FORMAT_VERSION, VALUE_SWEEP_CHUNK,
)
from core.action_space import ActionSpace
from core.errors import GuardRefusalError, ModelDomainError, StateSpaceError
from core.mdp_model import AdmissionMDP

logger = logging.getLogger(__name__)


class StateSpace:
    """截断状态空间的混合进制编码"""

    def __init__(self, mdp: AdmissionMDP, max_states: int = DEFAULT_MAX_STATES):
        self.mdp = mdp
        self.size = mdp.state_space_size()
        if self.size > max_states:
            raise GuardRefusalError("状态空间", self.size, max_states)
        self.radices = (mdp.caps[mdp.group_of] + 1).astype(np.int64)
        self.strides = _strides(self.radices)

        # 决策后状态的 w=1 行恒为 0，只需对其余行编码
        carried = np.ones(mdp.size, dtype=bool)
        carried[mdp.first_rows] = False
        self.carried_rows = np.flatnonzero(carried)
        self.post_radices = self.radices[self.carried_rows]
        self.post_strides = _strides(self.post_radices)
        self.post_size = int(np.prod(self.post_radices))

    def encode(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        if np.any(states < 0) or np.any(states >= self.radices):
            raise StateSpaceError(f"状态超出截断空间: {states.tolist()}")
        return states @ self.strides

    def decode(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        return (codes[..., None] // self.strides) % self.radices

    def encode_post(self, posts: np.ndarray) -> np.ndarray:
        return posts[..., self.carried_rows] @ self.post_strides

    def decode_post(self, post_codes) -> np.ndarray:
        post_codes = np.asarray(post_codes, dtype=np.int64)
        posts = np.zeros(post_codes.shape + (self.mdp.size,), dtype=np.int64)
        posts[..., self.carried_rows] = (post_codes[..., None] // self.post_strides) % self.post_radices
        return posts

    def enumerate(self) -> np.ndarray:
        """全部状态 (size×Ξ, int16)，行号即编码"""
        codes = np.arange(self.size, dtype=np.int64)
        states = np.empty((self.size, self.mdp.size), dtype=np.int16)
        for i, (stride, radix) in enumerate(zip(self.strides, self.radices)):
            states[:, i] = (codes // stride) % radix
        return states


def _strides(radices: np.ndarray) -> np.ndarray:
    strides = np.ones(len(radices), dtype=np.int64)
    for i in range(len(radices) - 2, -1, -1):
        strides[i] = strides[i + 1] * radices[i + 1]
    return strides


def enumerate_state_space(mdp: AdmissionMDP, max_states: int = DEFAULT_MAX_STATES) -> np.ndarray:
    return StateSpace(mdp, max_states).enumerate()


@dataclass
class ValueTable:
    space: StateSpace
    values: np.ndarray
    iterations: int
    residual: float

    def value(self, state) -> float:
        return float(self.values[self.space.encode(state)])


@dataclass
class PolicyTable:
    space: StateSpace
    actions: np.ndarray  # size×Ξ, int16

    def action(self, state) -> np.ndarray:
        return self.actions[self.space.encode(state)].astype(np.int64)


class ValueIterationSolver:
    """同步 (Jacobi) 值迭代；所有状态的动作成本和决策后编码在求解前预先计算"""

    def __init__(self, mdp: AdmissionMDP, action_space: ActionSpace, state_space: StateSpace,
                 source: ActionSource):
        self.mdp = mdp
        self.action_space = action_space
        self.state_space = state_space
        self.source = source

        outcomes, probabilities = mdp.arrival_outcomes()
        self.outcome_codes = mdp.lift_arrivals(outcomes) @ state_space.strides
        self.outcome_probs = probabilities

        self._offsets: Optional[np.ndarray] = None
        self._costs: Optional[np.ndarray] = None
        self._post_index: Optional[np.ndarray] = None
        self._post_full_codes: Optional[np.ndarray] = None
        self._states: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # 单状态运算

    def q_values(self, state, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        state = self.mdp.as_vector(state)
        actions = self.action_space.action_matrix(state, self.source)
        costs = self.mdp.stage_costs(state, actions)
        post_codes = self.state_space.encode(self.mdp.post_action_states(state, actions))
        successors = post_codes[:, None] + self.outcome_codes[None, :]
        return actions, costs + self.mdp.gamma * (values[successors] @ self.outcome_probs)

    def bellman_backup(self, state, values: np.ndarray) -> Tuple[np.ndarray, float]:
        actions, q = self.q_values(state, values)
        best = int(np.argmin(q))
        return actions[best], float(q[best])

    # ------------------------------------------------------------------
    # 预计算

    def _action_counts(self, states: np.ndarray) -> np.ndarray:
        if self.source is ActionSource.REDUCED:
            pools = [states[:, order].sum(axis=1, dtype=np.float64) for order in self.action_space.fill_orders]
            counts = np.prod(np.stack(pools, axis=1) + 1, axis=1)
            limit = self.action_space.max_reduced_actions
        else:
            counts = np.prod(states[:, self.action_space.free_rows].astype(np.float64) + 1, axis=1)
            limit = self.action_space.max_full_actions
        if counts.max() > limit:
            raise GuardRefusalError(f"单状态动作集 ({self.source.value})", int(counts.max()), limit)
        return counts.astype(np.int64)

    def prepare(self, max_pairs: int = DEFAULT_MAX_STATE_ACTION_PAIRS):
        if self._offsets is not None:
            return
        started = time.perf_counter()
        states = self.state_space.enumerate()
        counts = self._action_counts(states)
        total = int(counts.sum())
        if total > max_pairs:
            raise GuardRefusalError("状态-动作对总数", total, max_pairs)

        offsets = np.zeros(len(states) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        costs = np.empty(total)
        post_index = np.empty(total, dtype=np.int32)
        for code in range(len(states)):
            state = states[code].astype(np.int64)
            actions = self.action_space.action_matrix(state, self.source)
            lo, hi = offsets[code], offsets[code + 1]
            costs[lo:hi] = self.mdp.stage_costs(state, actions)
            post_index[lo:hi] = self.state_space.encode_post(self.mdp.post_action_states(state, actions))

        post_states = self.state_space.decode_post(np.arange(self.state_space.post_size))
        self._post_full_codes = post_states @ self.state_space.strides
        self._states = states
        self._offsets = offsets
        self._costs = costs
        self._post_index = post_index
        logger.info("预计算完成: %d 个状态, %d 个状态-动作对, 用时 %.1fs",
                    len(states), total, time.perf_counter() - started)

    def _expected_post_values(self, values: np.ndarray) -> np.ndarray:
        """每个决策后状态 G 的 Σ_Ψ P(Ψ)·V(G+Ψ)"""
        codes = self._post_full_codes
        rows = max(1, VALUE_SWEEP_CHUNK // len(self.outcome_codes))
        expected = np.empty(len(codes))
        for lo in range(0, len(codes), rows):
            block = codes[lo:lo + rows]
            expected[lo:lo + rows] = values[block[:, None] + self.outcome_codes[None, :]] @ self.outcome_probs
        return expected

    def _state_chunks(self):
        offsets = self._offsets
        marks = np.searchsorted(offsets, np.arange(0, offsets[-1], VALUE_SWEEP_CHUNK), side="right") - 1
        bounds = np.unique(np.append(marks, len(offsets) - 1))
        return list(zip(bounds[:-1], bounds[1:]))

    def _sweep(self, values: np.ndarray, chunks, greedy: bool = False):
        expected = self._expected_post_values(values)
        updated = np.empty_like(values)
        chosen = np.empty(len(values), dtype=np.int32) if greedy else None
        offsets = self._offsets
        for s_lo, s_hi in chunks:
            lo, hi = offsets[s_lo], offsets[s_hi]
            post = self._post_index[lo:hi]
            q = self._costs[lo:hi] + self.mdp.gamma * expected[post]
            starts = offsets[s_lo:s_hi] - lo
            best = np.minimum.reduceat(q, starts)
            updated[s_lo:s_hi] = best
            if greedy:
                sizes = np.diff(offsets[s_lo:s_hi + 1])
                segment = np.repeat(np.arange(s_hi - s_lo), sizes)
                hits = np.flatnonzero(q <= np.repeat(best, sizes))
                _, first = np.unique(segment[hits], return_index=True)
                chosen[s_lo:s_hi] = post[hits[first]]
        return updated, chosen

    def _actions_from_posts(self, post_codes: np.ndarray) -> np.ndarray:
        """由状态与所选决策后状态反推动作: 未到期行 m = n - g_{w+1}，到期行 m = n"""
        states = self._states.astype(np.int64)
        posts = self.state_space.decode_post(post_codes)
        actions = states.copy()
        actions[:, self.mdp.age_source] -= posts[:, self.mdp.age_target]
        return actions.astype(np.int16)

    def solve(self, stop_residual: float = DEFAULT_STOP_RESIDUAL, max_sweeps: int = DEFAULT_MAX_SWEEPS,
              progress: Optional[Callable[[int, float], None]] = None) -> Tuple[ValueTable, PolicyTable]:
        self.prepare()
        gamma = self.mdp.gamma
        threshold = stop_residual * (1 - gamma) / gamma if gamma > 0 else float("inf")
        chunks = self._state_chunks()
        values = np.zeros(self.state_space.size)
        residual = float("inf")
        sweeps = 0
        while sweeps < max_sweeps:
            updated, _ = self._sweep(values, chunks)
            residual = float(np.max(np.abs(updated - values)))
            values = updated
            sweeps += 1
            if progress:
                progress(sweeps, residual)
            if sweeps % 100 == 0:
                logger.debug("值迭代第 %d 轮, 残差 %.3e", sweeps, residual)
            if residual < threshold:
                break
        else:
            logger.warning("值迭代达到最大轮数 %d，残差 %.3e 仍高于 %.3e", max_sweeps, residual, threshold)

        _, chosen = self._sweep(values, chunks, greedy=True)
        policy = PolicyTable(self.state_space, self._actions_from_posts(chosen))
        logger.info("值迭代结束: %d 轮, 残差 %.3e", sweeps, residual)
        return ValueTable(self.state_space, values, sweeps, residual), policy


def bellman_backup(mdp: AdmissionMDP, state, table: ValueTable, source: ActionSource,
                   action_space: Optional[ActionSpace] = None) -> Tuple[np.ndarray, float]:
    solver = ValueIterationSolver(mdp, action_space or ActionSpace(mdp), table.space, source)
    return solver.bellman_backup(state, table.values)


def value_iteration(mdp: AdmissionMDP, stop_residual: float = DEFAULT_STOP_RESIDUAL,
                    source: ActionSource = ActionSource.REDUCED,
                    max_sweeps: int = DEFAULT_MAX_SWEEPS,
                    action_space: Optional[ActionSpace] = None,
                    max_states: int = DEFAULT_MAX_STATES,
                    max_pairs: int = DEFAULT_MAX_STATE_ACTION_PAIRS,
                    progress: Optional[Callable[[int, float], None]] = None) -> Tuple[ValueTable, PolicyTable]:
    solver = ValueIterationSolver(mdp, action_space or ActionSpace(mdp), StateSpace(mdp, max_states), source)
    solver.prepare(max_pairs)
    return solver.solve(stop_residual, max_sweeps, progress)


def myopic_action(action_space: ActionSpace, state) -> np.ndarray:
    """a_0(s) = argmin_{a∈A*(s)} C(s,a)"""
    state = action_space.mdp.as_vector(state)
    action, _, _ = action_space.best_action(
        state, ActionSource.REDUCED, lambda actions: action_space.mdp.stage_costs(state, actions))
    return action


def myopic_policy(action_space: ActionSpace) -> Callable[[np.ndarray], np.ndarray]:
    return lambda state: myopic_action(action_space, state)


# ----------------------------------------------------------------------
# 值表缓存

def save_tables(path: Path, value_table: ValueTable, policy_table: PolicyTable,
                fingerprint: str, source: ActionSource) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format_version": VALUE_TABLE_FORMAT_VERSION,
        "fingerprint": fingerprint,
        "source": source.value,
        "iterations": value_table.iterations,
        "residual": value_table.residual,
        "radices": value_table.space.radices.tolist(),
    }
    with open(path, "wb") as handle:
        np.savez_compressed(handle, header=np.array(json.dumps(header)),
                            values=value_table.values, actions=policy_table.actions)
    logger.info("值表已保存: %s", path)
    return path


def load_tables(path: Path, mdp: AdmissionMDP, fingerprint: Optional[str] = None,
                max_states: int = DEFAULT_MAX_STATES) -> Tuple[ValueTable, PolicyTable, ActionSource]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        values = data["values"]
        actions = data["actions"]
    if header.get("format_version") != VALUE_TABLE_FORMAT_VERSION:
        raise ModelDomainError(f"值表格式版本不匹配: {header.get('format_version')}")
    if fingerprint is not None and header.get("fingerprint") != fingerprint:
        raise ModelDomainError(f"值表 {path} 与当前实例配置不一致")
    space = StateSpace(mdp, max_states)
    if header["radices"] != space.radices.tolist() or len(values) != space.size:
        raise ModelDomainError(f"值表 {path} 的状态空间与当前实例不一致")
    return (ValueTable(space, values, header["iterations"], header["residual"]),
            PolicyTable(space, actions), ActionSource(header["source"]))

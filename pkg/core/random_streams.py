"""
随机数子流管理

每个随机过程使用独立子流，子流由 (用途, 周, 附加下标...) 唯一确定，
因此增加策略或场景不会扰动其他抽样；同一计划下所有策略共享到达序列。
"""

import numpy as np

from config.constants import StreamPurpose


class StreamManager:
    """按用途派生互相独立、可复现的 numpy Generator"""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def generator(self, purpose: StreamPurpose, week: int, *indices: int) -> np.random.Generator:
        if not isinstance(purpose, StreamPurpose):
            raise ValueError(f"未知的随机过程: {purpose}")
        key = (purpose.value, int(week)) + tuple(int(i) for i in indices)
        return np.random.default_rng(np.random.SeedSequence(self.master_seed, spawn_key=key))

    def arrivals(self, week: int) -> np.random.Generator:
        return self.generator(StreamPurpose.ARRIVALS, week)

    def durations(self, week: int) -> np.random.Generator:
        return self.generator(StreamPurpose.DURATIONS, week)

    def los(self, week: int) -> np.random.Generator:
        return self.generator(StreamPurpose.LOS, week)

    def adp(self, week: int) -> np.random.Generator:
        return self.generator(StreamPurpose.ADP, week)

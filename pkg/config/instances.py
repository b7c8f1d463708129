"""
内置问题实例

small-2spec: 两专科小规模问题，可精确求解
cabg:        单专科冠脉搭桥，三个紧急程度组
multi-9spec: 九专科大规模问题，状态空间远超枚举能力
"""

from typing import Callable, Dict, List, Tuple

from .models import ProblemConfig, SpecialtyConfig, UnitCosts, UrgencyGroup


def _small_two_specialty() -> ProblemConfig:
    return ProblemConfig(
        name="small-2spec",
        specialties=[
            SpecialtyConfig(
                name="specialty-1", importance=1, or_capacity_hours=3,
                duration_mean_hours=2, duration_std_hours=2, los_mean_days=4, los_std_days=4,
                urgency_groups=[
                    UrgencyGroup(urgency=1, max_wait_weeks=4, arrival_rate_per_week=1.0),
                    UrgencyGroup(urgency=2, max_wait_weeks=2, arrival_rate_per_week=0.5),
                ],
            ),
            SpecialtyConfig(
                name="specialty-2", importance=2, or_capacity_hours=2,
                duration_mean_hours=4, duration_std_hours=4, los_mean_days=2, los_std_days=2,
                urgency_groups=[
                    UrgencyGroup(urgency=1, max_wait_weeks=3, arrival_rate_per_week=0.25),
                    UrgencyGroup(urgency=2, max_wait_weeks=2, arrival_rate_per_week=0.25),
                ],
            ),
        ],
        sicu_capacity_bed_days=7,
        or_availability_rate=1.0,
        sicu_availability_rate=1.0,
        costs=UnitCosts(surgery_per_priority_unit=50, waiting_per_priority_unit=100,
                        or_overtime_per_hour=400, sicu_shortage_per_bed_day=1000),
        discount=0.99,
        poisson_truncation_threshold=0.005,
    )


def _cabg() -> ProblemConfig:
    # 截断阈值 0.001 才能得到上限 9 / 13 / 5
    return ProblemConfig(
        name="cabg",
        specialties=[
            SpecialtyConfig(
                name="cardiac-surgery", importance=1, or_capacity_hours=40,
                duration_mean_hours=4, duration_std_hours=1.72, los_mean_days=2, los_std_days=2,
                urgency_groups=[
                    UrgencyGroup(urgency=1, max_wait_weeks=12, arrival_rate_per_week=3),
                    UrgencyGroup(urgency=2, max_wait_weeks=6, arrival_rate_per_week=5),
                    UrgencyGroup(urgency=6, max_wait_weeks=2, arrival_rate_per_week=1),
                ],
            ),
        ],
        sicu_capacity_bed_days=25,
        or_availability_rate=0.9,
        sicu_availability_rate=0.72,
        costs=UnitCosts(surgery_per_priority_unit=100, waiting_per_priority_unit=150,
                        or_overtime_per_hour=1500, sicu_shortage_per_bed_day=1500),
        discount=0.99,
        poisson_truncation_threshold=0.001,
    )


# 名称, v_j, (d̄, σd), (l̄, σl), B_j, [(u, W, 到达率, 支撑点个数)]
_NINE_SPECIALTIES: List[Tuple] = [
    ("ENT", 1, (1.23, 0.38), (0.10, 0.10), 48, [(1, 20, 10, 25)]),
    ("OBGYN", 2, (1.43, 0.44), (2, 2), 24, [(1, 15, 4, 15), (3, 6, 0.5, 4)]),
    ("ORTHO", 2, (1.78, 0.54), (1.5, 1.5), 48, [(1, 15, 10, 25), (3, 6, 2, 10)]),
    ("NEURO", 5, (2.67, 1.65), (2, 2), 8, [(1, 8, 2.5, 12)]),
    ("GEN", 1, (1.55, 0.67), (0.05, 0.05), 64, [(1, 20, 9, 20), (2, 15, 2, 10)]),
    ("OPHTH", 2, (0.63, 0.10), (0.05, 0.05), 32, [(1, 15, 1.5, 8)]),
    ("VASCULAR", 4, (2.00, 1.03), (3.5, 3.5), 16, [(1, 10, 1, 6), (2, 5, 2.5, 12), (4, 2, 0.5, 4)]),
    ("CARDIAC", 5, (4.00, 2.95), (2, 2), 8, [(1, 8, 0.25, 3), (2, 3, 1.25, 7), (6, 1, 0.5, 4)]),
    ("UROLOGY", 3, (1.07, 0.75), (0.8, 0.8), 8, [(1, 12, 2, 10), (2, 6, 0.5, 4)]),
]


def _multi_nine_specialty() -> ProblemConfig:
    specialties = [
        SpecialtyConfig(
            name=name, importance=importance, or_capacity_hours=capacity,
            duration_mean_hours=duration[0], duration_std_hours=duration[1],
            los_mean_days=los[0], los_std_days=los[1],
            urgency_groups=[
                # 表中给的是支撑点个数，上限 = 个数 - 1
                UrgencyGroup(urgency=u, max_wait_weeks=w, arrival_rate_per_week=rate, arrival_cap=support - 1)
                for u, w, rate, support in groups
            ],
        )
        for name, importance, duration, los, capacity, groups in _NINE_SPECIALTIES
    ]
    return ProblemConfig(
        name="multi-9spec",
        specialties=specialties,
        sicu_capacity_bed_days=105,
        or_availability_rate=0.6,
        sicu_availability_rate=0.6,
        costs=UnitCosts(surgery_per_priority_unit=50, waiting_per_priority_unit=200,
                        or_overtime_per_hour=1000, sicu_shortage_per_bed_day=1000),
        discount=0.99,
    )


class InstanceLibrary:
    """按名称取内置实例"""

    _builders: Dict[str, Callable[[], ProblemConfig]] = {
        "small-2spec": _small_two_specialty,
        "cabg": _cabg,
        "multi-9spec": _multi_nine_specialty,
    }

    @classmethod
    def names(cls) -> List[str]:
        return list(cls._builders)

    @classmethod
    def get(cls, name: str) -> ProblemConfig:
        try:
            return cls._builders[name]()
        except KeyError:
            raise KeyError(f"未知的内置实例: {name}，可选: {', '.join(cls._builders)}") from None

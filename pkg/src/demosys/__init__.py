"""Exact norms, fundamental functions and regime checks for the F_l systems."""

from .indexing import (
    DyadicInterval,
    LevelPosition,
    level_boundary,
    rademacher_index,
    support_interval,
    to_flat,
    to_level,
)
from .rademacher import (
    SignSumDistribution,
    SumOptions,
    WeightedLevelGroup,
    absolute_moment,
    convolve,
    group_distribution,
    rademacher_eval,
    rademacher_sum_norm,
)
from .system import (
    Combination,
    DomainError,
    NormResult,
    SystemParams,
    combination_norm,
    eval_f,
    inner_product,
    norm_product,
    single_norm,
)

__version__ = "0.1.0"

# /engine/src/engine/config.py

from functools import lru_cache

from common.config import AppBaseSettings
from pydantic import Field


class EngineSettings(AppBaseSettings):
    """engine计算核心的特定配置。"""

    # 每个命令的基本搜索步数预算(分支定界节点数)
    BUDGET_STEPS: int = Field(default=10**7, gt=0)

    # 抽样模式下的样本数
    SAMPLE_COUNT: int = Field(default=10**5, gt=0)

    # 穷举公理检查允许的最大原子数
    EXHAUSTIVE_MAX_ATOMS: int = Field(default=12, gt=0, le=16)

    # 次可加性检查: 对数超过此值时改为抽样
    EXHAUSTIVE_PAIR_LIMIT: int = Field(default=2**22, gt=0)

    # 子测度整表(2^N项)允许的最大原子数
    MAX_TABULATED_ATOMS: int = Field(default=16, gt=0, le=24)

    # Cantor后端随机元素的最大节点深度
    CANTOR_SAMPLE_DEPTH: int = Field(default=6, gt=0, le=20)

    # Cantor后端构造子测度时, 加细后允许的最大"原子"数
    CANTOR_MAX_REFINED_ATOMS: int = Field(default=8, gt=0, le=16)

    # sequence_ratio允许的最大序列长度
    SEQUENCE_RATIO_CAP: int = Field(default=20, gt=0, le=24)

    # 对偶证据的穷举搜索长度
    DUAL_SEARCH_LENGTH: int = Field(default=4, gt=0, le=8)

    # 对偶证据穷举时最多检查的组合总数
    DUAL_SEARCH_COMBINATIONS: int = Field(default=20_000, gt=0)

    # 选择函数扫描序列的最大项数(保护错误的包络声明)
    MAX_SCAN: int = Field(default=10**6, gt=0)

    # 报告empirical集中所需的最少尾部选取数
    CONCENTRATION_MIN_TAIL: int = Field(default=4, gt=0, le=1000)

    # 穷举扫描的并行分片数
    JOBS: int = Field(default=1, gt=0, le=64)


@lru_cache
def get_settings() -> EngineSettings:
    """获取并缓存engine的配置实例。"""
    return EngineSettings()

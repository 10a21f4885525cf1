# /cli/src/cli/config.py

from functools import lru_cache

from common.config import AppBaseSettings
from pydantic import Field


class CLISettings(AppBaseSettings):
    """批处理命令行的特定配置。"""

    # 随机化检查的默认种子; 报告中总会打印实际使用的种子
    DEFAULT_SEED: int = Field(default=20240601, ge=0)

    # 流与序列检查的默认采样上限
    DEFAULT_HORIZON: int = Field(default=20, gt=0)

    # diagonal命令生成的随机零序列族的个数
    DIAGONAL_STREAMS: int = Field(default=100, gt=0)

    # 有限代数至少需要的原子数
    MIN_ATOMS: int = Field(default=2, ge=1)

    # kelley命令抽查弱对偶的随机序列个数
    WEAK_DUALITY_SAMPLES: int = Field(default=1000, ge=0)


@lru_cache
def get_settings() -> CLISettings:
    """获取并缓存CLI的配置实例。"""
    return CLISettings()

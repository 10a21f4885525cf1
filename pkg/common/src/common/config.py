# /common/src/common/config.py

from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class AppBaseSettings(BaseSettings):
    """
    engine与cli共享的基础配置。
    它会自动从环境变量或.env文件中加载配置。
    """

    # case_sensitive=False 表示环境变量名不区分大小写。
    # extra="ignore" 使各个包的配置可以共用同一个.env文件。
    model_config = SettingsConfigDict(
        case_sensitive=False, env_file=".env", extra="ignore"
    )

    # Literal类型确保了LOG_LEVEL只能是指定的几个值之一, 否则启动时会报错。
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "WARNING"

# /cli/tests/conftest.py

import pytest
from cli.config import get_settings as get_cli_settings
from engine.config import get_settings as get_engine_settings


@pytest.fixture(autouse=True)
def small_sample_budget(monkeypatch):
    """命令测试使用较小的抽样规模; 配置是缓存的, 前后都要清空。"""
    monkeypatch.setenv("SAMPLE_COUNT", "3000")
    get_engine_settings.cache_clear()
    get_cli_settings.cache_clear()
    yield
    get_engine_settings.cache_clear()
    get_cli_settings.cache_clear()

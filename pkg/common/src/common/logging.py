# /common/src/common/logging.py

import logging
import sys
from typing import Any, TextIO

import structlog

# 本模块安装的处理器带有此标记, 重复配置时只替换它们
_HANDLER_MARK = "_workbench_handler"


def _shared_processors() -> list[structlog.types.Processor]:
    return [
        # command等上下文变量由CLI绑定
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]


def configure_logging(log_level: str = "WARNING", stream: TextIO | None = None) -> None:
    """
    配置structlog, 以JSON行输出到标准logging。

    Args:
        log_level: 日志级别(e.g., "INFO", "DEBUG").
        stream: 输出流, 默认stderr; stdout只留给key=value报告。
    """
    chain = _shared_processors()
    structlog.configure(
        processors=[*chain, structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(
        structlog.stdlib.ProcessorFormatter(
            processor=structlog.processors.JSONRenderer(),
            foreign_pre_chain=chain,
        )
    )
    setattr(handler, _HANDLER_MARK, True)

    root = logging.getLogger()
    for old in [h for h in root.handlers if getattr(h, _HANDLER_MARK, False)]:
        root.removeHandler(old)
    root.addHandler(handler)
    root.setLevel(log_level.upper())

    # asyncio在to_thread分块时的调试输出没有用处
    logging.getLogger("asyncio").setLevel(logging.WARNING)


def get_logger(name: str) -> Any:
    """按模块名(`__name__`)获取structlog日志记录器。"""
    return structlog.get_logger(name)

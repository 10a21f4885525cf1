# /engine/src/engine/parallel.py

import asyncio
from typing import Callable, Optional, Sequence, TypeVar

from common.logging import get_logger

T = TypeVar("T")
R = TypeVar("R")

log = get_logger(__name__)


def chunked(items: Sequence[T], parts: int) -> list[Sequence[T]]:
    """将序列按顺序切成至多parts段, 保持原有顺序。"""
    if not items:
        return []
    parts = max(1, min(parts, len(items)))
    size = -(-len(items) // parts)
    return [items[i : i + size] for i in range(0, len(items), size)]


def run_partitioned(
    scan: Callable[[Sequence[T]], Optional[R]], items: Sequence[T], jobs: int = 1
) -> Optional[R]:
    """
    将一次穷举扫描分片执行, 返回第一个非None的结果(按分片顺序)。

    每个分片通过asyncio.to_thread在独立线程中运行同步扫描,
    再用asyncio.gather等待全部完成, 因此合并结果是确定性的。
    """
    if jobs <= 1 or len(items) < 2:
        return scan(items)

    chunks = chunked(items, jobs)

    async def _gather() -> list[Optional[R]]:
        return await asyncio.gather(*(asyncio.to_thread(scan, c) for c in chunks))

    results = asyncio.run(_gather())
    log.debug("Partitioned scan finished.", chunks=len(chunks), items=len(items))
    for result in results:
        if result is not None:
            return result
    return None

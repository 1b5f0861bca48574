"""
NocPerf - 注入轨迹读写

格式: 表头 `cycle,src,dst`, 每行一个注入事件, 十进制整数, `#` 开头为注释行.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable
import csv
import logging

from src.core.errors import TraceParseError

logger = logging.getLogger(__name__)

TRACE_HEADER = ("cycle", "src", "dst")


@dataclass(frozen=True)
class TraceEvent:
    """一次包注入"""
    cycle: int
    source: int
    destination: int


def _parse_int(text: str, column: str, line: int, path: str) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise TraceParseError(f"column '{column}' is not an integer: {text!r}", line, path)
    if value < 0:
        raise TraceParseError(f"column '{column}' must be non-negative, got {value}", line, path)
    return value


def load_trace(path: str | Path) -> list[TraceEvent]:
    """读取并校验轨迹文件; 空文件返回空列表"""
    path = Path(path)
    if not path.exists():
        raise TraceParseError(f"trace file not found: {path}", None, str(path))

    events: list[TraceEvent] = []
    header_seen = False
    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or not "".join(row).strip():
                continue
            if row[0].lstrip().startswith("#"):
                continue
            if not header_seen:
                if tuple(c.strip() for c in row) != TRACE_HEADER:
                    raise TraceParseError(
                        f"expected header '{','.join(TRACE_HEADER)}'", line_no, str(path)
                    )
                header_seen = True
                continue
            if len(row) != 3:
                raise TraceParseError(f"expected 3 columns, got {len(row)}", line_no, str(path))

            cycle = _parse_int(row[0], "cycle", line_no, str(path))
            source = _parse_int(row[1], "src", line_no, str(path))
            destination = _parse_int(row[2], "dst", line_no, str(path))
            if source == destination:
                raise TraceParseError(
                    f"source and destination are both node {source}", line_no, str(path)
                )
            if events and cycle < events[-1].cycle:
                raise TraceParseError(
                    f"events out of order: cycle {cycle} after {events[-1].cycle}", line_no, str(path)
                )
            events.append(TraceEvent(cycle, source, destination))

    logger.info(f"Loaded {len(events)} trace events from {path}")
    return events


def write_trace(path: str | Path, events: Iterable[TraceEvent]) -> int:
    """写出轨迹文件, 返回事件数"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for event in events:
            writer.writerow((event.cycle, event.source, event.destination))
            count += 1
    logger.info(f"Wrote {count} trace events to {path}")
    return count

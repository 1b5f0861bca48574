"""
NocPerf - 诊断事件系统
模型截断/饱和等情况通过诊断总线计数, 而不是静默处理
"""
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator
import logging

logger = logging.getLogger(__name__)


class DiagnosticType(str, Enum):
    """诊断类型"""
    # 解析模型
    P_ZERO_CLAMPED = "p_zero_clamped"
    SCV_FLOORED = "scv_floored"
    WAIT_FLOORED = "wait_floored"
    MOMENT_CLAMPED = "moment_clamped"
    LOAD_CLAMPED = "load_clamped"

    # 仿真
    QUEUE_SATURATED = "queue_saturated"

    # 突发估计
    WINDOW_FLAGGED = "window_flagged"


# GGeo下限截断在确定性服务下是常态, 只记DEBUG
_LOG_LEVELS = {
    DiagnosticType.MOMENT_CLAMPED: logging.DEBUG,
}


@dataclass
class Diagnostic:
    """诊断对象"""
    type: DiagnosticType
    data: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"type": self.type.value, "data": self.data}


class DiagnosticBus:
    """诊断总线 - 发布/订阅 + 计数"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._handlers: dict[DiagnosticType, list[Callable]] = {}
        self._global_handlers: list[Callable] = []
        self._counts: Counter[str] = Counter()
        self._initialized = True

    def subscribe(self, diagnostic_type: DiagnosticType, handler: Callable):
        """订阅特定诊断"""
        self._handlers.setdefault(diagnostic_type, []).append(handler)

    def subscribe_all(self, handler: Callable):
        """订阅所有诊断"""
        self._global_handlers.append(handler)

    def unsubscribe(self, diagnostic_type: DiagnosticType, handler: Callable):
        """取消订阅"""
        if handler in self._handlers.get(diagnostic_type, []):
            self._handlers[diagnostic_type].remove(handler)
        if handler in self._global_handlers:
            self._global_handlers.remove(handler)

    def emit(self, diagnostic: Diagnostic, count: int = 1):
        """发送诊断, count 为同一事件的重复次数"""
        self._counts[diagnostic.type.value] += count
        level = _LOG_LEVELS.get(diagnostic.type, logging.WARNING)
        logger.log(level, f"Diagnostic {diagnostic.type.value}: {diagnostic.data}")

        for handler in self._handlers.get(diagnostic.type, []):
            try:
                handler(diagnostic)
            except Exception as e:
                logger.error(f"Diagnostic handler error: {e}")

        for handler in self._global_handlers:
            try:
                handler(diagnostic)
            except Exception as e:
                logger.error(f"Global diagnostic handler error: {e}")

    def counts(self) -> dict[str, int]:
        """当前累计计数"""
        return dict(self._counts)

    def reset(self):
        """清零计数"""
        self._counts.clear()

    @contextmanager
    def capture(self) -> Iterator[dict[str, int]]:
        """捕获代码块内新增的诊断计数"""
        before = Counter(self._counts)
        captured: dict[str, int] = {}
        try:
            yield captured
        finally:
            for key, value in sorted(self._counts.items()):
                delta = value - before.get(key, 0)
                if delta:
                    captured[key] = delta

    def clear(self):
        """清除所有订阅和计数"""
        self._handlers.clear()
        self._global_handlers.clear()
        self._counts.clear()


# 全局诊断总线实例
diagnostic_bus = DiagnosticBus()


# 便捷函数
def emit_p_zero_clamped(class_id: Any, value: float, count: int = 1):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.P_ZERO_CLAMPED, {
        "class_id": str(class_id), "value": value
    }), count)

def emit_scv_floored(class_id: Any, value: float, count: int = 1):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.SCV_FLOORED, {
        "class_id": str(class_id), "value": value
    }), count)

def emit_wait_floored(class_id: Any, value: float, count: int = 1):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.WAIT_FLOORED, {
        "class_id": str(class_id), "value": value
    }), count)

def emit_moment_clamped(rate: float, scv: float, floor: float, count: int = 1):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.MOMENT_CLAMPED, {
        "rate": rate, "scv": scv, "floor": floor
    }), count)

def emit_load_clamped(queue: Any, load: float, count: int = 1):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.LOAD_CLAMPED, {
        "queue": str(queue), "load": load
    }), count)

def emit_queue_saturated(queue: Any, load: float):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.QUEUE_SATURATED, {
        "queue": str(queue), "load": load
    }))

def emit_window_flagged(window: int, key: Any, flag: str):
    diagnostic_bus.emit(Diagnostic(DiagnosticType.WINDOW_FLAGGED, {
        "window": window, "key": str(key), "flag": flag
    }))

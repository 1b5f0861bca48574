"""
诊断总线测试
"""
from src.core.events import (
    Diagnostic,
    DiagnosticBus,
    DiagnosticType,
    diagnostic_bus,
    emit_p_zero_clamped,
    emit_queue_saturated,
    emit_window_flagged,
)


def test_bus_is_singleton():
    assert DiagnosticBus() is diagnostic_bus


def test_emit_counts_per_type():
    emit_p_zero_clamped("c1", -0.1)
    emit_p_zero_clamped("c2", -0.2)
    emit_queue_saturated("3.inject", 1.2)
    assert diagnostic_bus.counts() == {"p_zero_clamped": 2, "queue_saturated": 1}

    diagnostic_bus.reset()
    assert diagnostic_bus.counts() == {}


def test_subscribers_receive_diagnostics():
    seen: list[Diagnostic] = []
    everything: list[Diagnostic] = []
    diagnostic_bus.subscribe(DiagnosticType.WINDOW_FLAGGED, seen.append)
    diagnostic_bus.subscribe_all(everything.append)

    emit_window_flagged(2, 5, "no_burst")
    emit_queue_saturated("0.cw", 1.0)

    assert [d.type for d in seen] == [DiagnosticType.WINDOW_FLAGGED]
    assert seen[0].to_dict() == {
        "type": "window_flagged",
        "data": {"window": 2, "key": "5", "flag": "no_burst"},
    }
    assert len(everything) == 2

    diagnostic_bus.unsubscribe(DiagnosticType.WINDOW_FLAGGED, seen.append)
    emit_window_flagged(3, 5, "no_burst")
    assert len(seen) == 1


def test_failing_handler_does_not_break_emit():
    def broken(diagnostic):
        raise RuntimeError("boom")

    diagnostic_bus.subscribe(DiagnosticType.QUEUE_SATURATED, broken)
    emit_queue_saturated("1.inject", 1.1)
    assert diagnostic_bus.counts()["queue_saturated"] == 1


def test_capture_reports_only_new_counts():
    emit_p_zero_clamped("before", -1.0)
    with diagnostic_bus.capture() as captured:
        emit_p_zero_clamped("inside", -1.0)
        emit_queue_saturated("q", 1.5)
    assert captured == {"p_zero_clamped": 1, "queue_saturated": 1}
    assert diagnostic_bus.counts()["p_zero_clamped"] == 2


def test_capture_without_diagnostics_is_empty():
    with diagnostic_bus.capture() as captured:
        pass
    assert captured == {}

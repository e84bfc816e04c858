import threading
import time

import pytest

from HypoKernel.errors import PointEvaluationError
from HypoKernel.evalManager import EvalManager
from HypoKernel.utils import RuntimeSettings, thread_cap


def slow_square(x):
    # later points finish first
    time.sleep(0.001 * (10 - x))
    return x * x


def test_results_in_input_order():
    manager = EvalManager(slow_square, threads=4)
    assert manager.run(list(range(10))) == [x * x for x in range(10)]


def test_empty_input():
    assert EvalManager(slow_square, threads=2).run([]) == []


def test_reports_lowest_failing_index():
    def evaluate(x):
        if x in (3, 7):
            raise ValueError(f"bad point {x}")
        return x

    with pytest.raises(PointEvaluationError) as info:
        EvalManager(evaluate, threads=3).run(list(range(10)))
    assert info.value.index == 3
    assert isinstance(info.value.cause, ValueError)


def test_status_callbacks():
    events = []
    lock = threading.Lock()

    def record(event, index):
        with lock:
            events.append((event, index))

    manager = EvalManager(lambda x: x, threads=2)
    manager.status_callbacks.append(record)
    manager.run([0, 1, 2])
    assert sorted(i for e, i in events if e == "point_added") == [0, 1, 2]
    assert sorted(i for e, i in events if e == "point_done") == [0, 1, 2]


def test_manager_is_reusable():
    manager = EvalManager(lambda x: -x, threads=2)
    assert manager.run([1, 2]) == [-1, -2]
    assert manager.run([3]) == [-3]
    assert not manager.running


def test_thread_cap_environment(monkeypatch):
    settings = RuntimeSettings(threads=6)
    monkeypatch.delenv("HYPOKERNEL_THREADS", raising=False)
    assert thread_cap(settings) == 6
    monkeypatch.setenv("HYPOKERNEL_THREADS", "2")
    assert thread_cap(settings) == 2
    monkeypatch.setenv("HYPOKERNEL_THREADS", "64")
    assert thread_cap(settings) == 6
    monkeypatch.setenv("HYPOKERNEL_THREADS", "zero")
    assert thread_cap(settings) == 6
    monkeypatch.setenv("HYPOKERNEL_THREADS", "0")
    assert thread_cap(settings) == 6

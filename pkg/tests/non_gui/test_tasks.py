# test_tasks.py
import json
import time

import numpy as np
import pytest

from integrator import Trajectory
from pathspace import Grid
from tasks import ReportCollector, TrajectorySaveTask, VerifyTask, error_report, run_plan
from trajectory_io import read_trajectory
from verify import FAIL, PASS, VerificationReport


def make_report(name, verdict=PASS):
    return VerificationReport(name, {}, {}, {}, {}, {"ok": verdict == PASS}, verdict, [], 0.0)


def slow_test(name, delay):
    def run():
        time.sleep(delay)
        return make_report(name)

    return run


def broken_test():
    raise RuntimeError("boom")


@pytest.mark.non_gui
def test_sequential_plan_keeps_order():
    plan = [("a", slow_test("a", 0.0)), ("b", slow_test("b", 0.0))]
    reports = run_plan(plan, workers=1)
    assert [r.test_name for r in reports] == ["a", "b"]
    assert all(r.passed for r in reports)


@pytest.mark.non_gui
def test_parallel_plan_keeps_request_order():
    plan = [("first", slow_test("first", 0.3)), ("second", slow_test("second", 0.0)), ("third", slow_test("third", 0.1))]
    reports = run_plan(plan, workers=3)
    assert [r.test_name for r in reports] == ["first", "second", "third"]


@pytest.mark.non_gui
@pytest.mark.parametrize("workers", [1, 2])
def test_raising_test_becomes_failed_report(workers):
    reports = run_plan([("fine", slow_test("fine", 0.0)), ("broken", broken_test)], workers=workers)
    broken = reports[1]
    assert broken.test_name == "broken"
    assert broken.verdict == FAIL
    assert broken.criteria == {"completed": False}
    assert "RuntimeError: boom" in broken.note
    assert reports[0].passed


@pytest.mark.non_gui
def test_collector_fills_in_missing_reports():
    collector = ReportCollector(["x", "y"])
    collector.submit(1, make_report("y"))
    reports = collector.ordered()
    assert reports[0].verdict == FAIL
    assert reports[0].note == "task did not report back"
    assert reports[1].passed


@pytest.mark.non_gui
def test_verify_task_submits_at_its_index():
    collector = ReportCollector(["only"])
    VerifyTask(0, "only", lambda: make_report("only"), collector).run()
    assert collector.ordered()[0].passed


@pytest.mark.non_gui
def test_error_report_shape():
    report = error_report("yosida", "ValueError: bad", wall_time=1.5)
    assert report.verdict == FAIL
    assert report.wall_time == 1.5
    assert report.seeds == []


def short_trajectory(frames=3):
    grid = Grid(7, np.array([0.5]), np.array([0.5]))
    states = np.full((frames, grid.M, 1), 0.5)
    return Trajectory(
        times=np.arange(frames) * 0.01, states=states, penalty_accum=np.zeros_like(states),
        grid=grid, dt=1e-3, record_every=10, n=10.0, seed=4,
        descriptor=json.dumps({"grid": {"M": grid.M, "a": [0.5], "b": [0.5]}}),
    )


@pytest.mark.non_gui
def test_trajectory_save_task_writes_and_reports(tmp_path):
    results = []
    target = tmp_path / "viewer" / "run.rstr"
    TrajectorySaveTask(short_trajectory(), target, lambda path, error: results.append((path, error))).run()
    assert results == [(target, "")]
    assert len(read_trajectory(target)) == 3


@pytest.mark.non_gui
def test_trajectory_save_task_reports_errors(tmp_path):
    results = []
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory")
    task = TrajectorySaveTask(short_trajectory(), blocker / "run.rstr", lambda path, error: results.append((path, error)))
    task.run()
    assert len(results) == 1
    path, error = results[0]
    assert path is None
    assert error
    TrajectorySaveTask(short_trajectory(), blocker / "run.rstr").run()

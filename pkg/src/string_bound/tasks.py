"""
tasks.py

QRunnable-based tasks for work that must not block the caller: writing a
snapshot of the viewer's recorded frames to disk, and running verification
tests in parallel. A small reducer collects test reports; tests may finish in any
order, and the reducer hands reports back in the order they were requested.
"""

import logging
import threading
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from PyQt5.QtCore import QRunnable, QThreadPool

from integrator import Trajectory
from trajectory_io import write_trajectory
from verify import FAIL, VerificationReport

# Set up a logger for this module.
logger = logging.getLogger(__name__)

TestPlan = Sequence[Tuple[str, Callable[[], VerificationReport]]]


SaveCallback = Callable[[Optional[Path], str], None]


class TrajectorySaveTask(QRunnable):
    """
    Writes a trajectory snapshot to a .rstr file off the GUI thread.

    The trajectory is taken by value when the task is built, so frames the
    viewer records afterwards do not leak into the file. on_done receives
    (target, "") on success and (None, message) on failure.

    Usage:
        task = TrajectorySaveTask(traj, out_dir / "run.rstr", viewer.handle_save_result)
        QThreadPool.globalInstance().start(task)
    """

    def __init__(self, traj: Trajectory, target: Path, on_done: Optional[SaveCallback] = None) -> None:
        super().__init__()
        self.traj = traj
        self.target = Path(target)
        self.on_done = on_done

    def run(self):
        try:
            self.target.parent.mkdir(parents=True, exist_ok=True)
            write_trajectory(self.traj, self.target)
        except Exception as e:
            logger.error("Saving %d frames to %s failed: %s", len(self.traj), self.target, e)
            result = (None, f"{type(e).__name__}: {e}")
        else:
            logger.info("Saved %d frames to %s", len(self.traj), self.target)
            result = (self.target, "")
        if self.on_done is not None:
            self.on_done(*result)


class ReportCollector:
    """Thread-safe store of finished reports, keyed by request position."""

    def __init__(self, names: Sequence[str]) -> None:
        self._names = list(names)
        self._reports: Dict[int, VerificationReport] = {}
        self._lock = threading.Lock()

    def submit(self, index: int, report: VerificationReport) -> None:
        with self._lock:
            self._reports[index] = report
            logger.debug(
                "Collected report %d/%d (%s: %s)",
                len(self._reports), len(self._names), report.test_name, report.verdict,
            )

    def ordered(self) -> List[VerificationReport]:
        """Reports in request order; missing ones are reported as failures."""
        with self._lock:
            result = []
            for index, name in enumerate(self._names):
                report = self._reports.get(index)
                if report is None:
                    report = error_report(name, "task did not report back")
                result.append(report)
            return result


def error_report(name: str, message: str, wall_time: float = 0.0) -> VerificationReport:
    """A failed report standing in for a test that raised."""
    return VerificationReport(
        test_name=name,
        config={},
        estimates={},
        stderrs={},
        thresholds={},
        criteria={"completed": False},
        verdict=FAIL,
        seeds=[],
        wall_time=wall_time,
        note=message,
    )


class VerifyTask(QRunnable):
    """
    A QRunnable task that executes one verification test in the background.

    Attributes:
        index (int): Position of the test in the requested plan.
        name (str): Test name, used when the test raises.
        test_func (Callable): Runs the test and returns its report.
        collector (ReportCollector): Where the report goes.

    Usage:
        task = VerifyTask(0, "yosida", lambda: verify_yosida(...), collector)
        pool.start(task)
    """

    def __init__(
        self,
        index: int,
        name: str,
        test_func: Callable[[], VerificationReport],
        collector: ReportCollector,
    ) -> None:
        super().__init__()
        self.index = index
        self.name = name
        self.test_func = test_func
        self.collector = collector

    def run(self):
        """
        Execute the test. Exceptions are logged and turned into a failed
        report so the reducer always hears from every task.
        """
        started = time.perf_counter()
        try:
            report = self.test_func()
        except Exception as e:
            logger.error("VerifyTask '%s' encountered an error: %s", self.name, e, exc_info=True)
            report = error_report(self.name, f"{type(e).__name__}: {e}", time.perf_counter() - started)
        self.collector.submit(self.index, report)


def run_plan(plan: TestPlan, workers: int = 1) -> List[VerificationReport]:
    """
    Run the named tests, up to workers at a time, and return their reports
    in plan order.

    With workers <= 1 the tests run one after another on the calling thread.
    """
    names = [name for name, _ in plan]
    collector = ReportCollector(names)
    tasks = [VerifyTask(i, name, func, collector) for i, (name, func) in enumerate(plan)]
    if workers <= 1:
        for task in tasks:
            task.run()
        return collector.ordered()

    pool = QThreadPool()
    pool.setMaxThreadCount(workers)
    logger.info("Running %d verification tests on %d workers", len(tasks), workers)
    for task in tasks:
        task.setAutoDelete(False)
        pool.start(task)
    pool.waitForDone()
    return collector.ordered()

# test_simulation_worker.py
import numpy as np
import pytest

import sim_worker
from integrator import SimConfig
from pathspace import PathState, linear_profile
from sim_worker import SimulationWorker


@pytest.fixture
def worker(small_grid, unit_interval, zero_potential):
    cfg = SimConfig(
        grid=small_grid, dom=unit_interval, pot=zero_potential, n=100.0, dt=1e-3,
        t_end=1e-2, initial=PathState(linear_profile(small_grid), small_grid),
        record_every=10, seed=4,
    )
    w = SimulationWorker(cfg, frame_interval_ms=5)
    yield w
    if w.isRunning():
        w.stop()


@pytest.mark.gui
def test_worker_start_stop(worker, qtbot):
    worker.start()
    qtbot.waitUntil(worker.isRunning, timeout=2000)
    assert worker.is_running()

    worker.stop()
    qtbot.waitUntil(lambda: not worker.isRunning(), timeout=3000)
    assert not worker.is_running()


@pytest.mark.gui
def test_frames_advance_in_chunks(worker, qtbot):
    frames = []
    worker.frame_ready.connect(lambda values, time, penalty: frames.append((values, time, penalty)))
    worker.start()
    qtbot.waitUntil(lambda: len(frames) >= 2, timeout=5000)
    worker.stop()

    values, time, penalty = frames[0]
    assert values.shape == (15, 1) and penalty.shape == (15, 1)
    assert time == pytest.approx(1e-2)
    assert frames[1][1] == pytest.approx(2e-2)


@pytest.mark.gui
def test_error_signal_stops_worker(worker, qtbot, monkeypatch):
    def failing(cfg, rng=None):
        raise RuntimeError("integrator blew up")

    monkeypatch.setattr(sim_worker, "run", failing)
    with qtbot.waitSignal(worker.error_occurred, timeout=2000) as blocker:
        worker.start()
    assert blocker.args == ["integrator blew up"]
    qtbot.waitUntil(lambda: not worker.isRunning(), timeout=3000)


@pytest.mark.gui
def test_stop_before_run_is_safe(worker):
    worker.stop()
    assert not worker.is_running()
    assert np.array_equal(worker.cfg.initial.values, np.full((15, 1), 0.5))

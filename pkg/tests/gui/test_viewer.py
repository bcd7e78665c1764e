# test_viewer.py
import numpy as np
import pytest
from PyQt5.QtCore import QThreadPool
from PyQt5.QtGui import QCloseEvent

import ui
from config import default_run_config
from trajectory_io import read_trajectory
from ui import StringViewer


@pytest.fixture
def viewer(qtbot, tmp_path):
    config = default_run_config()
    config["output"]["directory"] = str(tmp_path)
    window = StringViewer(config)
    window.viewer_params.update(M=15, frame_interval_ms=0)
    qtbot.addWidget(window)
    yield window
    if window.worker is not None:
        window.worker.stop()
        window.worker = None


def prepared(viewer):
    viewer.sim_config = viewer.build_sim_config()
    grid = viewer.sim_config.grid
    viewer.times = [0.0]
    viewer.states = [np.array(viewer.sim_config.initial.values)]
    viewer.penalties = [np.zeros((grid.M, grid.d))]
    return grid


@pytest.mark.gui
def test_initial_state(viewer):
    assert viewer.start_button.isEnabled()
    assert not viewer.stop_button.isEnabled()
    assert viewer.status_state == "Ready"
    assert "Ready" in viewer.status_label.text()


@pytest.mark.gui
def test_start_and_stop(viewer, qtbot):
    saves = []
    viewer.save_trajectory = lambda background=False: saves.append((background, len(viewer.times)))
    viewer.start_simulation()
    assert not viewer.start_button.isEnabled()
    assert viewer.status_state == "Running"
    qtbot.waitUntil(lambda: len(viewer.times) > 2, timeout=5000)

    viewer.stop_simulation()
    QThreadPool.globalInstance().waitForDone(2000)
    assert viewer.worker is None
    assert viewer.start_button.isEnabled()
    assert viewer.status_state == "Stopped"
    assert saves and saves[0][0] and saves[0][1] > 2


@pytest.mark.gui
def test_invalid_params_do_not_start(viewer, monkeypatch):
    warnings = []
    monkeypatch.setattr(ui.QtWidgets.QMessageBox, "warning", lambda parent, title, text: warnings.append(text))
    viewer.viewer_params["dt"] = 1.0
    viewer.start_simulation()
    assert viewer.worker is None
    assert warnings and "1/(4n)" in warnings[0]


@pytest.mark.gui
def test_handle_frame_updates_statistics(viewer):
    grid = prepared(viewer)
    values = np.full((grid.M, 1), 0.5)
    values[7, 0] = 1.02
    viewer.handle_frame(values, 0.01, np.zeros((grid.M, 1)))
    assert len(viewer.times) == 2
    assert viewer.stats_labels["time"].text() == "0.0100"
    assert viewer.stats_labels["exterior"].text() == "2.000e-02"
    assert viewer.stats_labels["penalty"].text() == "0.000e+00"
    assert viewer.stats_labels["clusters"].text() == "1"


@pytest.mark.gui
def test_worker_error_sets_status(viewer):
    viewer.handle_worker_error("boom")
    assert viewer.status_state == "Worker Error"


@pytest.mark.gui
def test_save_trajectory_writes_recorded_frames(viewer, tmp_path):
    grid = prepared(viewer)
    for k in (1, 2):
        viewer.handle_frame(np.full((grid.M, 1), 0.4), 0.01 * k, np.zeros((grid.M, 1)))
    viewer.save_trajectory()
    assert viewer.last_saved.parent == tmp_path / "viewer"
    assert len(read_trajectory(viewer.last_saved)) == 3
    assert viewer.status_state == "FileSaved"


@pytest.mark.gui
def test_save_failure_sets_error_status(viewer, tmp_path):
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory")
    viewer.output_dir = blocker
    grid = prepared(viewer)
    viewer.handle_frame(np.full((grid.M, 1), 0.4), 0.01, np.zeros((grid.M, 1)))
    viewer.save_trajectory()
    assert viewer.last_saved is None
    assert viewer.status_state == "FileSaveError"


@pytest.mark.gui
def test_background_save_snapshots_frames(viewer, qtbot):
    grid = prepared(viewer)
    viewer.handle_frame(np.full((grid.M, 1), 0.4), 0.01, np.zeros((grid.M, 1)))
    viewer.save_trajectory(background=True)
    viewer.handle_frame(np.full((grid.M, 1), 0.3), 0.02, np.zeros((grid.M, 1)))
    QThreadPool.globalInstance().waitForDone(2000)
    qtbot.waitUntil(lambda: viewer.last_saved is not None, timeout=2000)
    assert len(read_trajectory(viewer.last_saved)) == 2


@pytest.mark.gui
def test_nothing_to_save(viewer):
    viewer.save_trajectory()
    assert viewer.last_saved is None


@pytest.mark.gui
def test_close_event_clears_worker(viewer):
    class DummyWorker:
        def stop(self):
            pass

    viewer.worker = DummyWorker()
    viewer.closeEvent(QCloseEvent())
    assert viewer.worker is None


@pytest.mark.gui
def test_planar_domain_draws_boundary(qtbot, tmp_path):
    config = default_run_config()
    config["domain"] = {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}
    config["grid"] = {"M": 15, "a": [0.0, 0.0], "b": [0.0, 0.0]}
    config["output"]["directory"] = str(tmp_path)
    window = StringViewer(config)
    qtbot.addWidget(window)
    assert window.canvas.ax.get_xlabel() == "u_0"
    assert len(window.canvas.ax.collections) >= 1

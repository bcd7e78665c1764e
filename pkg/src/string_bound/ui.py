"""
ui.py

This module implements the interactive viewer for StringBound. It shows the
current string as the integrator advances (against the domain boundary),
a statistics panel with the time, the largest exterior excursion, the
penalty mass of the last frame and the number of contact clusters, and a
status line. Start and Stop control a SimulationWorker thread; stopping
saves the recorded trajectory from the thread pool.

Usage:
    python main.py view [--config run.toml]
"""

# Standard library imports
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

# Third-party imports
import mplcursors
import numpy as np
from matplotlib.backends.backend_qt5agg import FigureCanvasQTAgg as FigureCanvas
from matplotlib.figure import Figure
from PyQt5 import QtCore, QtGui, QtWidgets
from PyQt5.QtCore import QThreadPool

# Local application imports
from builders import build_domain, build_potential
from config import default_run_config, load_viewer_settings
from dialog import ParamsDialog
from geometry import DomainSpec, bounding_box, boundary_distance, contains, distance
from integrator import SimConfig, Trajectory, default_collar
from observables import contact_record, default_gap_nodes
from pathspace import Grid, PathState, linear_profile
from sim_worker import SimulationWorker
from tasks import TrajectorySaveTask

logger = logging.getLogger(__name__)

FRAMES_PER_RECORD = 10


# -------- Matplotlib Canvas for PyQt --------
class MplCanvas(FigureCanvas):
    """
    MplCanvas embeds a Matplotlib figure into a Qt widget.
    """

    def __init__(
        self,
        parent: QtWidgets.QWidget = None,
        width: int = 8,
        height: int = 6,
        dpi: int = 100,
    ) -> None:
        self.fig = Figure(figsize=(width, height), dpi=dpi)
        self.ax = self.fig.add_subplot(111)
        super(MplCanvas, self).__init__(self.fig)
        self.setParent(parent)


def boundary_outline(dom: DomainSpec, resolution: int = 200):
    """(X, Y, signed distance) on the bounding box of a planar domain, for contouring."""
    lo, hi = bounding_box(dom)
    pad = 0.05 * (hi - lo)
    xs = np.linspace(lo[0] - pad[0], hi[0] + pad[0], resolution)
    ys = np.linspace(lo[1] - pad[1], hi[1] + pad[1], resolution)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X, Y], axis=-1)
    inside = np.asarray(contains(dom, pts, "closed"))
    signed = np.where(inside, np.asarray(boundary_distance(dom, pts)), -np.asarray(distance(dom, pts)))
    return X, Y, signed


# -------- Main Window Class --------
class StringViewer(QtWidgets.QMainWindow):
    """
    StringViewer is the main window of the viewer.

    The domain, potential and string endpoints come from the run
    configuration; n, dt, M, the seed and the frame pause come from the
    parameter dialog.
    """

    def __init__(self, run_config: Optional[Dict[str, Any]] = None) -> None:
        super().__init__()
        self.setWindowTitle("StringBound Viewer")
        self.setGeometry(100, 100, 1200, 800)

        self.run_config = run_config or default_run_config()
        self.dom = build_domain(self.run_config["domain"])
        self.pot = build_potential(self.run_config["potential"], self.dom)
        self.viewer_params = load_viewer_settings()
        self.output_dir = Path(self.run_config.get("output", {}).get("directory", "runs"))

        self.worker: Optional[SimulationWorker] = None
        self.sim_config: Optional[SimConfig] = None
        self.times: List[float] = []
        self.states: List[np.ndarray] = []
        self.penalties: List[np.ndarray] = []
        self.last_saved: Optional[Path] = None

        self.status_label = QtWidgets.QLabel()
        self.status_label.setTextFormat(QtCore.Qt.TextFormat.RichText)

        self.initUI()

    # ----- construction --------------------------------------------------- #
    def initUI(self) -> None:
        central_widget = QtWidgets.QWidget(self)
        self.setCentralWidget(central_widget)
        main_layout = QtWidgets.QVBoxLayout(central_widget)
        main_layout.setContentsMargins(10, 10, 10, 0)
        main_layout.setSpacing(10)

        logger.info("UI Initialization started...")

        # --- Toolbar (Control Buttons) ---
        toolbar_layout = QtWidgets.QHBoxLayout()
        self.start_button = QtWidgets.QPushButton("Start")
        self.start_button.clicked.connect(self.start_simulation)
        toolbar_layout.addWidget(self.start_button)
        self.stop_button = QtWidgets.QPushButton("Stop")
        self.stop_button.clicked.connect(self.stop_simulation)
        toolbar_layout.addWidget(self.stop_button)
        toolbar_layout.addStretch(1)
        self.config_button = QtWidgets.QPushButton("Parameters")
        self.config_button.clicked.connect(self.open_params_dialog)
        toolbar_layout.addWidget(self.config_button)
        main_layout.addLayout(toolbar_layout)
        self.start_button.setEnabled(True)
        self.stop_button.setEnabled(False)

        # --- Main Area: Plot and Statistics Panel ---
        main_area = QtWidgets.QHBoxLayout()
        main_layout.addLayout(main_area)
        self.canvas = MplCanvas(self, width=10, height=8, dpi=100)
        main_area.addWidget(self.canvas, 10)

        self.stats_panel = QtWidgets.QWidget(self)
        self.stats_layout = QtWidgets.QGridLayout(self.stats_panel)
        self.stats_labels: Dict[str, QtWidgets.QLabel] = {}
        for row, (key, title) in enumerate([
            ("time", "Time:"),
            ("exterior", "Exterior excursion:"),
            ("penalty", "Penalty mass:"),
            ("clusters", "Contact clusters:"),
        ]):
            self.stats_layout.addWidget(QtWidgets.QLabel(title), row, 0)
            value = QtWidgets.QLabel("")
            self.stats_layout.addWidget(value, row, 1)
            self.stats_labels[key] = value
        self.stats_layout.setRowStretch(4, 1)
        main_area.addWidget(self.stats_panel, 2)

        self.setup_plot_axes()

        # --- Status Bar (Custom One-line Status) ---
        status_layout = QtWidgets.QHBoxLayout()
        status_layout.setContentsMargins(0, 0, 0, 10)
        self.status_label.setAlignment(QtCore.Qt.AlignLeft | QtCore.Qt.AlignVCenter)
        status_layout.addWidget(self.status_label)
        status_layout.addStretch()
        main_layout.addLayout(status_layout)
        self.update_status_line("Ready")

        logger.info("UI Initialized")

    def setup_plot_axes(self) -> None:
        """Clear the axes and draw the domain boundary and an empty string."""
        ax = self.canvas.ax
        ax.clear()
        ax.grid(True)
        if self.dom.dim == 1:
            ax.set_title("String u(theta)")
            ax.set_xlabel("theta")
            ax.set_ylabel("u")
            ax.axhline(self.dom.lo[0], color="gray", linestyle="--")
            ax.axhline(self.dom.hi[0], color="gray", linestyle="--")
            ax.set_xlim(0.0, 1.0)
        else:
            ax.set_title("String in the plane of components 0 and 1")
            ax.set_xlabel("u_0")
            ax.set_ylabel("u_1")
            if self.dom.dim == 2:
                X, Y, signed = boundary_outline(self.dom)
                ax.contour(X, Y, signed, levels=[0.0], colors="gray", linestyles="--")
            ax.set_aspect("equal", adjustable="datalim")
        (self.line,) = ax.plot([], [], color="blue", linewidth=2, label="u")
        self.add_cursor()
        self.canvas.draw()

    def add_cursor(self) -> None:
        """Hover annotations with the node coordinates."""
        if hasattr(self, "cursor"):
            try:
                self.cursor.remove()
            except Exception:
                pass
        self.cursor = mplcursors.cursor(self.line, hover=True)

        @self.cursor.connect("add")
        def on_add(sel):
            sel.annotation.set_text(f"({sel.target[0]:.3f}, {sel.target[1]:.3f})")

    def open_params_dialog(self) -> None:
        dialog = ParamsDialog(self)
        dialog.setModal(True)
        dialog.show()

    # ----- status line ---------------------------------------------------- #
    @QtCore.pyqtSlot(str)
    def update_status_line(self, state: str) -> None:
        # Ensure this method runs on the main (UI) thread.
        if QtCore.QThread.currentThread() != self.thread():
            QtCore.QMetaObject.invokeMethod(
                self, "update_status_line", QtCore.Qt.QueuedConnection, QtCore.Q_ARG(str, state)
            )
            return
        state_map = {
            "Ready": ("green", "Ready"),
            "Running": ("orange", "Simulating..."),
            "Stopped": ("red", "Simulation stopped"),
            "FileSaved": ("green", "Trajectory saved"),
            "FileSaveError": ("red", "Trajectory save error"),
            "Worker Error": ("red", "Integrator error"),
        }
        color, message = state_map.get(state, ("black", state))
        self.status_state = state
        self.status_label.setText(
            f"<span style='color: {color}; font-size: 16px;'>&#9679;</span> "
            f"<span style='color: black; font-size: 16px;'>{message}</span>"
        )

    # ----- simulation control -------------------------------------------- #
    def build_sim_config(self) -> SimConfig:
        params = self.viewer_params
        grid_section = self.run_config["grid"]
        grid = Grid(int(params["M"]), np.array(grid_section["a"], dtype=float), np.array(grid_section["b"], dtype=float))
        dt = float(params["dt"])
        return SimConfig(
            grid=grid,
            dom=self.dom,
            pot=self.pot,
            n=float(params["n"]),
            dt=dt,
            t_end=FRAMES_PER_RECORD * dt,
            initial=PathState(linear_profile(grid), grid),
            record_every=FRAMES_PER_RECORD,
            seed=int(params["seed"]),
        )

    def start_simulation(self) -> None:
        if self.worker is not None:
            self.stop_simulation()
        try:
            self.sim_config = self.build_sim_config()
        except Exception as e:
            logger.error("Cannot start simulation: %s", e)
            QtWidgets.QMessageBox.warning(self, "Invalid Parameters", str(e))
            return
        grid = self.sim_config.grid
        self.times = [0.0]
        self.states = [np.array(self.sim_config.initial.values)]
        self.penalties = [np.zeros((grid.M, grid.d))]
        self.setup_plot_axes()
        self.show_frame(self.states[0], 0.0, self.penalties[0])

        self.worker = SimulationWorker(self.sim_config, int(self.viewer_params.get("frame_interval_ms", 0)))
        self.worker.frame_ready.connect(self.handle_frame)
        self.worker.error_occurred.connect(self.handle_worker_error)
        self.worker.start()
        self.start_button.setEnabled(False)
        self.stop_button.setEnabled(True)
        self.update_status_line("Running")

    def stop_simulation(self) -> None:
        if self.worker is not None:
            self.worker.stop()
            self.worker = None
            self.save_trajectory(background=True)
        self.start_button.setEnabled(True)
        self.stop_button.setEnabled(False)
        self.update_status_line("Stopped")

    def handle_worker_error(self, error_message: str) -> None:
        logger.error("Worker error: %s", error_message)
        self.update_status_line("Worker Error")

    def handle_frame(self, values: np.ndarray, time: float, penalty: np.ndarray) -> None:
        self.times.append(time)
        self.states.append(values)
        self.penalties.append(penalty)
        self.show_frame(values, time, penalty)

    def show_frame(self, values: np.ndarray, time: float, penalty: np.ndarray) -> None:
        grid = self.sim_config.grid
        full = PathState(values, grid).full()
        if self.dom.dim == 1:
            self.line.set_data(grid.full_theta, full[:, 0])
        else:
            self.line.set_data(full[:, 0], full[:, 1])
        self.canvas.ax.relim()
        self.canvas.ax.autoscale_view()
        self.canvas.draw_idle()

        exterior = float(np.max(np.asarray(distance(self.dom, values))))
        mass = grid.dtheta * float(np.sum(np.linalg.norm(penalty, axis=-1)))
        record = contact_record(time, values, self.dom, default_collar(grid), default_gap_nodes(grid))
        self.stats_labels["time"].setText(f"{time:.4f}")
        self.stats_labels["exterior"].setText(f"{exterior:.3e}")
        self.stats_labels["penalty"].setText(f"{mass:.3e}")
        self.stats_labels["clusters"].setText(str(record.cluster_count if record else 0))

    def recorded_trajectory(self) -> Optional[Trajectory]:
        if self.sim_config is None or not self.times:
            return None
        cfg = self.sim_config
        return Trajectory(
            times=np.array(self.times),
            states=np.stack(self.states),
            penalty_accum=np.stack(self.penalties),
            grid=cfg.grid,
            dt=cfg.dt,
            record_every=cfg.record_every,
            n=cfg.n,
            seed=cfg.seed,
            descriptor=cfg.descriptor(),
        )

    def save_trajectory(self, background: bool = False) -> None:
        """Write the recorded frames to <output>/viewer/<timestamp>.rstr."""
        traj = self.recorded_trajectory()
        if traj is None or len(traj) < 2:
            logger.info("No recorded frames to save.")
            return
        target = self.output_dir / "viewer" / f"{datetime.now().strftime('%Y-%m-%d_%H-%M-%S')}.rstr"
        task = TrajectorySaveTask(traj, target, self.handle_save_result)
        if background:
            QThreadPool.globalInstance().start(task)
        else:
            task.run()

    def handle_save_result(self, target: Optional[Path], error: str) -> None:
        if target is None:
            logger.error("Trajectory save failed: %s", error)
            self.update_status_line("FileSaveError")
            return
        self.last_saved = target
        self.update_status_line("FileSaved")

    def closeEvent(self, event: QtGui.QCloseEvent) -> None:
        """Stop the worker before the window closes."""
        if self.worker is not None:
            try:
                self.worker.stop()
            except Exception:
                pass
            self.worker = None
        event.accept()

"""
sim_worker.py - Simulation worker thread for the StringBound viewer

This module provides the SimulationWorker class, a QThread subclass that
advances the penalized string equation in chunks of record_every steps and
emits each new frame through a signal. It handles integrator errors and
supports an orderly shutdown.
"""

import logging
from dataclasses import replace
from typing import Optional

import numpy as np
from PyQt5.QtCore import QMutex, QMutexLocker, QObject, QThread, pyqtSignal

from integrator import SimConfig, run
from pathspace import PathState
from seeding import PURPOSE_NOISE, spawn_stream

logger = logging.getLogger(__name__)


class SimulationWorker(QThread):
    """
    Runs the integrator until stopped.

    Attributes:
        frame_ready (pyqtSignal): Emitted with the node values (M, d), the
        time and the penalty increment (M, d) of the last chunk.
        error_occurred (pyqtSignal): Emitted when the integrator fails; the
        worker stops afterwards.
    """

    frame_ready = pyqtSignal(object, float, object)
    error_occurred = pyqtSignal(str)

    def __init__(
        self,
        cfg: SimConfig,
        frame_interval_ms: int = 0,
        parent: Optional[QObject] = None,
    ) -> None:
        """
        Args:
            cfg (SimConfig): Model and step size; cfg.initial is the start
            and cfg.record_every the number of steps per emitted frame.
            frame_interval_ms (int): Pause between frames, to keep the
            display readable.
            parent (Optional[QObject]): An optional parent QObject.
        """
        super().__init__(parent)
        self.cfg = cfg
        self.frame_interval_ms = frame_interval_ms
        self.chunk = replace(
            cfg, t_end=cfg.record_every * cfg.dt, record_every=cfg.record_every, progress_every=0
        )
        self._mutex = QMutex()
        self._running = False

    def start(self, *args) -> None:
        # stop() may run before run() starts.
        with QMutexLocker(self._mutex):
            self._running = True
        super().start(*args)

    def run(self) -> None:
        logger.info("SimulationWorker thread started")
        rng = spawn_stream(self.cfg.seed, PURPOSE_NOISE, 0)
        state = self.cfg.initial
        time = 0.0
        try:
            while self.is_running():
                try:
                    traj = run(self.chunk.with_initial(state), rng)
                except Exception as e:
                    logger.error("Error in SimulationWorker: %s", e)
                    self.error_occurred.emit(str(e))
                    break
                state = PathState(traj.states[-1], self.cfg.grid)
                time += traj.times[-1]
                self.frame_ready.emit(
                    np.array(state.values), time, np.array(traj.penalty_accum[-1])
                )
                if self.frame_interval_ms:
                    self.msleep(self.frame_interval_ms)
        finally:
            with QMutexLocker(self._mutex):
                self._running = False
            logger.info("SimulationWorker thread stopped at t=%.4g", time)

    def is_running(self) -> bool:
        """Thread-safe running check."""
        with QMutexLocker(self._mutex):
            return self._running

    def stop(self) -> None:
        """
        Stop the worker in an orderly fashion: clear the running flag and
        wait up to 2 seconds before forcing termination.
        """
        logger.debug("Stopping SimulationWorker...")
        with QMutexLocker(self._mutex):
            self._running = False

        self.quit()
        if not self.wait(2000):  # 2 second timeout
            logger.warning("Forcing thread termination")
            self.terminate()

        logger.info("SimulationWorker stopped confirmed")

"""
plotting.py

Static rendering of a trajectory: a space-time heat map of the first
component with contact points overlaid, and the penalty mass per record.
"""

import logging
from typing import Optional

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from geometry import DomainSpec
from integrator import Trajectory, default_collar
from observables import contact_set

logger = logging.getLogger(__name__)


def trajectory_figure(traj: Trajectory, dom: DomainSpec, eps: Optional[float] = None) -> Figure:
    eps = default_collar(traj.grid) if eps is None else eps
    fig = Figure(figsize=(10, 7), dpi=100)
    heat_ax, mass_ax = fig.subplots(2, 1, sharex=True, gridspec_kw={"height_ratios": [3, 1]})

    theta = traj.grid.theta
    if len(traj):
        extent = (traj.times[0], traj.times[-1], theta[0], theta[-1])
        image = heat_ax.imshow(
            traj.states[:, :, 0].T, origin="lower", aspect="auto", extent=extent, cmap="viridis"
        )
        fig.colorbar(image, ax=heat_ax, label="u (component 0)")
        records = contact_set(traj, dom, eps)
        if records:
            times = np.concatenate([[r.time] * len(r.contact_nodes) for r in records])
            nodes = np.concatenate([[theta[j] for j, _ in r.contact_nodes] for r in records])
            heat_ax.scatter(times, nodes, s=4, c="red", label=f"contact (eps={eps:.3g})")
            heat_ax.legend(loc="upper right")
        mass_ax.plot(traj.times, traj.penalty_mass(), color="black", linewidth=1)
    heat_ax.set_ylabel("theta")
    heat_ax.set_title(f"n = {traj.n:g}, dt = {traj.dt:g}, seed = {traj.seed}")
    mass_ax.set_xlabel("time")
    mass_ax.set_ylabel("penalty mass")
    fig.tight_layout()
    return fig


def save_trajectory_plot(traj: Trajectory, dom: DomainSpec, path, eps: Optional[float] = None) -> None:
    fig = trajectory_figure(traj, dom, eps)
    FigureCanvasAgg(fig)
    try:
        fig.savefig(path)
        logger.info("Trajectory plot saved to %s", path)
    except OSError as e:
        logger.error("Error saving plot to %s: %s", path, e)
        raise

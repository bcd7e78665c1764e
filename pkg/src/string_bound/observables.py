"""
observables.py - Functionals of strings and trajectories

Contact-set extraction and first boundary hits, smooth cylinder
functionals F(w) = f(<l_1, w>, ..., <l_k, w>) with exact gradients, and the
statistics derived from them.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import GAP_FRACTION, MACRO_GAP
from geometry import DomainSpec, boundary_distance
from integrator import Trajectory
from pathspace import Grid, PathLike, PathState, path_values, weighted_mean

# Set up a module-level logger.
logger = logging.getLogger(__name__)


# ========================================================================== #
# Expression grammar for f
# ========================================================================== #
class Expr:
    """
    A smooth function of the direction coordinates s = (s_1, ..., s_k).

    value(s) and grad(s) act on arrays of shape (..., k). Expressions
    compose with +, *, unary minus and integer powers.
    """

    def value(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other) -> "Expr":
        return Sum(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Expr":
        return Sum(self, Scaled(_lift(other), -1.0))

    def __neg__(self) -> "Expr":
        return Scaled(self, -1.0)

    def __mul__(self, other) -> "Expr":
        if isinstance(other, (int, float)):
            return Scaled(self, float(other))
        return Product(self, other)

    __rmul__ = __mul__

    def __pow__(self, power: int) -> "Expr":
        return Power(self, int(power))


def _lift(item) -> Expr:
    return item if isinstance(item, Expr) else Const(float(item))


@dataclass(frozen=True)
class Const(Expr):
    c: float

    def value(self, s):
        return np.full(np.shape(s)[:-1], self.c)

    def grad(self, s):
        return np.zeros(np.shape(s))


@dataclass(frozen=True)
class Coord(Expr):
    """The i-th direction coordinate."""

    index: int

    def value(self, s):
        return np.asarray(s)[..., self.index]

    def grad(self, s):
        out = np.zeros(np.shape(s))
        out[..., self.index] = 1.0
        return out


@dataclass(frozen=True)
class Linear(Expr):
    """sum_i weights[i] s_i + offset."""

    weights: Tuple[float, ...]
    offset: float = 0.0

    def value(self, s):
        return np.asarray(s) @ np.array(self.weights) + self.offset

    def grad(self, s):
        return np.broadcast_to(np.array(self.weights), np.shape(s)).copy()


@dataclass(frozen=True)
class Sum(Expr):
    left: Expr
    right: Expr

    def value(self, s):
        return self.left.value(s) + self.right.value(s)

    def grad(self, s):
        return self.left.grad(s) + self.right.grad(s)


@dataclass(frozen=True)
class Scaled(Expr):
    inner: Expr
    factor: float

    def value(self, s):
        return self.factor * self.inner.value(s)

    def grad(self, s):
        return self.factor * self.inner.grad(s)


@dataclass(frozen=True)
class Product(Expr):
    left: Expr
    right: Expr

    def value(self, s):
        return self.left.value(s) * self.right.value(s)

    def grad(self, s):
        return (
            self.left.grad(s) * self.right.value(s)[..., None]
            + self.left.value(s)[..., None] * self.right.grad(s)
        )


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    power: int

    def value(self, s):
        return self.base.value(s) ** self.power

    def grad(self, s):
        if self.power == 0:
            return np.zeros(np.shape(s))
        outer = self.power * self.base.value(s) ** (self.power - 1)
        return outer[..., None] * self.base.grad(s)


@dataclass(frozen=True)
class Exp(Expr):
    inner: Expr

    def value(self, s):
        return np.exp(self.inner.value(s))

    def grad(self, s):
        return self.value(s)[..., None] * self.inner.grad(s)


@dataclass(frozen=True)
class Tanh(Expr):
    inner: Expr

    def value(self, s):
        return np.tanh(self.inner.value(s))

    def grad(self, s):
        sech2 = 1.0 - np.tanh(self.inner.value(s)) ** 2
        return sech2[..., None] * self.inner.grad(s)


# ========================================================================== #
# Cylinder functionals
# ========================================================================== #
@dataclass(frozen=True, eq=False)
class CylinderFunctional:
    """F(w) = f(<l_1, w>, ..., <l_k, w>) with directions l_i of shape (M, d)."""

    directions: np.ndarray
    f: Expr
    grid: Grid
    label: str = field(default="F")

    def __post_init__(self) -> None:
        directions = np.array(self.directions, dtype=float)
        if directions.ndim == 2:
            directions = directions[None]
        if directions.shape[1:] != (self.grid.M, self.grid.d):
            raise ValueError(
                f"directions have shape {directions.shape}, expected (k, {self.grid.M}, {self.grid.d})"
            )
        directions.setflags(write=False)
        object.__setattr__(self, "directions", directions)

    @property
    def k(self) -> int:
        return len(self.directions)

    def coordinates(self, w: PathLike) -> np.ndarray:
        """<l_i, w> for a path (M, d) or a batch (..., M, d): shape (..., k)."""
        values = path_values(w)
        return self.grid.dtheta * np.einsum("...jc,kjc->...k", values, self.directions)

    def value(self, w: PathLike) -> np.ndarray:
        return self.f.value(self.coordinates(w))

    def gradient_field(self, w: PathLike) -> np.ndarray:
        """The H-gradient sum_i d_i f l_i, shape (..., M, d)."""
        partials = self.f.grad(self.coordinates(w))
        return np.einsum("...k,kjc->...jc", partials, self.directions)

    def directional(self, w: PathLike, h: np.ndarray) -> np.ndarray:
        """d_h F(w) = sum_i d_i f <l_i, h>; h may be batched like w."""
        partials = self.f.grad(self.coordinates(w))
        along = self.grid.dtheta * np.einsum("...jc,kjc->...k", np.asarray(h), self.directions)
        return np.sum(partials * along, axis=-1)

    def check_bounded(self, paths: np.ndarray, limit: float = 1e8) -> Tuple[float, float]:
        """
        Largest |F| and |grad F| over the given paths.

        Raises:
            ValueError: If either is non-finite or exceeds limit.
        """
        values = np.abs(np.asarray(self.value(paths)))
        grads = np.linalg.norm(self.f.grad(self.coordinates(paths)), axis=-1)
        top_value, top_grad = float(np.max(values)), float(np.max(grads))
        if not (np.isfinite(top_value) and np.isfinite(top_grad)) or max(
            top_value, top_grad
        ) > limit:
            raise ValueError(
                f"functional {self.label} is not bounded on the sample: "
                f"max|F|={top_value:.3g}, max|grad f|={top_grad:.3g}"
            )
        return top_value, top_grad


def cylinder_eval(
    F: CylinderFunctional, path: PathLike
) -> Tuple[float, Callable[[np.ndarray], float]]:
    """Value F(path) and the map h -> d_h F(path)."""
    value = float(F.value(path))

    def derivative(h: np.ndarray) -> float:
        return float(F.directional(path, h))

    return value, derivative


def dirichlet_energy(
    F: CylinderFunctional, paths: np.ndarray, log_weights: Optional[np.ndarray] = None
) -> Tuple[float, float]:
    """
    Estimate of 1/2 E |grad F|^2 under the sampled measure.

    Returns:
        (estimate, standard error)
    """
    gradient = F.gradient_field(paths)
    sq = F.grid.dtheta * np.sum(gradient**2, axis=(-2, -1))
    if log_weights is None:
        log_weights = np.zeros(len(sq))
    mean, stderr = weighted_mean(sq, log_weights)
    return 0.5 * mean, 0.5 * stderr


# ========================================================================== #
# Contacts
# ========================================================================== #
@dataclass(frozen=True)
class ContactRecord:
    """Near-boundary nodes of one time slice, grouped into clusters."""

    time: float
    contact_nodes: List[Tuple[int, float]]
    clusters: List[List[int]]

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)


def default_gap_nodes(grid: Grid) -> int:
    return math.ceil(GAP_FRACTION * grid.M)


def first_hit(path: PathState, dom: DomainSpec, eps: float) -> Optional[int]:
    """Smallest node index within eps of the boundary, or None."""
    distances = np.asarray(boundary_distance(dom, path.values))
    hits = np.flatnonzero(distances <= eps)
    return int(hits[0]) if len(hits) else None


def _cluster(indices: Sequence[int], gap_nodes: int) -> List[List[int]]:
    clusters: List[List[int]] = []
    for index in indices:
        if clusters and index - clusters[-1][-1] <= gap_nodes:
            clusters[-1].append(index)
        else:
            clusters.append([index])
    return clusters


def contact_record(
    time: float, values: np.ndarray, dom: DomainSpec, eps: float, gap_nodes: int
) -> Optional[ContactRecord]:
    """Record for one slice, or None when no node is within eps (inclusive, as first_hit)."""
    distances = np.asarray(boundary_distance(dom, values))
    indices = np.flatnonzero(distances <= eps)
    if len(indices) == 0:
        return None
    nodes = [(int(j), float(distances[j])) for j in indices]
    return ContactRecord(float(time), nodes, _cluster(indices.tolist(), gap_nodes))


def contact_set(
    traj: Trajectory, dom: DomainSpec, eps: float, gap_nodes: Optional[int] = None
) -> List[ContactRecord]:
    """One ContactRecord per recorded time with at least one contact node."""
    gap_nodes = default_gap_nodes(traj.grid) if gap_nodes is None else gap_nodes
    records = []
    for time, values in zip(traj.times, traj.states):
        record = contact_record(time, values, dom, eps, gap_nodes)
        if record is not None:
            records.append(record)
    logger.debug(
        "Contact set: %d of %d slices with contacts (eps=%.3g)",
        len(records), len(traj), eps,
    )
    return records


def cluster_positions(record: ContactRecord, grid: Grid) -> List[float]:
    """theta-centroid of every cluster."""
    theta = grid.theta
    return [float(np.mean(theta[cluster])) for cluster in record.clusters]


def has_macroscopic_multiplicity(
    record: ContactRecord, grid: Grid, macro_gap: float = MACRO_GAP
) -> bool:
    """At least two clusters whose positions are more than macro_gap apart."""
    positions = cluster_positions(record, grid)
    return len(positions) >= 2 and max(positions) - min(positions) > macro_gap


def contact_records_frame(records: Sequence[ContactRecord], grid: Grid) -> pd.DataFrame:
    """One row per record: time, cluster count, positions, node count, closest distance."""
    rows = [
        {
            "time": record.time,
            "cluster_count": record.cluster_count,
            "positions": ";".join(f"{p:.6f}" for p in cluster_positions(record, grid)),
            "contact_nodes": len(record.contact_nodes),
            "min_distance": min(d for _, d in record.contact_nodes),
        }
        for record in records
    ]
    return pd.DataFrame(
        rows,
        columns=["time", "cluster_count", "positions", "contact_nodes", "min_distance"],
    )

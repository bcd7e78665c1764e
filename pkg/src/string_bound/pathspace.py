"""
pathspace.py - The discretised path space H = L^2([0,1]; R^d)

A string is stored on M interior nodes theta_j = j / (M + 1), with the
endpoints pinned at a and b. This module samples the Brownian bridge from
a to b exactly on the grid, samples and reweights the invariant measures
nu and nu_n, generates space-time white noise increments and evaluates the
norms used in the tightness estimates.

Arrays of paths have shape (..., M, d); grid inner products are
<f, g> = dtheta * sum_j f_j . g_j, which is the trapezoidal rule for
functions vanishing at the endpoints.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.fft import dst

from config import MIN_NODES, REJECTION_ATTEMPT_CAP, REJECTION_BATCH
from geometry import DomainSpec, contains
from potential import (
    PotentialSpec,
    YosidaHandle,
    potential_lower_bound,
    potential_value,
    yosida_eval,
)

# Set up a module-level logger.
logger = logging.getLogger(__name__)


class SamplerError(Exception):
    """Custom exception raised when sampling cannot proceed."""

    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Spatial grid of M interior nodes for strings pinned at a and b."""

    M: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        a = np.atleast_1d(np.array(self.a, dtype=float))
        b = np.atleast_1d(np.array(self.b, dtype=float))
        if self.M < MIN_NODES:
            raise SamplerError(f"grid needs M >= {MIN_NODES}, got {self.M}")
        if a.shape != b.shape or a.ndim != 1:
            raise SamplerError("endpoints a and b must be vectors of equal length")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def dtheta(self) -> float:
        return 1.0 / (self.M + 1)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(1, self.M + 1) * self.dtheta

    @property
    def full_theta(self) -> np.ndarray:
        return np.arange(self.M + 2) * self.dtheta

    def check_anchors(self, dom: DomainSpec) -> None:
        """The endpoints must lie strictly inside the domain."""
        if self.d != dom.dim:
            raise SamplerError(
                f"grid dimension {self.d} does not match domain dimension {dom.dim}"
            )
        if not (contains(dom, self.a, "open") and contains(dom, self.b, "open")):
            raise SamplerError("endpoints a and b must lie in the open domain")


@dataclass(frozen=True, eq=False)
class PathState:
    """A discretised string: node values (M, d) plus the grid it lives on."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.M, self.grid.d):
            raise SamplerError(
                f"path values have shape {values.shape}, "
                f"expected {(self.grid.M, self.grid.d)}"
            )
        if not np.all(np.isfinite(values)):
            raise SamplerError("path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def full(self) -> np.ndarray:
        """Node values including the pinned endpoints, shape (M + 2, d)."""
        return np.vstack([self.grid.a, self.values, self.grid.b])

    def in_domain(self, dom: DomainSpec) -> bool:
        return bool(np.all(contains(dom, self.values, "closed")))


@dataclass(frozen=True, eq=False)
class WeightedSample:
    path: PathState
    log_weight: float


@dataclass(frozen=True, eq=False)
class WeightedBatch:
    """A batch of paths (N, M, d) with log importance weights (N,)."""

    paths: np.ndarray
    log_weights: np.ndarray
    proposals: int
    accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0

    def sample(self, index: int, grid: Grid) -> WeightedSample:
        return WeightedSample(PathState(self.paths[index], grid), float(self.log_weights[index]))


PathLike = Union[PathState, np.ndarray]


# ========================================================================== #
# Grid functions
# ========================================================================== #
def linear_profile(grid: Grid) -> np.ndarray:
    """Linear interpolation from a to b on the interior nodes, (M, d)."""
    return grid.a + np.outer(grid.theta, grid.b - grid.a)


def sine_mode(grid: Grid, k: int, component: Optional[int] = None) -> np.ndarray:
    """
    Grid sampling of e_k(theta) = sqrt(2) sin(pi k theta).

    Returns shape (M,), or (M, d) with the mode placed in one component.
    """
    mode = np.sqrt(2.0) * np.sin(np.pi * k * grid.theta)
    if component is None:
        return mode
    field = np.zeros((grid.M, grid.d))
    field[:, component] = mode
    return field


def inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> np.ndarray:
    """Grid inner product over the node (and component) axes."""
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    product = f * g
    if product.ndim >= 2 and product.shape[-2:] == (grid.M, grid.d):
        summed = np.sum(product, axis=(-2, -1))
    else:
        summed = np.sum(product, axis=-1)
    return grid.dtheta * summed


def path_values(path: PathLike) -> np.ndarray:
    return path.values if isinstance(path, PathState) else np.asarray(path, dtype=float)


def in_domain(paths: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """For each path of a batch, whether every node lies in the closure."""
    return np.all(np.asarray(contains(dom, paths, "closed")), axis=-1)


# ========================================================================== #
# Sampling
# ========================================================================== #
def sample_bridge(grid: Grid, rng: np.random.Generator, size: Optional[int] = None):
    """
    Exact grid marginals of the Brownian bridge from a to b.

    Nodes are generated left to right, each conditioned on its left
    neighbour and on the pinned right endpoint, so the cost is O(M d) per
    path.

    Returns:
        A PathState when size is None, otherwise an array (size, M, d).
    """
    count = 1 if size is None else size
    h = grid.dtheta
    noise = rng.standard_normal((count, grid.M, grid.d))
    paths = np.empty((count, grid.M, grid.d))
    previous = np.broadcast_to(grid.a, (count, grid.d))
    for j in range(grid.M):
        remaining = 1.0 - j * h
        mean = previous + (grid.b - previous) * (h / remaining)
        std = np.sqrt(h * (remaining - h) / remaining)
        previous = mean + std * noise[:, j, :]
        paths[:, j, :] = previous
    if size is None:
        return PathState(paths[0], grid)
    return paths


def _node_energy(values: np.ndarray, grid: Grid, pot: PotentialSpec, n: Optional[float]):
    """Per-node phi or Phi_n values, endpoints included."""
    if n is None:
        inner_vals = potential_value(pot, values)
        ends = potential_value(pot, np.stack([grid.a, grid.b]))
    else:
        handle = YosidaHandle(pot, n)
        inner_vals, _ = yosida_eval(handle, values)
        ends, _ = yosida_eval(handle, np.stack([grid.a, grid.b]))
    return np.asarray(inner_vals), np.asarray(ends)


def potential_energy(
    path: PathLike,
    pot: PotentialSpec,
    mode: str = "exact_U",
    n: Optional[float] = None,
    grid: Optional[Grid] = None,
):
    """
    Trapezoidal quadrature of phi (mode "exact_U") or Phi_n (mode
    "yosida_Un") along the path, endpoints included.

    exact_U is +inf as soon as one node leaves the closed domain.
    """
    if mode not in ("exact_U", "yosida_Un"):
        raise SamplerError(f"unknown energy mode {mode!r}")
    if mode == "yosida_Un" and n is None:
        raise SamplerError("yosida_Un needs a penalization strength n")
    grid = path.grid if isinstance(path, PathState) else grid
    if grid is None:
        raise SamplerError("a grid is needed to integrate raw arrays")
    values = path_values(path)
    node_vals, ends = _node_energy(values, grid, pot, None if mode == "exact_U" else n)
    with np.errstate(invalid="ignore"):
        energy = grid.dtheta * (np.sum(node_vals, axis=-1) + 0.5 * np.sum(ends))
    energy = np.asarray(energy, dtype=float)
    return float(energy) if energy.ndim == 0 else energy


def _mode_strength(mode: str, n: Optional[float]) -> Optional[float]:
    if mode == "nu":
        return None
    if mode == "nu_n":
        if n is None or not n > 0:
            raise SamplerError("mode nu_n needs a positive n")
        return n
    raise SamplerError(f"unknown target measure {mode!r}")


def sample_invariant_batch(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    mode: str,
    strategy: str,
    rng: np.random.Generator,
    size: int,
    n: Optional[float] = None,
    attempt_cap: int = REJECTION_ATTEMPT_CAP,
) -> WeightedBatch:
    """
    Draw from the grid analogue of nu (mode "nu") or nu_n (mode "nu_n").

    The proposal is always the grid Brownian bridge mu.

    rejection: accept a proposal x with probability exp(-(U(x) - L)), L a
        lower bound of U; returned log weights are zero.
    importance: return plain bridge draws with log weight -U(x) (or
        -U_n(x)); paths leaving the domain get weight zero under nu.

    Raises:
        SamplerError: If rejection needs more than attempt_cap proposals.
    """
    grid.check_anchors(dom)
    strength = _mode_strength(mode, n)
    energy_mode = "exact_U" if strength is None else "yosida_Un"

    if strategy == "importance":
        paths = sample_bridge(grid, rng, size)
        energy = potential_energy(paths, pot, energy_mode, strength, grid)
        return WeightedBatch(paths, -np.atleast_1d(energy), size, size)
    if strategy != "rejection":
        raise SamplerError(f"unknown sampling strategy {strategy!r}")

    floor = potential_lower_bound(pot)
    kept = []
    accepted = proposals = 0
    while accepted < size:
        if proposals >= attempt_cap:
            raise SamplerError(
                f"rejection sampler exceeded {attempt_cap} proposals with "
                f"{accepted}/{size} accepted; acceptance probability too small"
            )
        batch = min(REJECTION_BATCH, attempt_cap - proposals)
        paths = sample_bridge(grid, rng, batch)
        energy = np.atleast_1d(potential_energy(paths, pot, energy_mode, strength, grid))
        uniform = rng.uniform(size=batch)
        with np.errstate(over="ignore"):
            keep = uniform < np.exp(-(energy - floor))
        kept.append(paths[keep])
        accepted += int(np.sum(keep))
        proposals += batch
    logger.debug(
        "Rejection sampler: %d/%d accepted (rate %.4g)", accepted, proposals,
        accepted / proposals,
    )
    paths = np.concatenate(kept)[:size]
    return WeightedBatch(paths, np.zeros(size), proposals, accepted)


def sample_invariant(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    mode: str,
    strategy: str,
    rng: np.random.Generator,
    n: Optional[float] = None,
    attempt_cap: int = REJECTION_ATTEMPT_CAP,
) -> WeightedSample:
    """Single draw from nu or nu_n; see sample_invariant_batch."""
    batch = sample_invariant_batch(
        grid, dom, pot, mode, strategy, rng, 1, n=n, attempt_cap=attempt_cap
    )
    return batch.sample(0, grid)


def partition_estimate(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    rng: np.random.Generator,
    size: int,
    n: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Estimate of the grid normalising constant Z = E_mu[exp(-U)] (or Z_n when
    n is given).

    Returns:
        (estimate, standard error)
    """
    grid.check_anchors(dom)
    paths = sample_bridge(grid, rng, size)
    mode = "exact_U" if n is None else "yosida_Un"
    weights = np.exp(-np.atleast_1d(potential_energy(paths, pot, mode, n, grid)))
    return float(np.mean(weights)), float(np.std(weights, ddof=1) / np.sqrt(size))


def noise_field(
    grid: Grid, dt: float, rng: np.random.Generator, size: Optional[int] = None
) -> np.ndarray:
    """
    Space-time white noise increments over one time step: independent
    N(0, dt / dtheta) entries per node and component.
    """
    if not dt > 0:
        raise SamplerError(f"time step must be positive, got {dt}")
    shape = (grid.M, grid.d) if size is None else (size, grid.M, grid.d)
    return rng.normal(0.0, np.sqrt(dt / grid.dtheta), size=shape)


# ========================================================================== #
# Importance weights
# ========================================================================== #
def normalized_weights(log_weights: np.ndarray) -> np.ndarray:
    log_weights = np.asarray(log_weights, dtype=float)
    top = np.max(log_weights)
    if not np.isfinite(top):
        raise SamplerError("all importance weights vanish")
    weights = np.exp(log_weights - top)
    return weights / np.sum(weights)


def effective_sample_size(log_weights: np.ndarray) -> float:
    """(sum w)^2 / sum w^2."""
    weights = normalized_weights(log_weights)
    return float(1.0 / np.sum(weights**2))


def weighted_mean(values: np.ndarray, log_weights: np.ndarray) -> Tuple[float, float]:
    """
    Self-normalised importance estimate of E[values] with its delta-method
    standard error.
    """
    weights = normalized_weights(log_weights)
    values = np.asarray(values, dtype=float)
    mean = float(np.sum(weights * values))
    stderr = float(np.sqrt(np.sum(weights**2 * (values - mean) ** 2)))
    return mean, stderr


# ========================================================================== #
# Norms
# ========================================================================== #
def _with_endpoints(path: PathLike) -> Tuple[np.ndarray, float]:
    """Full node values (..., M + 2, d) and the spacing."""
    if isinstance(path, PathState):
        return path.full(), path.grid.dtheta
    values = np.asarray(path, dtype=float)
    zeros = np.zeros(values.shape[:-2] + (1, values.shape[-1]))
    return np.concatenate([zeros, values, zeros], axis=-2), 1.0 / (values.shape[-2] + 1)


def sine_coefficients(values: np.ndarray) -> np.ndarray:
    """<f, e_k> for k = 1..M, per component: shape (..., M, d)."""
    values = np.asarray(values, dtype=float)
    h = 1.0 / (values.shape[-2] + 1)
    return h / np.sqrt(2.0) * dst(values, type=1, axis=-2)


def norm(
    path: PathLike, which: str = "L2", eta: float = 0.25, r: float = 2.0
):
    """
    Norms of a path (PathState, endpoints included) or of a difference of
    paths (raw array, endpoints taken as zero).

    which:
        "L2": trapezoidal L^2 norm.
        "Hminus1": sqrt(sum_k k^-2 <f, e_k>^2), truncated at k = M via the
            discrete sine transform.
        "sobolev": the W^{eta, r} norm, double-sum quadrature of
            int |x|^r + int int |x_s - x_t|^r / |s - t|^(r eta + 1).
    """
    if which == "L2":
        full, h = _with_endpoints(path)
        sq = np.sum(full**2, axis=-1)
        total = h * (np.sum(sq, axis=-1) - 0.5 * (sq[..., 0] + sq[..., -1]))
        result = np.sqrt(total)
    elif which == "Hminus1":
        values = path_values(path)
        coeffs = sine_coefficients(values)
        k = np.arange(1, values.shape[-2] + 1)
        result = np.sqrt(np.sum(np.sum(coeffs**2, axis=-1) / k**2, axis=-1))
    elif which == "sobolev":
        if not (0 < eta < 0.5) or r < 1:
            raise SamplerError(f"need 0 < eta < 1/2 and r >= 1, got eta={eta}, r={r}")
        full, h = _with_endpoints(path)
        nodes = full.shape[-2]
        weights = np.full(nodes, h)
        weights[[0, -1]] = h / 2
        theta = np.arange(nodes) * h
        local = np.sum(weights * np.linalg.norm(full, axis=-1) ** r, axis=-1)
        diff = np.linalg.norm(full[..., :, None, :] - full[..., None, :, :], axis=-1)
        gap = np.abs(theta[:, None] - theta[None, :])
        np.fill_diagonal(gap, np.inf)
        kernel = np.outer(weights, weights) / gap ** (r * eta + 1)
        seminorm = np.sum(diff**r * kernel, axis=(-2, -1))
        result = (local + seminorm) ** (1.0 / r)
    else:
        raise SamplerError(f"unknown norm {which!r}")
    result = np.asarray(result, dtype=float)
    return float(result) if result.ndim == 0 else result


def grid_laplacian(values: np.ndarray, grid: Grid, axis: int = -2) -> np.ndarray:
    """Second difference over the node axis with zero values at both ends."""
    values = np.asarray(values, dtype=float)
    padded = np.moveaxis(values, axis, -1)
    zero = np.zeros(padded.shape[:-1] + (1,))
    padded = np.concatenate([zero, padded, zero], axis=-1)
    second = (padded[..., :-2] - 2.0 * padded[..., 1:-1] + padded[..., 2:]) / grid.dtheta**2
    return np.moveaxis(second, -1, axis)


def bump(
    grid: Grid, center: float, width: float, component: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Smooth bump exp(-1 / (1 - r^2)), r = (theta - center) / width, placed in
    one component, with its exact second derivative.

    The support must leave the first and last nodes at zero.

    Returns:
        (h, h'') as (M, d) grid fields.
    """
    if center - width < grid.theta[0] or center + width > grid.theta[-1]:
        raise SamplerError(
            f"bump support ({center - width:g}, {center + width:g}) must lie in "
            f"[{grid.theta[0]:g}, {grid.theta[-1]:g}]"
        )
    r = (grid.theta - center) / width
    inside = np.abs(r) < 1
    q = np.where(inside, 1.0 - r**2, 1.0)
    g = -1.0 / q
    g1 = -2.0 * r / q**2
    g2 = -2.0 / q**2 - 8.0 * r**2 / q**3
    value = np.where(inside, np.exp(g), 0.0)
    second = np.where(inside, value * (g1**2 + g2) / width**2, 0.0)
    h = np.zeros((grid.M, grid.d))
    h2 = np.zeros((grid.M, grid.d))
    h[:, component] = value
    h2[:, component] = second
    return h, h2

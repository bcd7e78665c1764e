"""
geometry.py - Convex domains for StringBound

This module provides the DomainSpec value type for the bounded convex
domain O in which the string lives, together with the boundary geometry the
penalized equation needs: membership, Euclidean projection onto the closure,
distance, distance to the boundary and the inner normal.

All functions accept a single point of shape (d,) or a batch of shape
(..., d) and are vectorised over the leading axes.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from config import (
    BOUNDARY_TOL_FACTOR,
    ELLIPSOID_BISECTION_STEPS,
    MAX_DIM,
    PROJECTION_MAX_ITER,
    PROJECTION_TOL,
)

# Set up a module-level logger.
logger = logging.getLogger(__name__)


class DomainError(Exception):
    """Custom exception raised for invalid domains or geometry queries."""

    pass


class DomainKind(str, Enum):
    INTERVAL = "interval"
    BOX = "box"
    BALL = "ball"
    ELLIPSOID = "ellipsoid"
    POLYTOPE = "polytope"


def _frozen(values: Sequence[float]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """
    A bounded convex open set O in R^d.

    Use the named constructors (interval, box, ball, ellipsoid, polytope)
    rather than the raw initializer. Instances are immutable and validated
    at construction: parameters must describe a bounded set with nonempty
    interior.
    """

    kind: DomainKind
    dim: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    semiaxes: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None  # polytope rows a_i
    offsets: Optional[np.ndarray] = None  # polytope right-hand sides b_i
    _witness: np.ndarray = field(init=False, repr=False)
    _inradius: float = field(init=False, repr=False)
    _bbox: Tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_DIM:
            raise DomainError(f"dimension {self.dim} outside [1, {MAX_DIM}]")
        if self.kind in (DomainKind.INTERVAL, DomainKind.BOX):
            self._init_box()
        elif self.kind == DomainKind.BALL:
            self._init_ball()
        elif self.kind == DomainKind.ELLIPSOID:
            self._init_ellipsoid()
        elif self.kind == DomainKind.POLYTOPE:
            self._init_polytope()
        else:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        logger.debug("Constructed %s domain in R^%d", self.kind.value, self.dim)

    # ----- constructors -------------------------------------------------- #
    @classmethod
    def interval(cls, lo: float, hi: float) -> "DomainSpec":
        return cls(DomainKind.INTERVAL, 1, lo=_frozen([lo]), hi=_frozen([hi]))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "DomainSpec":
        return cls(DomainKind.BOX, len(lo), lo=_frozen(lo), hi=_frozen(hi))

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "DomainSpec":
        return cls(
            DomainKind.BALL, len(center), center=_frozen(center),
            radius=float(radius),
        )

    @classmethod
    def ellipsoid(
        cls, center: Sequence[float], semiaxes: Sequence[float]
    ) -> "DomainSpec":
        return cls(
            DomainKind.ELLIPSOID, len(center), center=_frozen(center),
            semiaxes=_frozen(semiaxes),
        )

    @classmethod
    def polytope(
        cls, normals: Sequence[Sequence[float]], offsets: Sequence[float]
    ) -> "DomainSpec":
        """Polytope {y : normals[i] . y <= offsets[i] for all i}."""
        normals = np.atleast_2d(np.array(normals, dtype=float))
        return cls(
            DomainKind.POLYTOPE, normals.shape[1], normals=_frozen(normals),
            offsets=_frozen(offsets),
        )

    def describe(self) -> Dict[str, Any]:
        """The [domain] config section that rebuilds this domain."""
        section: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind == DomainKind.INTERVAL:
            section.update(lo=float(self.lo[0]), hi=float(self.hi[0]))
        elif self.kind == DomainKind.BOX:
            section.update(lo=self.lo.tolist(), hi=self.hi.tolist())
        elif self.kind == DomainKind.BALL:
            section.update(center=self.center.tolist(), radius=self.radius)
        elif self.kind == DomainKind.ELLIPSOID:
            section.update(center=self.center.tolist(), semiaxes=self.semiaxes.tolist())
        else:
            section.update(a=self.normals.tolist(), b=self.offsets.tolist())
        return section

    # ----- validation ---------------------------------------------------- #
    def _set(self, name: str, value) -> None:
        object.__setattr__(self, name, value)

    def _init_box(self) -> None:
        if self.lo is None or self.hi is None:
            raise DomainError("box domains need lo and hi")
        if self.lo.shape != (self.dim,) or self.hi.shape != (self.dim,):
            raise DomainError("lo and hi must have the domain dimension")
        if not np.all(self.lo < self.hi):
            raise DomainError(f"need lo < hi componentwise, got {self.lo}, {self.hi}")
        self._set("_witness", _frozen((self.lo + self.hi) / 2))
        self._set("_inradius", float(np.min(self.hi - self.lo)) / 2)
        self._set("_bbox", (self.lo, self.hi))

    def _init_ball(self) -> None:
        if self.radius is None or not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        self._set("_witness", self.center)
        self._set("_inradius", self.radius)
        self._set("_bbox", (
            _frozen(self.center - self.radius), _frozen(self.center + self.radius)
        ))

    def _init_ellipsoid(self) -> None:
        if self.semiaxes is None or self.semiaxes.shape != (self.dim,):
            raise DomainError("ellipsoid needs one semiaxis per dimension")
        if not np.all(self.semiaxes > 0):
            raise DomainError(f"semiaxes must be positive, got {self.semiaxes}")
        self._set("_witness", self.center)
        self._set("_inradius", float(np.min(self.semiaxes)))
        self._set("_bbox", (
            _frozen(self.center - self.semiaxes),
            _frozen(self.center + self.semiaxes),
        ))

    def _init_polytope(self) -> None:
        A, b = self.normals, self.offsets
        if b is None or b.shape != (A.shape[0],):
            raise DomainError("polytope needs one offset per constraint row")
        row_norms = np.linalg.norm(A, axis=1)
        if np.any(row_norms == 0):
            raise DomainError("polytope constraint rows must be nonzero")
        # Bounding box: minimise and maximise each coordinate.
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for k in range(self.dim):
            for sign, target in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(self.dim)
                c[k] = sign
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * self.dim)
                if res.status == 3:
                    raise DomainError("polytope is unbounded")
                if res.status == 2:
                    raise DomainError("polytope is empty")
                if res.status != 0:
                    raise DomainError(f"bounding LP failed: {res.message}")
                target[k] = sign * res.fun
        # Chebyshev centre: the largest inscribed ball is the interior witness.
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        A_cheb = np.hstack([A, row_norms[:, None]])
        res = linprog(
            c, A_ub=A_cheb, b_ub=b,
            bounds=[(None, None)] * self.dim + [(0, None)],
        )
        if res.status != 0 or res.x[-1] <= 0:
            raise DomainError("polytope has empty interior")
        self._set("_witness", _frozen(res.x[:-1]))
        self._set("_inradius", float(res.x[-1]))
        self._set("_bbox", (_frozen(lo), _frozen(hi)))


# ========================================================================== #
# Helpers
# ========================================================================== #
def _as_points(dom: DomainSpec, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 and dom.dim == 1:
        y = y.reshape(1)
    if y.ndim == 0 or y.shape[-1] != dom.dim:
        raise DomainError(
            f"point dimension {y.shape[-1] if y.ndim else 0} does not match "
            f"domain dimension {dom.dim}"
        )
    return y


def _unit_normals(dom: DomainSpec) -> np.ndarray:
    return dom.normals / np.linalg.norm(dom.normals, axis=1)[:, None]


def diameter(dom: DomainSpec) -> float:
    """Diameter of O (for polytopes: diagonal of the bounding box)."""
    if dom.kind in (DomainKind.INTERVAL, DomainKind.BOX):
        return float(np.linalg.norm(dom.hi - dom.lo))
    if dom.kind == DomainKind.BALL:
        return 2.0 * dom.radius
    if dom.kind == DomainKind.ELLIPSOID:
        return 2.0 * float(np.max(dom.semiaxes))
    lo, hi = dom._bbox
    return float(np.linalg.norm(hi - lo))


def inradius(dom: DomainSpec) -> float:
    """Radius of the largest ball contained in O."""
    return dom._inradius


def interior_witness(dom: DomainSpec) -> np.ndarray:
    """A point of O (the centre, or the Chebyshev centre of a polytope)."""
    return np.array(dom._witness)


def bounding_box(dom: DomainSpec) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = dom._bbox
    return np.array(lo), np.array(hi)


def default_tolerance(dom: DomainSpec) -> float:
    """Boundary detection tolerance tied to the scale of the domain."""
    return BOUNDARY_TOL_FACTOR * diameter(dom)


# ========================================================================== #
# Operations
# ========================================================================== #
def contains(dom: DomainSpec, y, mode: str = "open"):
    """
    Membership test: y in O (mode "open") or y in the closure (mode
    "closed"). Returns a bool for a single point, a bool array otherwise.
    """
    if mode not in ("open", "closed"):
        raise DomainError(f"unknown membership mode {mode!r}")
    y = _as_points(dom, y)
    strict = mode == "open"
    less = np.less if strict else np.less_equal
    if dom.kind in (DomainKind.INTERVAL, DomainKind.BOX):
        inside = np.all(less(dom.lo, y) & less(y, dom.hi), axis=-1)
    elif dom.kind == DomainKind.BALL:
        inside = less(np.sum((y - dom.center) ** 2, axis=-1), dom.radius**2)
    elif dom.kind == DomainKind.ELLIPSOID:
        inside = less(np.sum(((y - dom.center) / dom.semiaxes) ** 2, axis=-1), 1.0)
    else:
        inside = np.all(less(y @ dom.normals.T, dom.offsets), axis=-1)
    return bool(inside) if np.ndim(inside) == 0 else inside


def project(dom: DomainSpec, y) -> np.ndarray:
    """
    Euclidean projection p(y) of y onto the closure of O.

    Raises:
        DomainError: If the polytope projector does not converge within
        PROJECTION_MAX_ITER sweeps.
    """
    y = _as_points(dom, y)
    if dom.kind in (DomainKind.INTERVAL, DomainKind.BOX):
        return np.clip(y, dom.lo, dom.hi)
    if dom.kind == DomainKind.BALL:
        v = y - dom.center
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        scale = np.where(norm > dom.radius, dom.radius / np.maximum(norm, 1e-300), 1.0)
        return dom.center + v * scale
    outside = ~np.asarray(contains(dom, y, "closed"))
    result = np.array(y, dtype=float, copy=True)
    if not np.any(outside):
        return result
    flat = result.reshape(-1, dom.dim)
    mask = outside.reshape(-1)
    if dom.kind == DomainKind.ELLIPSOID:
        flat[mask] = _ellipsoid_nearest(dom, flat[mask])
    else:
        flat[mask] = _dykstra(dom, flat[mask])
    return flat.reshape(y.shape)


def distance(dom: DomainSpec, y):
    """Distance from y to the closure of O; zero exactly on the closure."""
    y = _as_points(dom, y)
    dist = np.linalg.norm(y - project(dom, y), axis=-1)
    return float(dist) if dist.ndim == 0 else dist


def boundary_distance(dom: DomainSpec, y):
    """
    Distance from y to the boundary of O. For points outside the closure
    this equals distance(dom, y).
    """
    y = _as_points(dom, y)
    if dom.kind in (DomainKind.INTERVAL, DomainKind.BOX):
        inner = np.min(np.minimum(y - dom.lo, dom.hi - y), axis=-1)
    elif dom.kind == DomainKind.BALL:
        inner = dom.radius - np.linalg.norm(y - dom.center, axis=-1)
    elif dom.kind == DomainKind.POLYTOPE:
        slack = (dom.offsets - y @ dom.normals.T) / np.linalg.norm(dom.normals, axis=1)
        inner = np.min(slack, axis=-1)
    else:
        inner = np.linalg.norm(y - nearest_boundary_point(dom, y), axis=-1)
    dist = inner
    if np.any(inner < 0):
        dist = np.where(inner >= 0, inner, distance(dom, y))
    return float(dist) if np.ndim(dist) == 0 else dist


def nearest_boundary_point(dom: DomainSpec, y) -> np.ndarray:
    """Closest point of the boundary of O to y."""
    y = _as_points(dom, y)
    inside = np.asarray(contains(dom, y, "open"))
    if not np.any(inside):
        return project(dom, y)
    flat = np.array(y, dtype=float).reshape(-1, dom.dim)
    mask = inside.reshape(-1)
    pts = flat[mask]
    if dom.kind in (DomainKind.INTERVAL, DomainKind.BOX):
        gaps = np.concatenate([pts - dom.lo, dom.hi - pts], axis=-1)
        which = np.argmin(gaps, axis=-1)
        rows = np.arange(len(pts))
        comp = which % dom.dim
        upper = which >= dom.dim
        pts[rows, comp] = np.where(upper, dom.hi[comp], dom.lo[comp])
    elif dom.kind == DomainKind.BALL:
        v = pts - dom.center
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        direction = np.where(norm > 0, v / np.maximum(norm, 1e-300), np.eye(dom.dim)[0])
        pts = dom.center + dom.radius * direction
    elif dom.kind == DomainKind.ELLIPSOID:
        pts = _ellipsoid_nearest(dom, pts)
    else:
        units = _unit_normals(dom)
        slack = (dom.offsets - pts @ dom.normals.T) / np.linalg.norm(dom.normals, axis=1)
        which = np.argmin(slack, axis=-1)
        pts = pts + slack[np.arange(len(pts)), which][:, None] * units[which]
    result = flat.copy()
    result[mask] = pts
    result[~mask] = project(dom, flat[~mask]) if np.any(~mask) else flat[~mask]
    return result.reshape(y.shape)


def inner_normal(dom: DomainSpec, y, tol: Optional[float] = None) -> np.ndarray:
    """
    Inner unit normal n(y) at a boundary point y.

    At edges and corners of boxes and polytopes, where the boundary is not
    smooth, the normal is the normalised average of the inward normals of
    the faces active within tol.

    Raises:
        DomainError: If some y is farther than tol from the boundary.
    """
    y = _as_points(dom, y)
    tol = default_tolerance(dom) if tol is None else tol
    gap = np.asarray(boundary_distance(dom, y))
    if np.any(gap > tol):
        raise DomainError(
            f"point not within tol={tol:g} of the boundary "
            f"(distance {float(np.max(gap)):g})"
        )
    if dom.kind in (DomainKind.INTERVAL, DomainKind.BOX):
        at_lo = np.abs(y - dom.lo) <= tol
        at_hi = np.abs(y - dom.hi) <= tol
        if dom.kind == DomainKind.INTERVAL:
            # the closest end decides
            at_lo = np.abs(y - dom.lo) <= np.abs(y - dom.hi)
            at_hi = ~at_lo
        normal = at_lo.astype(float) - at_hi.astype(float)
    elif dom.kind == DomainKind.BALL:
        normal = dom.center - y
    elif dom.kind == DomainKind.ELLIPSOID:
        normal = -(y - dom.center) / dom.semiaxes**2
    else:
        units = _unit_normals(dom)
        residual = (y @ dom.normals.T - dom.offsets) / np.linalg.norm(dom.normals, axis=1)
        active = np.abs(residual) <= tol
        normal = -(active.astype(float) @ units)
    length = np.linalg.norm(normal, axis=-1, keepdims=True)
    if np.any(length == 0):
        raise DomainError("inner normal undefined at this point")
    return normal / length


def sample_uniform(dom: DomainSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points of O, by rejection from the bounding box."""
    lo, hi = bounding_box(dom)
    accepted = []
    total = 0
    while total < count:
        batch = rng.uniform(lo, hi, size=(max(2 * (count - total), 64), dom.dim))
        batch = batch[np.asarray(contains(dom, batch, "open"))]
        accepted.append(batch)
        total += len(batch)
    return np.concatenate(accepted)[:count]


# ========================================================================== #
# Iterative projectors
# ========================================================================== #
def _ellipsoid_nearest(dom: DomainSpec, pts: np.ndarray) -> np.ndarray:
    """
    Nearest point of the ellipsoid surface, for points inside or outside.

    The minimiser is p = a^2 v / (a^2 + mu) with mu the root of the
    decreasing secular function sum((a v / (a^2 + mu))^2) - 1; the root is
    bracketed and found by bisection.
    """
    a2 = dom.semiaxes**2
    v = pts - dom.center
    level = np.sum(v**2 / a2, axis=-1)
    # Break the degenerate case of a vanishing component on the shortest
    # axis, where the secular function has no pole to bracket against.
    shortest = np.isclose(dom.semiaxes, np.min(dom.semiaxes))
    tiny = 1e-14 * dom.semiaxes
    v = np.where(shortest & (np.abs(v) < tiny) & (level < 1)[:, None], tiny, v)

    outside = level > 1
    lo = np.where(outside, 0.0, -np.min(a2) * (1.0 - 1e-15))
    hi = np.where(
        outside, np.max(dom.semiaxes) * np.linalg.norm(v, axis=-1) + 1.0, 0.0
    )
    for _ in range(ELLIPSOID_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        secular = np.sum(a2 * v**2 / (a2 + mid[:, None]) ** 2, axis=-1) - 1.0
        lo = np.where(secular > 0, mid, lo)
        hi = np.where(secular > 0, hi, mid)
    mu = 0.5 * (lo + hi)
    nearest = a2 * v / (a2 + mu[:, None])
    nearest = np.where((level == 1)[:, None], v, nearest)
    return dom.center + nearest


def _dykstra(dom: DomainSpec, pts: np.ndarray) -> np.ndarray:
    """
    Dykstra's alternating projections onto the polytope's halfspaces.

    Raises:
        DomainError: If the sweep-to-sweep change does not fall below
        PROJECTION_TOL (scaled by the diameter) within PROJECTION_MAX_ITER
        sweeps.
    """
    A, b = dom.normals, dom.offsets
    sq_norms = np.sum(A**2, axis=1)
    x = pts.copy()
    corrections = np.zeros((A.shape[0],) + pts.shape)
    tol = PROJECTION_TOL * max(1.0, diameter(dom))
    for sweep in range(PROJECTION_MAX_ITER):
        previous = x.copy()
        for i in range(A.shape[0]):
            z = x + corrections[i]
            violation = np.maximum(z @ A[i] - b[i], 0.0)
            x = z - (violation / sq_norms[i])[:, None] * A[i]
            corrections[i] = z - x
        if np.max(np.abs(x - previous)) < tol:
            logger.debug("Dykstra converged after %d sweeps", sweep + 1)
            return x
    raise DomainError(
        f"polytope projection did not converge in {PROJECTION_MAX_ITER} sweeps"
    )

"""
potential.py - Convex potentials and their Yosida approximations

This module holds the convex potential phi on the closed domain, its
extension Phi (phi on the closure, +inf outside), the minimal subgradient
and the Yosida approximation

    Phi_n(x) = inf_y { Phi(y) + n |x - y|^2 }

evaluated through the proximal map: Phi_n(x) = Phi(prox(x)) + n|x-prox(x)|^2
and grad Phi_n(x) = 2n (x - prox(x)).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from config import (
    ASSUMPTION_SAMPLES,
    CONVEXITY_PAIRS,
    CUSTOM_PROX_MAX_ITER,
    PROX_MAX_ITER,
    PROX_TOL,
)
from geometry import (
    DomainSpec,
    bounding_box,
    boundary_distance,
    contains,
    distance,
    inner_normal,
    inradius,
    nearest_boundary_point,
    project,
    sample_uniform,
)
from seeding import spawn_stream

# Set up a module-level logger.
logger = logging.getLogger(__name__)

ValueFn = Callable[[np.ndarray], np.ndarray]
GradientFn = Callable[[np.ndarray], np.ndarray]


class PotentialError(Exception):
    """Custom exception raised for invalid potentials or solver failures."""

    pass


class PotentialKind(str, Enum):
    ZERO = "zero"
    QUADRATIC = "quadratic"
    LOG_BARRIER = "log_barrier_integrable"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """
    A convex potential phi on the closure of a domain.

    Kinds:
        zero: phi == 0, so Phi is the convex indicator of the closure.
        quadratic: phi(y) = weight * |y - center|^2 / 2.
        log_barrier_integrable: phi(y) = h(d(y)) with h(s) = s log s - s and
            d the distance to the boundary; convex when the inradius of the
            domain is at most one.
        custom: user-supplied vectorised value and gradient callables,
            defined on the whole closure; convexity, non-negativity and
            square-integrability of the gradient are checked statistically.
    """

    kind: PotentialKind
    dom: DomainSpec
    center: Optional[np.ndarray] = None
    weight: float = 1.0
    value_fn: Optional[ValueFn] = None
    gradient_fn: Optional[GradientFn] = None

    def __post_init__(self) -> None:
        if self.kind == PotentialKind.QUADRATIC:
            if self.center is None or np.shape(self.center) != (self.dom.dim,):
                raise PotentialError("quadratic potential needs a center in R^d")
            if not self.weight > 0:
                raise PotentialError(f"weight must be positive, got {self.weight}")
        elif self.kind == PotentialKind.LOG_BARRIER:
            if inradius(self.dom) > 1.0:
                raise PotentialError(
                    "log-barrier potential is convex only on domains with "
                    f"inradius <= 1 (got {inradius(self.dom):g})"
                )
        elif self.kind == PotentialKind.CUSTOM:
            if self.value_fn is None or self.gradient_fn is None:
                raise PotentialError("custom potential needs value and gradient")
            _check_custom(self)

    # ----- constructors -------------------------------------------------- #
    @classmethod
    def zero(cls, dom: DomainSpec) -> "PotentialSpec":
        return cls(PotentialKind.ZERO, dom)

    @classmethod
    def quadratic(
        cls, dom: DomainSpec, center: Sequence[float], weight: float = 1.0
    ) -> "PotentialSpec":
        center = np.array(center, dtype=float)
        center.setflags(write=False)
        return cls(PotentialKind.QUADRATIC, dom, center=center, weight=float(weight))

    @classmethod
    def log_barrier(cls, dom: DomainSpec) -> "PotentialSpec":
        return cls(PotentialKind.LOG_BARRIER, dom)

    @classmethod
    def custom(
        cls, dom: DomainSpec, value_fn: ValueFn, gradient_fn: GradientFn
    ) -> "PotentialSpec":
        return cls(
            PotentialKind.CUSTOM, dom, value_fn=value_fn, gradient_fn=gradient_fn
        )

    def describe(self) -> Dict[str, Any]:
        """The [potential] config section; custom potentials only name their kind."""
        section: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind == PotentialKind.QUADRATIC:
            section.update(center=self.center.tolist(), weight=self.weight)
        return section


@dataclass(frozen=True, eq=False)
class YosidaHandle:
    """The Yosida approximation Phi_n of a potential, for a given n > 0."""

    potential: PotentialSpec
    n: float

    def __post_init__(self) -> None:
        if not self.n > 0:
            raise PotentialError(f"penalization strength must be positive, got {self.n}")


def _barrier(s: np.ndarray) -> np.ndarray:
    """h(s) = s log s - s, continuous at s = 0."""
    return xlogy(s, s) - s


# ========================================================================== #
# phi and its minimal subgradient
# ========================================================================== #
def potential_value(pot: PotentialSpec, y) -> np.ndarray:
    """Phi(y): phi on the closed domain, +inf outside."""
    y = np.asarray(y, dtype=float)
    inside = np.asarray(contains(pot.dom, y, "closed"))
    if pot.kind == PotentialKind.ZERO:
        value = np.zeros(inside.shape)
    elif pot.kind == PotentialKind.QUADRATIC:
        value = 0.5 * pot.weight * np.sum((y - pot.center) ** 2, axis=-1)
    elif pot.kind == PotentialKind.LOG_BARRIER:
        value = _barrier(np.where(inside, boundary_distance(pot.dom, y), 0.0))
    else:
        value = np.asarray(pot.value_fn(y), dtype=float)
    value = np.where(inside, value, np.inf)
    return float(value) if value.ndim == 0 else value


def min_subgradient(pot: PotentialSpec, y) -> np.ndarray:
    """
    Minimal-norm subgradient of phi at interior points.

    For the log barrier this is (log d) grad d, with grad d the unit vector
    pointing from the nearest boundary point into the domain; its norm is
    |log d| and it points toward the boundary.

    Raises:
        PotentialError: If some y is not in the open domain.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(contains(pot.dom, y, "open")):
        raise PotentialError("minimal subgradient requested outside the open domain")
    if pot.kind == PotentialKind.ZERO:
        return np.zeros_like(y)
    if pot.kind == PotentialKind.QUADRATIC:
        return pot.weight * (y - pot.center)
    if pot.kind == PotentialKind.LOG_BARRIER:
        gap = np.asarray(boundary_distance(pot.dom, y))[..., None]
        inward = (y - nearest_boundary_point(pot.dom, y)) / gap
        return np.log(gap) * inward
    return np.asarray(pot.gradient_fn(y), dtype=float)


def potential_lower_bound(pot: PotentialSpec) -> float:
    """A lower bound of phi on the closed domain."""
    if pot.kind == PotentialKind.LOG_BARRIER:
        r = min(inradius(pot.dom), 1.0)
        return float(_barrier(np.array(r)))
    return 0.0


def assumption_integral(
    pot: PotentialSpec, samples: int, rng: np.random.Generator
) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of the integral of |minimal subgradient|^2 over O.

    Points are drawn uniformly in the bounding box; the integrand vanishes
    outside O.

    Returns:
        (estimate, standard error)
    """
    lo, hi = bounding_box(pot.dom)
    volume = float(np.prod(hi - lo))
    pts = rng.uniform(lo, hi, size=(samples, pot.dom.dim))
    inside = np.asarray(contains(pot.dom, pts, "open"))
    integrand = np.zeros(samples)
    if np.any(inside):
        grad = min_subgradient(pot, pts[inside])
        integrand[inside] = np.sum(grad**2, axis=-1)
    estimate = volume * float(np.mean(integrand))
    stderr = volume * float(np.std(integrand, ddof=1)) / np.sqrt(samples)
    return estimate, stderr


def _check_custom(pot: PotentialSpec) -> None:
    """Statistical checks of a custom potential."""
    rng = spawn_stream(0, "potential-check")
    pts = sample_uniform(pot.dom, 2 * CONVEXITY_PAIRS, rng)
    x, y = pts[:CONVEXITY_PAIRS], pts[CONVEXITY_PAIRS:]
    fx, fy = pot.value_fn(x), pot.value_fn(y)
    fmid = pot.value_fn(0.5 * (x + y))
    if not np.all(np.isfinite(fx)) or np.any(fx < 0):
        raise PotentialError("custom potential must be finite and non-negative on O")
    scale = 1e-10 * (1.0 + np.abs(fx) + np.abs(fy))
    if np.any(fmid > 0.5 * (fx + fy) + scale):
        raise PotentialError("custom potential failed the midpoint convexity test")
    estimate, stderr = assumption_integral(pot, ASSUMPTION_SAMPLES, rng)
    if not (np.isfinite(estimate) and np.isfinite(stderr)):
        raise PotentialError("gradient of custom potential is not square-integrable")
    logger.info(
        "Custom potential accepted: integral of |grad|^2 = %.4g +- %.2g",
        estimate, stderr,
    )


# ========================================================================== #
# Yosida approximation
# ========================================================================== #
def prox(h: YosidaHandle, x) -> np.ndarray:
    """
    Minimiser of Phi(y) + n|x - y|^2 over y.

    Raises:
        PotentialError: If an inner solver fails to converge.
    """
    x = np.asarray(x, dtype=float)
    pot, n = h.potential, h.n
    if pot.kind == PotentialKind.ZERO:
        return project(pot.dom, x)
    if pot.kind == PotentialKind.QUADRATIC:
        # w|y-c|^2/2 + n|x-y|^2 = (w/2+n)|y - y0|^2 + const
        y0 = (2 * n * x + pot.weight * pot.center) / (2 * n + pot.weight)
        return project(pot.dom, y0)
    if pot.kind == PotentialKind.LOG_BARRIER:
        base, normal, _, s_star = _barrier_prox(h, x)
        return base + s_star[..., None] * normal
    return _custom_prox(h, x)


def yosida_eval(h: YosidaHandle, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Value and gradient of the Yosida approximation.

    Returns:
        (Phi_n(x), grad Phi_n(x)); for the zero potential these are
        n d(x)^2 and 2n (x - p(x)).
    """
    x = np.asarray(x, dtype=float)
    pot, n = h.potential, h.n
    if pot.kind == PotentialKind.LOG_BARRIER:
        base, normal, s_x, s_star = _barrier_prox(h, x)
        y = base + s_star[..., None] * normal
        value = _barrier(s_star) + n * (s_star - s_x) ** 2
    else:
        y = prox(h, x)
        if pot.kind == PotentialKind.ZERO:
            value = n * np.sum((x - y) ** 2, axis=-1)
        else:
            value = potential_value(pot, y) + n * np.sum((x - y) ** 2, axis=-1)
    gradient = 2.0 * n * (x - y)
    value = np.asarray(value, dtype=float)
    return (float(value) if value.ndim == 0 else value), gradient


def _barrier_prox(h: YosidaHandle, x: np.ndarray):
    """
    Prox of the log barrier along the nearest-boundary normal line.

    Writing y = q + s nu with q the nearest boundary point and nu the inward
    normal, the objective becomes the strictly convex scalar function
    g(s) = s log s - s + n (s - s_x)^2 on (0, inradius], whose derivative
    log s + 2n (s - s_x) is increasing; its root is found by bisection.

    Returns:
        (q, nu, s_x, s_star), with s_x the signed distance of x (positive
        inside).
    """
    dom, n = h.potential.dom, h.n
    q = nearest_boundary_point(dom, x)
    offset = x - q
    length = np.linalg.norm(offset, axis=-1)
    inside = np.asarray(contains(dom, x, "closed"))
    s_x = np.where(inside, length, -length)
    safe = np.maximum(length, 1e-300)[..., None]
    direction = np.where(inside[..., None], offset / safe, -offset / safe)
    degenerate = length < 1e-14
    if np.any(degenerate):
        direction = np.where(
            degenerate[..., None], inner_normal(dom, q, tol=1e-8), direction
        )
    cap = min(inradius(dom), 1.0)
    lo = np.zeros_like(s_x)
    hi = np.full_like(s_x, cap)
    at_cap = np.log(cap) + 2 * n * (cap - s_x) <= 0
    for _ in range(PROX_MAX_ITER):
        if np.all(hi - lo < PROX_TOL):
            break
        mid = 0.5 * (lo + hi)
        slope = np.log(mid) + 2 * n * (mid - s_x)
        lo = np.where(slope < 0, mid, lo)
        hi = np.where(slope < 0, hi, mid)
    else:
        raise PotentialError(
            f"log-barrier prox did not converge in {PROX_MAX_ITER} iterations"
        )
    s_star = np.where(at_cap, cap, 0.5 * (lo + hi))
    return q, direction, s_x, s_star


def _custom_prox(h: YosidaHandle, x: np.ndarray) -> np.ndarray:
    """Projected gradient with backtracking for custom potentials."""
    pot, n = h.potential, h.n
    flat = x.reshape(-1, pot.dom.dim)
    y = project(pot.dom, flat)
    step = np.full(len(flat), 1.0 / (2.0 * n + 1.0))

    def objective(z):
        return pot.value_fn(z) + n * np.sum((flat - z) ** 2, axis=-1)

    for _ in range(CUSTOM_PROX_MAX_ITER):
        grad = pot.gradient_fn(y) + 2.0 * n * (y - flat)
        candidate = project(pot.dom, y - step[:, None] * grad)
        move = candidate - y
        bound = objective(y) + np.sum(grad * move, axis=-1) + np.sum(
            move**2, axis=-1
        ) / (2.0 * step)
        accept = objective(candidate) <= bound + 1e-15
        step = np.where(accept, step, 0.5 * step)
        y = np.where(accept[:, None], candidate, y)
        scale = 1.0 + np.linalg.norm(y, axis=-1)
        if np.all(accept & (np.linalg.norm(move, axis=-1) < PROX_TOL * scale)):
            return y.reshape(x.shape)
    raise PotentialError(
        f"custom prox did not converge in {CUSTOM_PROX_MAX_ITER} iterations"
    )


def exterior_mass(h: YosidaHandle, x) -> np.ndarray:
    """n d(x)^2, the part of Phi_n charged to excursions outside the domain."""
    return h.n * np.asarray(distance(h.potential.dom, x)) ** 2

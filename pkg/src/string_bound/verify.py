"""
verify.py - Statistical verification harness

Each verify_* function checks one property of the penalized string
equation or of its invariant measures and returns a VerificationReport with
named estimates, standard errors, thresholds and a verdict:

    pass          every criterion holds
    fail          some criterion does not hold
    inconclusive  the estimators are not trustworthy (effective sample size
                  below the floor, too few contact slices, too short runs)

Every random stream a test draws from is recorded by its label, so a
report can be regenerated bit for bit from (test, parameters, master seed).
Statistical thresholds are SIGMA_LEVEL standard errors computed from the
samples themselves.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial.distance import cdist

from config import (
    ASSUMPTION_SAMPLES,
    BOOTSTRAP_RESAMPLES,
    CONTACT_FRACTION_THRESHOLD,
    DIFFUSIVE_BIAS,
    ENERGY_SUBSAMPLE,
    ESS_FLOOR,
    FD_REL_TOL,
    FD_STEP,
    HOLDER_MIN_WINDOWS,
    HOLDER_P4_SLOPE_TOL,
    HOLDER_SLOPE_TOL,
    LIPSCHITZ_SLACK,
    MACRO_GAP,
    MIN_CONTACT_SLICES,
    ORACLE_TOL,
    PERMUTATIONS,
    ROUNDOFF_TOL,
    SIGMA_LEVEL,
    SLOPE_TOL,
)
from geometry import (
    DomainKind,
    DomainSpec,
    boundary_distance,
    bounding_box,
    contains,
    distance,
    sample_uniform,
)
from integrator import (
    SimConfig,
    Trajectory,
    contraction_factor,
    discrete_eigenvalue,
    ensemble_final_states,
    run_coupled,
    weak_form_balance,
)
from observables import (
    Coord,
    CylinderFunctional,
    Const,
    Exp,
    Linear,
    Tanh,
    contact_record,
    default_gap_nodes,
    dirichlet_energy,
    has_macroscopic_multiplicity,
)
from pathspace import (
    Grid,
    PathState,
    bump,
    effective_sample_size,
    grid_laplacian,
    inner,
    linear_profile,
    norm,
    normalized_weights,
    sample_bridge,
    sample_invariant_batch,
    sine_mode,
    weighted_mean,
)
from potential import (
    PotentialKind,
    PotentialSpec,
    YosidaHandle,
    assumption_integral,
    exterior_mass,
    min_subgradient,
    potential_value,
    yosida_eval,
)
from seeding import PURPOSE_NOISE, spawn_stream, stream_label, streams_disjoint

# Set up a module-level logger.
logger = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
# Two-sided tail probability of SIGMA_LEVEL standard deviations.
SIGMA_P = float(2.0 * stats.norm.sf(SIGMA_LEVEL))
# Domains whose boundary is smooth enough for the integration-by-parts test.
SMOOTH_KINDS = (DomainKind.INTERVAL, DomainKind.BALL, DomainKind.ELLIPSOID)


class VerificationError(Exception):
    """Custom exception raised for invalid harness arguments."""

    pass


@dataclass
class VerificationReport:
    test_name: str
    config: Dict[str, Any]
    estimates: Dict[str, float]
    stderrs: Dict[str, float]
    thresholds: Dict[str, float]
    criteria: Dict[str, bool]
    verdict: str
    seeds: List[str]
    wall_time: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_json(self) -> str:
        """One JSON object; non-finite numbers are written as null."""

        def clean(value):
            if isinstance(value, dict):
                return {k: clean(v) for k, v in value.items()}
            if isinstance(value, (list, tuple)):
                return [clean(v) for v in value]
            if isinstance(value, (float, np.floating)):
                return float(value) if math.isfinite(value) else None
            if isinstance(value, (np.integer,)):
                return int(value)
            if isinstance(value, np.bool_):
                return bool(value)
            return value

        return json.dumps(clean(asdict(self)), sort_keys=True)


class _Checks:
    """Collects estimates, criteria and stream labels while a test runs."""

    def __init__(self, name: str, config: Dict[str, Any]):
        self.name = name
        self.config = config
        self.estimates: Dict[str, float] = {}
        self.stderrs: Dict[str, float] = {}
        self.thresholds: Dict[str, float] = {}
        self.criteria: Dict[str, bool] = {}
        self.labels: List[str] = []
        self.inconclusive: List[str] = []
        self.started = time.perf_counter()
        logger.info("Verification test '%s' started", name)

    def stream(self, seed: int, purpose: str, replica: int = 0) -> np.random.Generator:
        self.labels.append(stream_label(seed, purpose, replica))
        return spawn_stream(seed, purpose, replica)

    def note_streams(self, seed: int, purpose: str, first: int, count: int) -> None:
        self.labels.append(f"{seed}:{purpose}:{first}-{first + count - 1}")

    def estimate(self, key: str, value: float, stderr: Optional[float] = None) -> None:
        self.estimates[key] = float(value)
        if stderr is not None:
            self.stderrs[key] = float(stderr)

    def criterion(self, key: str, ok: bool, threshold: Optional[float] = None) -> None:
        self.criteria[key] = bool(ok)
        if threshold is not None:
            self.thresholds[key] = float(threshold)

    def undecidable(self, reason: str) -> None:
        self.inconclusive.append(reason)

    def finish(self) -> VerificationReport:
        if self.inconclusive:
            verdict = INCONCLUSIVE
        elif all(self.criteria.values()):
            verdict = PASS
        else:
            verdict = FAIL
        failed = [k for k, ok in self.criteria.items() if not ok]
        report = VerificationReport(
            test_name=self.name,
            config=self.config,
            estimates=self.estimates,
            stderrs=self.stderrs,
            thresholds=self.thresholds,
            criteria=self.criteria,
            verdict=verdict,
            seeds=self.labels,
            wall_time=time.perf_counter() - self.started,
            note="; ".join(self.inconclusive),
        )
        if verdict == FAIL:
            logger.warning("Test '%s' failed: %s", self.name, ", ".join(failed))
        else:
            logger.info(
                "Test '%s' finished: %s (%.2fs)", self.name, verdict, report.wall_time
            )
        return report


# ========================================================================== #
# Statistical helpers
# ========================================================================== #
def energy_two_sample(
    x: np.ndarray, y: np.ndarray, rng: np.random.Generator,
    resamples: int = PERMUTATIONS, cap: int = ENERGY_SUBSAMPLE,
) -> Tuple[float, float]:
    """
    Energy-distance statistic of two samples of vectors with a permutation
    p-value; each sample is subsampled to at most cap rows.

    Returns:
        (statistic, p-value)
    """
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    if len(x) > cap:
        x = x[rng.choice(len(x), cap, replace=False)]
    if len(y) > cap:
        y = y[rng.choice(len(y), cap, replace=False)]
    pooled = np.vstack([x, y])
    dist = cdist(pooled, pooled)
    nx, ny = len(x), len(y)

    # column k of members marks the x-rows of labelling k; column 0 is observed
    members = np.zeros((len(pooled), resamples + 1))
    members[:nx, 0] = 1.0
    for k in range(1, resamples + 1):
        members[rng.permutation(len(pooled))[:nx], k] = 1.0
    within_x = np.einsum("ik,ik->k", members, dist @ members)
    across = members.T @ dist.sum(axis=1) - within_x
    within_y = dist.sum() - 2.0 * across - within_x
    statistics = 2.0 * across / (nx * ny) - within_x / nx**2 - within_y / ny**2
    observed = statistics[0]
    exceed = int(np.sum(statistics[1:] >= observed))
    return float(observed), float((exceed + 1) / (resamples + 1))


def weighted_w1(
    u: np.ndarray, v: np.ndarray,
    u_log_w: Optional[np.ndarray] = None, v_log_w: Optional[np.ndarray] = None,
) -> float:
    u_w = None if u_log_w is None else normalized_weights(u_log_w)
    v_w = None if v_log_w is None else normalized_weights(v_log_w)
    return float(stats.wasserstein_distance(u, v, u_w, v_w))


def bootstrap_w1(
    u: np.ndarray, v: np.ndarray, rng: np.random.Generator,
    u_log_w: Optional[np.ndarray] = None, v_log_w: Optional[np.ndarray] = None,
    paired: bool = False, resamples: int = BOOTSTRAP_RESAMPLES,
) -> float:
    """Bootstrap standard error of weighted_w1."""
    values = []
    for _ in range(resamples):
        iu = rng.integers(len(u), size=len(u))
        iv = iu if paired else rng.integers(len(v), size=len(v))
        values.append(weighted_w1(
            u[iu], v[iv],
            None if u_log_w is None else u_log_w[iu],
            None if v_log_w is None else v_log_w[iv],
        ))
    return float(np.std(values, ddof=1))


def _mean_stderr(values: np.ndarray) -> Tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(np.mean(values)), float(np.std(values, ddof=1) / np.sqrt(len(values)))


def _trend_ok(values: Sequence[float], errors: Sequence[float]) -> bool:
    """No step along the sequence increases by more than SIGMA_LEVEL errors."""
    return all(
        values[k + 1] <= values[k] + SIGMA_LEVEL * math.hypot(errors[k], errors[k + 1])
        for k in range(len(values) - 1)
    )


def _decreases(first: float, first_se: float, last: float, last_se: float) -> bool:
    """last lies more than SIGMA_LEVEL combined errors below first."""
    return last < first - SIGMA_LEVEL * math.hypot(first_se, last_se)


def _proportion_drop_z(hits_first: int, total_first: int, hits_last: int, total_last: int) -> float:
    """Pooled two-proportion z statistic of first minus last."""
    pooled = (hits_first + hits_last) / (total_first + total_last)
    se = math.sqrt(pooled * (1 - pooled) * (1 / total_first + 1 / total_last))
    return (hits_first / total_first - hits_last / total_last) / se if se > 0 else 0.0


def _increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def _sim_config(
    grid: Grid, dom: DomainSpec, pot: PotentialSpec, n: float,
    t_end: float, dt: Optional[float], seed: int,
) -> SimConfig:
    dt = min(1e-3, 1.0 / (4.0 * n)) if dt is None else dt
    return SimConfig(
        grid=grid, dom=dom, pot=pot, n=n, dt=dt, t_end=t_end,
        initial=PathState(linear_profile(grid), grid),
        record_every=max(int(round(t_end / dt)), 1), seed=seed, progress_every=0,
    )


def _scalar_functionals(paths: np.ndarray, grid: Grid, dom: DomainSpec) -> Dict[str, np.ndarray]:
    """<u, e_1>, <u, e_2> of the first component and the deepest node distance."""
    e1, e2 = sine_mode(grid, 1, 0), sine_mode(grid, 2, 0)
    depth = np.max(np.asarray(boundary_distance(dom, paths)), axis=-1)
    return {
        "e1": inner(e1, paths, grid),
        "e2": inner(e2, paths, grid),
        "depth": depth,
    }


def _joint_features(paths: np.ndarray, grid: Grid, dom: DomainSpec) -> np.ndarray:
    columns = []
    for c in range(grid.d):
        for k in (1, 2, 3):
            columns.append(inner(sine_mode(grid, k, c), paths, grid))
    columns.append(np.max(np.asarray(boundary_distance(dom, paths)), axis=-1))
    return np.column_stack(columns)


# ========================================================================== #
# Yosida approximation
# ========================================================================== #
def verify_yosida(
    pot: PotentialSpec,
    dom: DomainSpec,
    n_list: Sequence[float],
    point_cloud_size: int = 1000,
    seed: int = 0,
    pairs: int = 10_000,
    fd_points: int = 200,
) -> VerificationReport:
    """
    Properties of Phi_n along n_list: monotone convergence of values at
    interior points, 2n-Lipschitz gradients, nondecreasing gradient norms
    converging to the minimal subgradient, finite-difference consistency and
    stability of the integral of |minimal subgradient|^2.
    """
    if not _increasing(n_list):
        raise VerificationError(f"n_list must be increasing, got {list(n_list)}")
    checks = _Checks("yosida", {
        "potential": pot.describe(), "domain": dom.describe(),
        "n_list": list(n_list), "point_cloud_size": point_cloud_size, "seed": seed,
    })
    rng = checks.stream(seed, "yosida-points")
    interior = sample_uniform(dom, point_cloud_size, rng)
    lo, hi = bounding_box(dom)
    span = hi - lo
    cloud = rng.uniform(lo - 0.5 * span, hi + 0.5 * span, size=(point_cloud_size, dom.dim))
    exterior = cloud[~np.asarray(contains(dom, cloud, "closed"))]
    handles = [YosidaHandle(pot, n) for n in n_list]

    # (i) values at interior points increase toward phi
    evaluated = [yosida_eval(h, interior) for h in handles]
    values = np.array([v for v, _ in evaluated])
    grads = np.array([g for _, g in evaluated])
    phi = np.asarray(potential_value(pot, interior))
    tol = ROUNDOFF_TOL * (1.0 + np.abs(phi))
    gaps = np.mean(phi - values, axis=1)
    checks.estimate("value_gap_first_n", gaps[0])
    checks.estimate("value_gap_last_n", gaps[-1])
    checks.criterion("values_monotone", bool(np.all(np.diff(values, axis=0) >= -tol)))
    checks.criterion("values_below_phi", bool(np.all(values <= phi + tol)))
    checks.criterion("values_converge", gaps[-1] <= gaps[0] + ROUNDOFF_TOL)

    if len(exterior):
        if pot.kind == PotentialKind.ZERO:
            worst = 0.0
            for h in handles:
                value, _ = yosida_eval(h, exterior)
                exact = h.n * np.asarray(distance(dom, exterior)) ** 2
                worst = max(worst, float(np.max(np.abs(value - exact) / np.maximum(exact, 1.0))))
            checks.estimate("exterior_formula_error", worst)
            checks.criterion("exterior_formula", worst <= 1e-12, 1e-12)
        else:
            outside = np.array([yosida_eval(h, exterior)[0] for h in handles])
            checks.criterion("exterior_values_increase", bool(np.all(np.diff(outside, axis=0) >= 0)))

    # (ii) Lipschitz constant of the gradient over random pairs
    points = np.vstack([interior, exterior])
    first = rng.integers(len(points), size=pairs)
    second = rng.integers(len(points), size=pairs)
    gap = np.linalg.norm(points[first] - points[second], axis=-1)
    keep = gap > 1e-12
    worst_ratio = 0.0
    for h in handles:
        _, g = yosida_eval(h, points)
        ratio = np.linalg.norm(g[first] - g[second], axis=-1)[keep] / gap[keep]
        worst_ratio = max(worst_ratio, float(np.max(ratio)) / (2.0 * h.n))
    checks.estimate("lipschitz_ratio_over_2n", worst_ratio)
    checks.criterion("gradient_lipschitz", worst_ratio <= 1.0 + LIPSCHITZ_SLACK, 1.0 + LIPSCHITZ_SLACK)

    # (iii) |grad Phi_n| nondecreasing and converging to the minimal subgradient
    sub = min_subgradient(pot, interior)
    sub_norm = np.linalg.norm(sub, axis=-1)
    grad_norms = np.linalg.norm(grads, axis=-1)
    slack = ROUNDOFF_TOL * (1.0 + grad_norms)
    errors = np.mean(np.linalg.norm(grads - sub, axis=-1), axis=1)
    checks.estimate("gradient_error_first_n", errors[0])
    checks.estimate("gradient_error_last_n", errors[-1])
    checks.criterion("gradient_norm_monotone", bool(np.all(np.diff(grad_norms, axis=0) >= -slack[:-1])))
    checks.criterion(
        "gradient_norm_bounded",
        bool(np.all(grad_norms[-1] <= sub_norm + ROUNDOFF_TOL * (1.0 + sub_norm))),
    )
    checks.criterion(
        "gradient_converges", bool(np.all(np.diff(errors) <= ROUNDOFF_TOL * (1.0 + errors[:-1])))
    )

    # (iv) central finite differences away from the boundary
    checked = points[: min(fd_points, len(points))]
    far = np.asarray(boundary_distance(dom, checked)) > 10 * FD_STEP * (1.0 + np.max(np.abs(checked)))
    checked = checked[far]
    worst_fd = 0.0
    for h in handles:
        _, g = yosida_eval(h, checked)
        for axis in range(dom.dim):
            step = np.zeros(dom.dim)
            step[axis] = FD_STEP
            up, _ = yosida_eval(h, checked + step)
            down, _ = yosida_eval(h, checked - step)
            fd = (np.asarray(up) - np.asarray(down)) / (2.0 * FD_STEP)
            scale = np.maximum(np.linalg.norm(g, axis=-1), 1.0)
            worst_fd = max(worst_fd, float(np.max(np.abs(fd - g[:, axis]) / scale)))
    checks.estimate("fd_relative_error", worst_fd)
    checks.criterion("finite_difference", worst_fd <= FD_REL_TOL, FD_REL_TOL)

    # integral of |minimal subgradient|^2: finite and stable under refinement
    rng_q = checks.stream(seed, "yosida-assumption")
    coarse, coarse_se = assumption_integral(pot, ASSUMPTION_SAMPLES, rng_q)
    fine, fine_se = assumption_integral(pot, 4 * ASSUMPTION_SAMPLES, rng_q)
    checks.estimate("assumption_integral", fine, fine_se)
    checks.criterion(
        "assumption_integral_stable",
        bool(np.isfinite(fine))
        and abs(fine - coarse) <= SIGMA_LEVEL * math.hypot(coarse_se, fine_se) + ROUNDOFF_TOL,
    )
    return checks.finish()


# ========================================================================== #
# Integration by parts under nu_n
# ========================================================================== #
def default_ibp_suite(grid: Grid) -> Tuple[List[CylinderFunctional], List[np.ndarray]]:
    """Four cylinder functionals and two bump directions (eight pairs)."""
    directions = np.stack([sine_mode(grid, 1, 0), sine_mode(grid, 2, 0)])
    functionals = [
        CylinderFunctional(directions, Coord(0), grid, "<e1,w>"),
        CylinderFunctional(directions, Tanh(Linear((1.0, 0.5))), grid, "tanh(<e1,w> + <e2,w>/2)"),
        CylinderFunctional(directions, Exp(-(Coord(0) ** 2)), grid, "exp(-<e1,w>^2)"),
        CylinderFunctional(directions, Const(1.0), grid, "1"),
    ]
    directions = [
        bump(grid, 0.5, 0.3, 0)[0],
        bump(grid, 0.35, 0.2, grid.d - 1)[0],
    ]
    return functionals, directions


def bridge_ibp_oracle(grid: Grid, mode_path: np.ndarray, h: np.ndarray) -> Tuple[float, float]:
    """
    Both sides of E[d_h F] = -E[<h'', x> F] for F = <mode_path, x> under the
    grid Brownian bridge, from its mean (the linear profile) and covariance
    min(s, t) - s t.
    """
    mean = linear_profile(grid)
    theta = grid.theta
    cov = np.minimum.outer(theta, theta) - np.outer(theta, theta)
    lap = grid_laplacian(h, grid)
    lhs = float(inner(mode_path, h, grid))
    second = float(inner(lap, mean, grid) * inner(mode_path, mean, grid)) + grid.dtheta**2 * sum(
        float(lap[:, c] @ cov @ mode_path[:, c]) for c in range(grid.d)
    )
    return lhs, -second


def verify_ibp(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    n: Optional[float],
    F_suite: Optional[Sequence[CylinderFunctional]] = None,
    h_suite: Optional[Sequence[np.ndarray]] = None,
    samples: int = 20_000,
    seed: int = 0,
    ess_floor: int = ESS_FLOOR,
) -> VerificationReport:
    """
    E[d_h F] = -E[<h'', x> F] + E[<h, grad Phi_n(x)> F] under nu_n (under the
    bridge itself when n is None), both sides estimated by importance
    sampling from the bridge on disjoint streams.
    """
    if dom.kind not in SMOOTH_KINDS:
        raise VerificationError(
            f"integration by parts needs a smooth boundary, got a {dom.kind.value} domain"
        )
    grid.check_anchors(dom)
    if F_suite is None or h_suite is None:
        default_F, default_h = default_ibp_suite(grid)
        F_suite = default_F if F_suite is None else F_suite
        h_suite = default_h if h_suite is None else h_suite
    for h in h_suite:
        if np.any(h[0] != 0) or np.any(h[-1] != 0):
            raise VerificationError("directions must vanish at the first and last nodes")
    checks = _Checks("ibp", {
        "potential": pot.describe(), "domain": dom.describe(), "M": grid.M,
        "n": n, "samples": samples, "pairs": len(F_suite) * len(h_suite), "seed": seed,
    })

    def draw(purpose: str):
        rng = checks.stream(seed, purpose)
        if n is None:
            return sample_bridge(grid, rng, samples), np.zeros(samples)
        batch = sample_invariant_batch(grid, dom, pot, "nu_n", "importance", rng, samples, n=n)
        return batch.paths, batch.log_weights

    left_paths, left_w = draw("ibp-lhs")
    right_paths, right_w = draw("ibp-rhs")
    checks.criterion("streams_disjoint", streams_disjoint(checks.labels))
    ess = min(effective_sample_size(left_w), effective_sample_size(right_w))
    checks.estimate("ess", ess)
    checks.thresholds["ess"] = float(ess_floor)
    if ess < ess_floor:
        checks.undecidable(f"effective sample size {ess:.0f} below floor {ess_floor}")

    if n is None:
        drift = np.zeros_like(right_paths)
    else:
        _, drift = yosida_eval(YosidaHandle(pot, n), right_paths)
    worst = 0.0
    for i, F in enumerate(F_suite):
        values = F.value(right_paths)
        for j, h in enumerate(h_suite):
            lap = grid_laplacian(h, grid)
            lhs, lhs_se = weighted_mean(F.directional(left_paths, h), left_w)
            rhs_values = (-inner(lap, right_paths, grid) + inner(h, drift, grid)) * values
            rhs, rhs_se = weighted_mean(rhs_values, right_w)
            spread = math.hypot(lhs_se, rhs_se)
            z = abs(lhs - rhs) / spread if spread > 0 else (0.0 if lhs == rhs else math.inf)
            key = f"F{i}_h{j}"
            checks.estimate(f"{key}_lhs", lhs, lhs_se)
            checks.estimate(f"{key}_rhs", rhs, rhs_se)
            checks.estimate(f"{key}_z", z)
            worst = max(worst, z)
    checks.estimate("max_z", worst)
    checks.criterion("identity_within_sigma", worst < SIGMA_LEVEL, SIGMA_LEVEL)

    # closed-form Gaussian case: linear F, bump direction, pure bridge
    mode_path = sine_mode(grid, 1, 0)
    lhs, rhs = bridge_ibp_oracle(grid, mode_path, h_suite[0])
    checks.estimate("oracle_lhs", lhs)
    checks.estimate("oracle_rhs", rhs)
    checks.criterion("oracle_closed_form", abs(lhs - rhs) <= ORACLE_TOL, ORACLE_TOL)
    oracle_paths = sample_bridge(grid, checks.stream(seed, "ibp-oracle"), samples)
    lap = grid_laplacian(h_suite[0], grid)
    mc, mc_se = _mean_stderr(-inner(lap, oracle_paths, grid) * inner(mode_path, oracle_paths, grid))
    checks.estimate("oracle_monte_carlo", mc, mc_se)
    checks.criterion("oracle_monte_carlo", abs(mc - rhs) <= SIGMA_LEVEL * mc_se + ROUNDOFF_TOL)
    return checks.finish()


# ========================================================================== #
# Coupling contraction
# ========================================================================== #
def verify_contraction(
    cfg: SimConfig, pairs: int = 8, t_end: Optional[float] = None
) -> VerificationReport:
    """
    Coupled runs from perturbed initials: every series stays below the
    discrete bound and the e_1 perturbation decays at rate lambda_1/2.
    Noise-free e_1 decay slopes measured at M = 31, 63, 127 must each beat
    the discrete rate and, for phi == 0, approach -pi^2/2 as M grows.
    """
    if pairs < 2:
        raise VerificationError("contraction needs at least two pairs")
    run_cfg = cfg if t_end is None else replace(cfg, t_end=t_end)
    grid = cfg.grid
    checks = _Checks("contraction", {
        "potential": cfg.pot.describe(), "domain": cfg.dom.describe(), "M": grid.M,
        "n": cfg.n, "dt": cfg.dt, "t_end": run_cfg.t_end, "pairs": pairs, "seed": cfg.seed,
    })
    lam = discrete_eigenvalue(grid)
    checks.estimate("half_lambda1", lam / 2)
    checks.estimate("discrete_rate", math.log1p(cfg.dt * lam / 2) / cfg.dt)
    checks.estimate("continuum_rate", math.pi**2 / 2)

    base = cfg.initial.values
    all_within = True
    for p in range(pairs):
        if p == 0:
            perturbation = np.zeros_like(base)
        elif p == 1:
            perturbation = 0.1 * sine_mode(grid, 1, 0)
        else:
            rng_init = checks.stream(cfg.seed, "contraction-initial", p)
            perturbation = 0.1 * sine_mode(grid, 1, 0)
            for k in (2, 3, 4):
                coeffs = rng_init.normal(0.0, 0.05, size=grid.d)
                perturbation = perturbation + sine_mode(grid, k)[:, None] * coeffs
        rng = checks.stream(cfg.seed, PURPOSE_NOISE, p)
        _, _, series = run_coupled(run_cfg, PathState(base + perturbation, grid), rng)
        all_within &= series.within_bound
        if p == 0:
            checks.criterion("equal_initials_stay_equal", bool(np.all(series.distances == 0)))
        else:
            checks.estimate(f"slope_pair{p}", series.slope())
        if p == 1:
            slope = series.slope()
            limit = -(lam / 2) * (1 - SLOPE_TOL)
            checks.criterion("e1_decay_slope", slope <= limit, limit)
    checks.criterion("pathwise_bound", all_within)

    # Noise-free e_1 decay measured on refined grids. With phi == 0 and both
    # strings in the closed domain the scheme stays inside and the penalty
    # never acts, so the slope is the discrete heat rate.
    continuum = math.pi**2 / 2
    sweep_dt = min(cfg.dt, 1e-3)
    penalty_free = cfg.pot.kind == PotentialKind.ZERO
    gaps = []
    for M in (31, 63, 127):
        fine = Grid(M, grid.a, grid.b)
        half = discrete_eigenvalue(fine) / 2
        checks.estimate(f"half_lambda1_M{M}", half)
        profile = linear_profile(fine)
        depth = float(np.min(np.asarray(boundary_distance(cfg.dom, profile))))
        scale = min(0.1, depth / 2)
        if scale <= 0:
            penalty_free = False
            scale = 0.1
        sweep = replace(
            run_cfg, grid=fine, dt=sweep_dt, initial=PathState(profile, fine),
            record_every=1, noise_scale=0.0,
        )
        _, _, series = run_coupled(
            sweep, PathState(profile + scale * sine_mode(fine, 1, 0), fine),
            checks.stream(cfg.seed, "contraction-sweep", M),
        )
        slope = series.slope()
        checks.estimate(f"measured_slope_M{M}", slope)
        limit = -half * (1 - SLOPE_TOL)
        checks.criterion(f"e1_decay_slope_M{M}", slope <= limit, limit)
        gaps.append(abs(slope + continuum) / continuum)
    checks.estimate("continuum_gap_M127", gaps[-1])
    if penalty_free:
        checks.criterion(
            "measured_rate_approaches_continuum",
            all(b <= a + ROUNDOFF_TOL for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= SLOPE_TOL,
            SLOPE_TOL,
        )
    checks.estimate("final_bound_factor", float(contraction_factor(grid, cfg.dt, run_cfg.steps)))
    return checks.finish()


# ========================================================================== #
# Invariance of nu_n
# ========================================================================== #
def verify_invariance(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    n: float,
    t_relax: float,
    samples: int = 2000,
    dt: Optional[float] = None,
    seed: int = 0,
) -> VerificationReport:
    """
    Reference draws from nu_n against (b) runs of length t_relax started
    from independent nu_n draws and (c) runs started from the linear
    profile: KS tests on scalar functionals and an energy-distance test on
    joint features, all at SIGMA_LEVEL.
    """
    if t_relax < 0:
        raise VerificationError(f"t_relax must be non-negative, got {t_relax}")
    checks = _Checks("invariance", {
        "potential": pot.describe(), "domain": dom.describe(), "M": grid.M,
        "n": n, "t_relax": t_relax, "samples": samples, "seed": seed,
    })
    reference = sample_invariant_batch(
        grid, dom, pot, "nu_n", "rejection", checks.stream(seed, "invariance-reference"), samples, n=n
    ).paths
    starts = sample_invariant_batch(
        grid, dom, pot, "nu_n", "rejection", checks.stream(seed, "invariance-start"), samples, n=n
    ).paths
    samples_by_case = {}
    if t_relax > 0:
        sim = _sim_config(grid, dom, pot, n, t_relax, dt, seed)
        samples_by_case["relaxed"] = ensemble_final_states(sim, starts)
        checks.note_streams(seed, PURPOSE_NOISE, 0, samples)
        fixed = np.broadcast_to(linear_profile(grid), starts.shape)
        samples_by_case["from_profile"] = ensemble_final_states(sim, fixed, first_replica=samples)
        checks.note_streams(seed, PURPOSE_NOISE, samples, samples)
    else:
        samples_by_case["relaxed"] = starts

    ref_features = _scalar_functionals(reference, grid, dom)
    mean, stderr = _mean_stderr(ref_features["e1"])
    checks.estimate("reference_mean_e1", mean, stderr)
    rng_perm = checks.stream(seed, "invariance-permutation")
    for case, paths in samples_by_case.items():
        features = _scalar_functionals(paths, grid, dom)
        for key, values in features.items():
            result = stats.ks_2samp(ref_features[key], values)
            checks.estimate(f"{case}_ks_{key}", result.statistic)
            checks.estimate(f"{case}_ks_{key}_p", result.pvalue)
            checks.criterion(f"{case}_ks_{key}", result.pvalue > SIGMA_P, SIGMA_P)
        statistic, pvalue = energy_two_sample(
            _joint_features(reference, grid, dom), _joint_features(paths, grid, dom), rng_perm
        )
        checks.estimate(f"{case}_energy", statistic)
        checks.estimate(f"{case}_energy_p", pvalue)
        checks.criterion(f"{case}_energy", pvalue > SIGMA_P, SIGMA_P)
    return checks.finish()


# ========================================================================== #
# Stability in n
# ========================================================================== #
def verify_stability(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    n_list: Sequence[float],
    functional_suite: Optional[Sequence[CylinderFunctional]] = None,
    samples: int = 2000,
    seed: int = 0,
    t: float = 0.25,
    dt: Optional[float] = None,
    ess_floor: int = ESS_FLOOR,
) -> VerificationReport:
    """
    Static part: W1 distances between functional laws under nu_n
    (importance sampled) and nu (rejection sampled) shrink along n_list.
    Dynamic part: laws of <u_n(t), e_1> from the linear profile, driven by
    common noise, are Cauchy along n_list: consecutive distances do not grow
    and the last lies SIGMA_LEVEL errors below the first. Also reports the exterior part of
    U_n under nu_n.
    """
    if not _increasing(n_list) or len(n_list) < 3:
        raise VerificationError(f"n_list must be increasing with >= 3 entries, got {list(n_list)}")
    if functional_suite is None:
        directions = np.stack([sine_mode(grid, 1, 0), sine_mode(grid, 2, 0)])
        functional_suite = [
            CylinderFunctional(directions, Coord(0), grid, "<e1,w>"),
            CylinderFunctional(directions, Coord(1), grid, "<e2,w>"),
        ]
    checks = _Checks("stability", {
        "potential": pot.describe(), "domain": dom.describe(), "M": grid.M,
        "n_list": list(n_list), "samples": samples, "t": t, "seed": seed,
    })
    try:
        limit = sample_invariant_batch(
            grid, dom, pot, "nu", "rejection", checks.stream(seed, "stability-nu"), samples
        )
    except Exception as e:
        checks.undecidable(f"sampling nu failed: {e}")
        return checks.finish()
    checks.estimate("nu_acceptance", limit.acceptance_rate)
    proposals = max(samples, limit.proposals)
    rng_boot = checks.stream(seed, "stability-bootstrap")

    distances = {F.label: ([], []) for F in functional_suite}
    collar = []
    for k, n in enumerate(n_list):
        batch = sample_invariant_batch(
            grid, dom, pot, "nu_n", "importance",
            checks.stream(seed, "stability-nu_n", k), proposals, n=n,
        )
        ess = effective_sample_size(batch.log_weights)
        checks.estimate(f"ess_n{n:g}", ess)
        if ess < ess_floor:
            checks.undecidable(f"effective sample size {ess:.0f} below floor at n={n:g}")
        for F in functional_suite:
            target = F.value(limit.paths)
            approx = F.value(batch.paths)
            w1 = weighted_w1(target, approx, None, batch.log_weights)
            se = bootstrap_w1(target, approx, rng_boot, None, batch.log_weights)
            distances[F.label][0].append(w1)
            distances[F.label][1].append(se)
            checks.estimate(f"w1_{F.label}_n{n:g}", w1, se)
        mass = YosidaHandle(pot, n)
        outside = grid.dtheta * np.sum(exterior_mass(mass, batch.paths), axis=-1)
        value, se = weighted_mean(outside, batch.log_weights)
        collar.append(value)
        checks.estimate(f"exterior_mass_n{n:g}", value, se)

    for label, (values, errors) in distances.items():
        checks.criterion(f"static_trend_{label}", _trend_ok(values, errors))
        checks.criterion(
            f"static_decrease_{label}", _decreases(values[0], errors[0], values[-1], errors[-1])
        )
    checks.criterion("exterior_mass_decreases", collar[-1] < collar[0])

    # dynamic part with common random numbers
    dt = min(1e-3, 1.0 / (4.0 * max(n_list))) if dt is None else dt
    e1 = sine_mode(grid, 1, 0)
    initials = np.broadcast_to(linear_profile(grid), (samples, grid.M, grid.d))
    laws = []
    for n in n_list:
        sim = _sim_config(grid, dom, pot, n, t, dt, seed)
        laws.append(inner(e1, ensemble_final_states(sim, initials), grid))
    checks.note_streams(seed, PURPOSE_NOISE, 0, samples)
    cauchy, cauchy_se = [], []
    for k in range(len(laws) - 1):
        w1 = weighted_w1(laws[k], laws[k + 1])
        se = bootstrap_w1(laws[k], laws[k + 1], rng_boot, paired=True)
        cauchy.append(w1)
        cauchy_se.append(se)
        checks.estimate(f"cauchy_n{n_list[k]:g}_n{n_list[k + 1]:g}", w1, se)
    checks.criterion("dynamic_cauchy_trend", _trend_ok(cauchy, cauchy_se))
    checks.criterion(
        "dynamic_cauchy_decrease", _decreases(cauchy[0], cauchy_se[0], cauchy[-1], cauchy_se[-1])
    )
    return checks.finish()


# ========================================================================== #
# Contact structure
# ========================================================================== #
def verify_contact_uniqueness(
    trajectories: Sequence[Trajectory],
    dom: DomainSpec,
    eps_list: Sequence[float],
    gap: float = MACRO_GAP,
    gap_nodes: Optional[int] = None,
    threshold: float = CONTACT_FRACTION_THRESHOLD,
    min_slices: int = MIN_CONTACT_SLICES,
) -> VerificationReport:
    """
    Fraction of contact-bearing slices with two clusters more than gap
    apart in theta, per eps. It must not grow between neighbouring eps,
    must drop significantly from the coarsest to the finest eps (pooled
    two-proportion test) unless it is zero throughout, and must be below
    threshold at the finest eps.
    """
    if not trajectories:
        raise VerificationError("no trajectories given")
    grid = trajectories[0].grid
    gap_nodes = default_gap_nodes(grid) if gap_nodes is None else gap_nodes
    eps_sorted = sorted(eps_list, reverse=True)
    checks = _Checks("contact", {
        "domain": dom.describe(), "M": grid.M, "eps_list": eps_sorted, "gap": gap,
        "gap_nodes": gap_nodes, "trajectories": len(trajectories),
        "seeds": sorted({t.seed for t in trajectories}),
    })
    fractions, errors, counts = [], [], []
    for eps in eps_sorted:
        slices = multiple = 0
        for traj in trajectories:
            for time_, values in zip(traj.times, traj.states):
                record = contact_record(time_, values, dom, eps, gap_nodes)
                if record is None:
                    continue
                slices += 1
                multiple += has_macroscopic_multiplicity(record, grid, gap)
        fraction = multiple / slices if slices else 0.0
        se = math.sqrt(fraction * (1 - fraction) / slices) if slices else 0.0
        fractions.append(fraction)
        errors.append(se)
        counts.append((multiple, slices))
        checks.estimate(f"slices_eps{eps:.4g}", slices)
        checks.estimate(f"fraction_eps{eps:.4g}", fraction, se)
    finest_slices = checks.estimates[f"slices_eps{eps_sorted[-1]:.4g}"]
    if finest_slices < min_slices:
        checks.undecidable(
            f"only {finest_slices:.0f} contact slices at the finest eps (need {min_slices})"
        )
    checks.criterion("fraction_trend", _trend_ok(fractions, errors))
    if len(eps_sorted) > 1:
        (hits_first, total_first), (hits_last, total_last) = counts[0], counts[-1]
        if hits_first == 0:
            # no multiplicity even at the coarsest eps
            checks.criterion("fraction_decrease", hits_last == 0)
        elif total_last == 0:
            checks.criterion("fraction_decrease", False)
        else:
            z = _proportion_drop_z(hits_first, total_first, hits_last, total_last)
            checks.estimate("fraction_drop_z", z)
            checks.criterion("fraction_decrease", z > SIGMA_LEVEL, SIGMA_LEVEL)
    checks.criterion("fraction_small", fractions[-1] < threshold, threshold)
    return checks.finish()


# ========================================================================== #
# Time regularity
# ========================================================================== #
def verify_holder(traj: Trajectory, lag_list: Sequence[float]) -> VerificationReport:
    """
    Regression of log E||X_{t+lag} - X_t||_{-1}^p on log lag over a
    stationary trajectory: slope 1 for p = 2, slope 2 for p = 4.
    """
    if len(traj) < 3:
        raise VerificationError("trajectory too short")
    spacing = float(traj.times[1] - traj.times[0])
    lags = sorted(lag_list)
    if lags[0] < 10 * traj.dt * (1 - 1e-9):
        raise VerificationError(f"lags must be >= 10 dt = {10 * traj.dt:g}")
    if lags[-1] / lags[0] < 100 * (1 - 1e-9):
        raise VerificationError("lags must span at least two decades")
    checks = _Checks("holder", {
        "M": traj.grid.M, "n": traj.n, "dt": traj.dt, "lags": lags,
        "length": float(traj.times[-1] - traj.times[0]), "seed": traj.seed,
    })
    checks.labels.append(stream_label(traj.seed, PURPOSE_NOISE, 0))
    span = traj.times[-1] - traj.times[0]
    if span / lags[-1] < HOLDER_MIN_WINDOWS:
        checks.undecidable(
            f"run covers {span / lags[-1]:.0f} windows of the largest lag (need {HOLDER_MIN_WINDOWS})"
        )
    second, fourth = [], []
    for lag in lags:
        shift = int(round(lag / spacing))
        if shift < 1 or shift >= len(traj):
            raise VerificationError(f"lag {lag:g} does not fit the trajectory spacing {spacing:g}")
        sq = np.asarray(norm(traj.states[shift:] - traj.states[:-shift], "Hminus1")) ** 2
        second.append(float(np.mean(sq)))
        fourth.append(float(np.mean(sq**2)))
        checks.estimate(f"moment2_lag{lag:g}", second[-1])
    zero = float(np.max(np.asarray(norm(traj.states - traj.states, "Hminus1"))))
    checks.criterion("zero_lag", zero == 0.0)
    logs = np.log(lags)
    slope2 = float(np.polyfit(logs, np.log(second), 1)[0])
    slope4 = float(np.polyfit(logs, np.log(fourth), 1)[0])
    checks.estimate("slope_p2", slope2)
    checks.estimate("slope_p4", slope4)
    checks.criterion("slope_p2", abs(slope2 - 1.0) <= HOLDER_SLOPE_TOL, HOLDER_SLOPE_TOL)
    checks.criterion("slope_p4", abs(slope4 - 2.0) <= HOLDER_P4_SLOPE_TOL, HOLDER_P4_SLOPE_TOL)
    return checks.finish()


# ========================================================================== #
# Strong Feller bound
# ========================================================================== #
def verify_strong_feller(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    n: float,
    phi_test: Callable[[np.ndarray], np.ndarray],
    sup_norm: float,
    x: PathState,
    y: PathState,
    t: float,
    samples: int = 10_000,
    dt: Optional[float] = None,
    seed: int = 0,
) -> VerificationReport:
    """
    |P_t phi(x) - P_t phi(y)| <= sup|phi| ||x - y|| / sqrt(t), both
    expectations from common random numbers.
    """
    if t <= 0:
        raise VerificationError("t must be positive")
    checks = _Checks("strong_feller", {
        "potential": pot.describe(), "domain": dom.describe(), "M": grid.M,
        "n": n, "t": t, "samples": samples, "sup_norm": sup_norm, "seed": seed,
    })
    sim = _sim_config(grid, dom, pot, n, t, dt, seed)
    from_x = ensemble_final_states(sim, np.broadcast_to(x.values, (samples, grid.M, grid.d)))
    from_y = ensemble_final_states(sim, np.broadcast_to(y.values, (samples, grid.M, grid.d)))
    checks.note_streams(seed, PURPOSE_NOISE, 0, samples)
    diff, se = _mean_stderr(np.asarray(phi_test(from_x)) - np.asarray(phi_test(from_y)))
    bound = sup_norm * float(norm(x.values - y.values, "L2")) / math.sqrt(t)
    checks.estimate("difference", diff, se)
    checks.estimate("bound", bound)
    checks.criterion("strong_feller_bound", abs(diff) <= bound + SIGMA_LEVEL * se + ROUNDOFF_TOL, bound)
    return checks.finish()


# ========================================================================== #
# Reversibility and Dirichlet form
# ========================================================================== #
def verify_reversibility(
    grid: Grid,
    dom: DomainSpec,
    pot: PotentialSpec,
    n: float,
    lag: float,
    samples: int = 4000,
    dt: Optional[float] = None,
    seed: int = 0,
    f: Optional[CylinderFunctional] = None,
    g: Optional[CylinderFunctional] = None,
) -> VerificationReport:
    """
    Started from nu_n: E[f(X_0) g(X_t)] = E[g(X_0) f(X_t)], and the mean
    square increment of a linear functional over a short lag matches
    2 lag E^n(F, F).
    """
    directions = np.stack([sine_mode(grid, 1, 0), sine_mode(grid, 2, 0)])
    f = f or CylinderFunctional(directions, Coord(0), grid, "<e1,w>")
    g = g or CylinderFunctional(directions, Coord(0) ** 2 + Coord(1), grid, "<e1,w>^2 + <e2,w>")
    checks = _Checks("reversibility", {
        "potential": pot.describe(), "domain": dom.describe(), "M": grid.M,
        "n": n, "lag": lag, "samples": samples, "seed": seed,
    })
    start = sample_invariant_batch(
        grid, dom, pot, "nu_n", "rejection", checks.stream(seed, "reversibility-start"), samples, n=n
    ).paths
    sim = _sim_config(grid, dom, pot, n, lag, dt, seed)
    end = ensemble_final_states(sim, start)
    checks.note_streams(seed, PURPOSE_NOISE, 0, samples)

    swap, swap_se = _mean_stderr(f.value(start) * g.value(end) - g.value(start) * f.value(end))
    checks.estimate("symmetry_gap", swap, swap_se)
    checks.criterion("symmetric", abs(swap) <= SIGMA_LEVEL * swap_se + ROUNDOFF_TOL)

    linear = CylinderFunctional(directions[:1], Coord(0), grid, "<e1,w>")
    msd, msd_se = _mean_stderr((linear.value(end) - linear.value(start)) ** 2)
    energy, energy_se = dirichlet_energy(linear, start)
    expected = 2.0 * sim.steps * sim.dt * energy
    checks.estimate("mean_square_increment", msd, msd_se)
    checks.estimate("dirichlet_energy", energy, energy_se)
    allowance = SIGMA_LEVEL * math.hypot(msd_se, 2 * lag * energy_se) + DIFFUSIVE_BIAS * expected
    checks.criterion("diffusive_scaling", abs(msd - expected) <= allowance, allowance)
    return checks.finish()


# ========================================================================== #
# Weak form
# ========================================================================== #
def verify_weak_form(
    cfg: SimConfig,
    test_functions: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    replicas: int = 4,
) -> VerificationReport:
    """
    Weak-form balance along runs: with the grid second difference of the
    test fields the balance closes to roundoff; with the exact h'' the
    residual stays within the accumulated discretisation budget.
    """
    if test_functions is None:
        pairs = [bump(cfg.grid, 0.5, 0.3, 0), bump(cfg.grid, 0.35, 0.2, cfg.grid.d - 1)]
        tests = np.stack([h for h, _ in pairs])
        seconds = np.stack([h2 for _, h2 in pairs])
    else:
        tests, seconds = (np.asarray(a, dtype=float) for a in test_functions)
    checks = _Checks("weak_form", {
        "potential": cfg.pot.describe(), "domain": cfg.dom.describe(), "M": cfg.grid.M,
        "n": cfg.n, "dt": cfg.dt, "t_end": cfg.t_end, "replicas": replicas,
        "tests": len(tests), "seed": cfg.seed,
    })
    results = [
        weak_form_balance(cfg, tests, seconds, checks.stream(cfg.seed, "weak-form", r))
        for r in range(replicas)
    ]
    residual = np.array([r["residual"] for r in results])
    discrete = np.array([r["discrete_residual"] for r in results])
    budget = np.array([r["budget"] for r in results])
    scale = np.array([r["scale"] for r in results])

    roundoff = float(np.max(np.abs(discrete) / (1.0 + scale)))
    checks.estimate("discrete_residual", roundoff)
    checks.criterion("discrete_balance", roundoff <= ROUNDOFF_TOL, ROUNDOFF_TOL)
    for k in range(len(tests)):
        mean = float(np.mean(residual[:, k]))
        se = float(np.std(residual[:, k], ddof=1) / np.sqrt(replicas)) if replicas > 1 else 0.0
        allowed = SIGMA_LEVEL * se + float(np.mean(budget[:, k])) + ROUNDOFF_TOL * float(np.mean(scale[:, k]))
        checks.estimate(f"residual_h{k}", mean, se)
        checks.estimate(f"relative_budget_h{k}", float(np.mean(budget[:, k] / scale[:, k])))
        checks.criterion(f"continuum_balance_h{k}", abs(mean) <= allowed, allowed)
    return checks.finish()


# ========================================================================== #
# Summaries
# ========================================================================== #
def summary_table(reports: Sequence[VerificationReport]) -> pd.DataFrame:
    """One row per report, in the given order."""
    rows = [
        {
            "test": report.test_name,
            "verdict": report.verdict,
            "criteria_passed": sum(report.criteria.values()),
            "criteria_total": len(report.criteria),
            "failed": ", ".join(k for k, ok in report.criteria.items() if not ok),
            "wall_time_s": round(report.wall_time, 3),
            "note": report.note,
        }
        for report in reports
    ]
    return pd.DataFrame(
        rows,
        columns=["test", "verdict", "criteria_passed", "criteria_total", "failed", "wall_time_s", "note"],
    )


def combine_reports(
    test_name: str, parts: Sequence[Tuple[str, VerificationReport]]
) -> VerificationReport:
    """
    One report from several runs of the same test. Keys are prefixed with
    the part label and the verdict follows the same precedence as a single
    run: inconclusive, then fail, then pass.
    """
    if not parts:
        raise VerificationError("nothing to combine")
    fields = {"estimates": {}, "stderrs": {}, "thresholds": {}, "criteria": {}}
    seeds: List[str] = []
    notes = []
    for label, report in parts:
        for name, merged in fields.items():
            merged.update({f"{label}_{key}": value for key, value in getattr(report, name).items()})
        seeds.extend(s for s in report.seeds if s not in seeds)
        if report.note:
            notes.append(f"{label}: {report.note}")
    verdicts = [report.verdict for _, report in parts]
    if INCONCLUSIVE in verdicts:
        verdict = INCONCLUSIVE
    elif all(v == PASS for v in verdicts):
        verdict = PASS
    else:
        verdict = FAIL
    return VerificationReport(
        test_name=test_name,
        config={label: report.config for label, report in parts},
        verdict=verdict,
        seeds=seeds,
        wall_time=sum(report.wall_time for _, report in parts),
        note="; ".join(notes),
        **fields,
    )

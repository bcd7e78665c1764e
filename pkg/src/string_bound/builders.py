"""
builders.py

Turns a validated run-config document into runtime objects: the domain,
the potential, the grid, the simulation config, and the list of
verification tests to run. Library errors raised while building are
reported as ConfigError, since they all come from bad parameters.
"""

import json
import logging
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    CONTACT_FRACTION_THRESHOLD,
    CONTACT_REPLICAS,
    ESS_FLOOR,
    MACRO_GAP,
    TEST_NAMES,
    ConfigError,
)
from geometry import DomainError, DomainSpec
from integrator import IntegratorError, SimConfig, default_collar, run_ensemble
from observables import Coord, CylinderFunctional, Tanh
from pathspace import (
    Grid,
    PathState,
    SamplerError,
    linear_profile,
    sample_bridge,
    sample_invariant,
    sine_mode,
)
from potential import PotentialError, PotentialSpec
from seeding import PURPOSE_INITIAL, spawn_stream
from verify import (
    VerificationReport,
    combine_reports,
    verify_contact_uniqueness,
    verify_contraction,
    verify_holder,
    verify_ibp,
    verify_invariance,
    verify_reversibility,
    verify_stability,
    verify_strong_feller,
    verify_weak_form,
    verify_yosida,
)

logger = logging.getLogger(__name__)

_BUILD_ERRORS = (DomainError, PotentialError, SamplerError, IntegratorError, ValueError)


def build_domain(section: Dict[str, Any]) -> DomainSpec:
    kind = section["kind"]
    try:
        if kind == "interval":
            return DomainSpec.interval(float(section["lo"]), float(section["hi"]))
        if kind == "box":
            return DomainSpec.box(section["lo"], section["hi"])
        if kind == "ball":
            return DomainSpec.ball(section["center"], section["radius"])
        if kind == "ellipsoid":
            return DomainSpec.ellipsoid(section["center"], section["semiaxes"])
        if kind == "polytope":
            return DomainSpec.polytope(section["a"], section["b"])
    except KeyError as e:
        raise ConfigError(f"[domain] of kind '{kind}' needs key {e}")
    except _BUILD_ERRORS as e:
        raise ConfigError(f"invalid [domain]: {e}")
    raise ConfigError(f"unknown domain kind '{kind}'")


def build_potential(section: Dict[str, Any], dom: DomainSpec) -> PotentialSpec:
    kind = section["kind"]
    try:
        if kind == "zero":
            return PotentialSpec.zero(dom)
        if kind == "quadratic":
            return PotentialSpec.quadratic(dom, section["center"], section.get("weight", 1.0))
        if kind == "log_barrier_integrable":
            return PotentialSpec.log_barrier(dom)
    except KeyError as e:
        raise ConfigError(f"[potential] of kind '{kind}' needs key {e}")
    except _BUILD_ERRORS as e:
        raise ConfigError(f"invalid [potential]: {e}")
    raise ConfigError(f"unknown potential kind '{kind}'")


def build_grid(section: Dict[str, Any], dom: Optional[DomainSpec] = None) -> Grid:
    try:
        grid = Grid(int(section["M"]), np.array(section["a"], dtype=float), np.array(section["b"], dtype=float))
        if dom is not None:
            grid.check_anchors(dom)
    except _BUILD_ERRORS as e:
        raise ConfigError(f"invalid [grid]: {e}")
    return grid


def build_initial(kind: str, grid: Grid, dom: DomainSpec, pot: PotentialSpec, n: float, seed: int) -> PathState:
    """
    linear: the straight string from a to b.
    bridge: one Brownian bridge draw.
    invariant: one draw from nu_n by rejection.
    """
    if kind == "linear":
        return PathState(linear_profile(grid), grid)
    rng = spawn_stream(seed, PURPOSE_INITIAL, 0)
    if kind == "bridge":
        return sample_bridge(grid, rng)
    if kind == "invariant":
        return sample_invariant(grid, dom, pot, "nu_n", "rejection", rng, n=n).path
    raise ConfigError(f"unknown initial condition '{kind}'")


def build_sim_config(config: Dict[str, Any]) -> SimConfig:
    """The SimConfig described by a validated run configuration."""
    dom = build_domain(config["domain"])
    pot = build_potential(config["potential"], dom)
    grid = build_grid(config["grid"], dom)
    integ = config["integrator"]
    seed = int(config["master_seed"])
    try:
        initial = build_initial(integ.get("initial", "linear"), grid, dom, pot, float(integ["n"]), seed)
        cfg = SimConfig(
            grid=grid,
            dom=dom,
            pot=pot,
            n=float(integ["n"]),
            dt=float(integ["dt"]),
            t_end=float(integ["t_end"]),
            initial=initial,
            record_every=int(integ.get("record_every", 1)),
            seed=seed,
            **({"progress_every": int(integ["progress_every"])} if "progress_every" in integ else {}),
        )
    except _BUILD_ERRORS as e:
        raise ConfigError(f"invalid [integrator]: {e}")
    logger.info(
        "Built simulation: %s domain, %s potential, M=%d, n=%g, dt=%g, t_end=%g",
        dom.kind.value, pot.kind.value, grid.M, cfg.n, cfg.dt, cfg.t_end,
    )
    return cfg


# ========================================================================== #
# Verification plans
# ========================================================================== #
def _stationary_runs(cfg: SimConfig, replicas: int, dt: float, t_end: float, record_every: int):
    """Replicas started from independent nu_n draws."""
    starts = np.stack([
        sample_invariant(
            cfg.grid, cfg.dom, cfg.pot, "nu_n", "rejection",
            spawn_stream(cfg.seed, PURPOSE_INITIAL, r + 1), n=cfg.n,
        ).path.values
        for r in range(replicas)
    ])
    run_cfg = SimConfig(
        grid=cfg.grid, dom=cfg.dom, pot=cfg.pot, n=cfg.n, dt=dt, t_end=t_end,
        initial=cfg.initial, record_every=record_every, seed=cfg.seed,
        progress_every=cfg.progress_every,
    )
    return run_ensemble(run_cfg, starts)


def _ibp_test(
    grid: Grid, dom: DomainSpec, pot: PotentialSpec, n_values: Sequence[float],
    samples: int, seed: int, ess_floor: int,
) -> VerificationReport:
    parts = [
        (f"n{n:g}", verify_ibp(grid, dom, pot, n, samples=samples, seed=seed, ess_floor=ess_floor))
        for n in n_values
    ]
    return combine_reports("ibp", parts)


def _contact_test(cfg: SimConfig, eps_list: Sequence[float], gap: float, threshold: float) -> VerificationReport:
    trajectories = _stationary_runs(cfg, CONTACT_REPLICAS, cfg.dt, cfg.t_end, cfg.record_every)
    return verify_contact_uniqueness(trajectories, cfg.dom, eps_list, gap=gap, threshold=threshold)


def _holder_test(cfg: SimConfig, lags: Optional[Sequence[float]]) -> VerificationReport:
    dt = min(cfg.dt, 1e-5)
    record_every = 10
    if lags is None:
        lags = [10 * dt * f for f in (1, 3, 10, 30, 100)]
    length = 50 * max(lags)
    traj = _stationary_runs(cfg, 1, dt, length, record_every)[0]
    return verify_holder(traj, lags)


def _strong_feller_test(cfg: SimConfig, samples: int) -> VerificationReport:
    grid = cfg.grid
    functional = CylinderFunctional(sine_mode(grid, 1, 0), Tanh(Coord(0)), grid, "tanh(<e1,w>)")
    x = PathState(linear_profile(grid), grid)
    y = PathState(linear_profile(grid) + 0.05 * sine_mode(grid, 1, 0), grid)
    return verify_strong_feller(
        grid, cfg.dom, cfg.pot, cfg.n, functional.value, 1.0, x, y, 0.1,
        samples=samples, dt=cfg.dt, seed=cfg.seed,
    )


def build_test_plan(
    config: Dict[str, Any], names: Optional[Sequence[str]] = None
) -> List[Tuple[str, Callable[[], VerificationReport]]]:
    """
    One (name, thunk) per requested test, parameterised from [verify].
    Tests default to the list in [verify].tests.
    """
    verify = config.get("verify", {})
    names = list(names if names is not None else verify.get("tests", []))
    unknown = [name for name in names if name not in TEST_NAMES]
    if unknown:
        raise ConfigError(f"unknown verification tests: {', '.join(unknown)}")
    cfg = build_sim_config(config)
    grid, dom, pot, seed = cfg.grid, cfg.dom, cfg.pot, cfg.seed
    n_list = [float(n) for n in verify.get("n_list", [10.0, 100.0, 1000.0])]
    samples = int(verify.get("samples", 2000))
    ess_floor = int(verify.get("ess_floor", ESS_FLOOR))
    collar = default_collar(grid)
    eps_list = verify.get("eps_list", [collar, collar / 2, collar / 4])
    thunks = {
        "yosida": partial(
            verify_yosida, pot, dom, n_list,
            point_cloud_size=int(verify.get("point_cloud_size", 1000)), seed=seed,
        ),
        "ibp": partial(_ibp_test, grid, dom, pot, n_list[:2], 10 * samples, seed, ess_floor),
        "contraction": partial(verify_contraction, cfg, pairs=int(verify.get("pairs", 8))),
        "invariance": partial(
            verify_invariance, grid, dom, pot, cfg.n, float(verify.get("t_relax", 2.0)),
            samples=samples, dt=cfg.dt, seed=seed,
        ),
        "stability": partial(verify_stability, grid, dom, pot, n_list, samples=samples, seed=seed, ess_floor=ess_floor),
        "contact": partial(
            _contact_test, cfg, eps_list, float(verify.get("gap", MACRO_GAP)),
            float(verify.get("contact_threshold", CONTACT_FRACTION_THRESHOLD)),
        ),
        "holder": partial(_holder_test, cfg, verify.get("lags")),
        "strong_feller": partial(_strong_feller_test, cfg, samples),
        "reversibility": partial(
            verify_reversibility, grid, dom, pot, cfg.n, 10 * cfg.dt,
            samples=samples, dt=cfg.dt, seed=seed,
        ),
        "weak_form": partial(verify_weak_form, cfg),
    }
    logger.info("Verification plan: %s", ", ".join(names))
    return [(name, thunks[name]) for name in names]


def domain_from_descriptor(descriptor: str) -> DomainSpec:
    """Rebuild the domain stored in a trajectory descriptor."""
    try:
        section = json.loads(descriptor)["domain"]
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"trajectory descriptor has no usable [domain]: {e}")
    return build_domain(section)

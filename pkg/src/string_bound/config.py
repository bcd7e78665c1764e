"""
config.py

This module defines the numerical defaults and the default run
configuration for StringBound, and provides helpers to load and validate a
run-config file (TOML) and to save and load the viewer's last-used
parameters using QSettings.
"""

import copy
import json
import logging
import threading

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

from PyQt5.QtCore import QSettings

# Set up a module-level logger.
logger = logging.getLogger(__name__)

# Global lock to avoid race conditions
CONFIG_LOCK = threading.Lock()

# QSettings organization and application names
ORGANIZATION_NAME = "StringBound"
APPLICATION_NAME = "StringBoundViewer"
SETTINGS_KEY_VIEWER = "viewer_params"


class ConfigError(Exception):
    """Raised when a run configuration cannot be parsed or is invalid."""

    pass


# ========================================================================== #
# Geometry Constants
# ========================================================================== #
MAX_DIM = 8
PROJECTION_MAX_ITER = 10_000
PROJECTION_TOL = 1e-12
BOUNDARY_TOL_FACTOR = 1e-9  # boundary tolerance = factor * diameter
ELLIPSOID_BISECTION_STEPS = 100

# ========================================================================== #
# Potential Constants
# ========================================================================== #
PROX_TOL = 1e-12
PROX_MAX_ITER = 200
CUSTOM_PROX_MAX_ITER = 10_000
CONVEXITY_PAIRS = 256
ASSUMPTION_SAMPLES = 4096

# ========================================================================== #
# Path Space and Sampling Constants
# ========================================================================== #
MIN_NODES = 3
REJECTION_ATTEMPT_CAP = 10_000_000
REJECTION_BATCH = 4096

# ========================================================================== #
# Statistics and Verification Constants
# ========================================================================== #
SIGMA_LEVEL = 3.0
ESS_FLOOR = 500
MIN_CONTACT_SLICES = 200
CONTACT_FRACTION_THRESHOLD = 0.05
GAP_FRACTION = 0.05  # gap_nodes default = ceil(GAP_FRACTION * M)
MACRO_GAP = 0.2  # macroscopic cluster separation in theta
CONTRACTION_SLACK = 1e-8
LIPSCHITZ_SLACK = 1e-6
FD_STEP = 1e-6
FD_REL_TOL = 1e-5
PROGRESS_EVERY = 100  # log a progress line every N recorded frames
SLOPE_TOL = 0.05  # relative tolerance on measured decay slopes
ORACLE_TOL = 1e-3
HOLDER_SLOPE_TOL = 0.15
HOLDER_P4_SLOPE_TOL = 0.3
HOLDER_MIN_WINDOWS = 50  # run length / largest lag
DIFFUSIVE_BIAS = 0.05  # allowed relative drift bias of short-lag increments
ROUNDOFF_TOL = 1e-9
PERMUTATIONS = 999  # smallest permutation p-value 1/1000 must sit below the 3-sigma tail
ENERGY_SUBSAMPLE = 500
BOOTSTRAP_RESAMPLES = 100
CONTACT_REPLICAS = 8  # stationary runs pooled by the contact test

# ========================================================================== #
# Default run configuration
# ========================================================================== #
# Desk-scale one-dimensional setup: the string lives in the unit interval,
# pinned at its midpoint, with the reflection term only (phi == 0).
DEFAULT_RUN_CONFIG: Dict[str, Any] = {
    "master_seed": 20240611,
    "domain": {"kind": "interval", "lo": 0.0, "hi": 1.0},
    "potential": {"kind": "zero"},
    "grid": {"M": 31, "a": [0.5], "b": [0.5]},
    "integrator": {
        "n": 100.0,
        "dt": 1e-3,
        "t_end": 1.0,
        "record_every": 10,
        "initial": "linear",
    },
    "verify": {
        "tests": ["yosida", "contraction"],
        "n_list": [10.0, 100.0, 1000.0],
        "samples": 2000,
        "pairs": 8,
        "t_relax": 2.0,
        "workers": 2,
    },
    "output": {"directory": "runs", "excel": False},
}

# Allowed keys per section: key -> (accepted types, required)
_NUM = (int, float)
_LIST = (list,)
CONFIG_SCHEMA: Dict[str, Dict[str, Any]] = {
    "domain": {
        "kind": ((str,), True),
        "lo": (_NUM + _LIST, False),
        "hi": (_NUM + _LIST, False),
        "center": (_LIST, False),
        "radius": (_NUM, False),
        "semiaxes": (_LIST, False),
        "a": (_LIST, False),
        "b": (_LIST, False),
    },
    "potential": {
        "kind": ((str,), True),
        "center": (_LIST, False),
        "weight": (_NUM, False),
    },
    "grid": {
        "M": ((int,), True),
        "a": (_LIST, True),
        "b": (_LIST, True),
    },
    "integrator": {
        "n": (_NUM, True),
        "dt": (_NUM, True),
        "t_end": (_NUM, True),
        "record_every": ((int,), False),
        "initial": ((str,), False),
        "progress_every": ((int,), False),
    },
    "verify": {
        "tests": (_LIST, False),
        "n_list": (_LIST, False),
        "samples": ((int,), False),
        "pairs": ((int,), False),
        "t_relax": (_NUM, False),
        "lags": (_LIST, False),
        "eps_list": (_LIST, False),
        "gap": (_NUM, False),
        "point_cloud_size": ((int,), False),
        "ess_floor": ((int,), False),
        "contact_threshold": (_NUM, False),
        "workers": ((int,), False),
    },
    "output": {
        "directory": ((str,), False),
        "excel": ((bool,), False),
    },
}

DOMAIN_KINDS = {"interval", "box", "ball", "ellipsoid", "polytope"}
POTENTIAL_KINDS = {"zero", "quadratic", "log_barrier_integrable"}
INITIAL_KINDS = {"linear", "bridge", "invariant"}
TEST_NAMES = {
    "yosida",
    "ibp",
    "contraction",
    "invariance",
    "stability",
    "contact",
    "holder",
    "strong_feller",
    "reversibility",
    "weak_form",
}


def validate_config(config: Dict[str, Any]) -> None:
    """
    Validate a run configuration document.

    Unknown sections and keys are rejected, required keys must be present
    and every value must have an accepted type. Physical preconditions that
    can be checked without building runtime objects are checked here too.

    Args:
        config: The parsed run-config document.

    Raises:
        ConfigError: Listing every problem found.
    """
    problems: List[str] = []
    if "master_seed" not in config:
        problems.append("master_seed is mandatory")
    elif not isinstance(config["master_seed"], int) or config["master_seed"] < 0:
        problems.append("master_seed must be a non-negative integer")

    for section, body in config.items():
        if section == "master_seed":
            continue
        schema = CONFIG_SCHEMA.get(section)
        if schema is None:
            problems.append(f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for key, value in body.items():
            if key not in schema:
                problems.append(f"unknown key '{key}' in [{section}]")
                continue
            types, _ = schema[key]
            # bool is an int subclass; only accept it where bool is asked.
            if isinstance(value, bool) and bool not in types:
                problems.append(f"[{section}].{key} has invalid type bool")
            elif not isinstance(value, types):
                problems.append(
                    f"[{section}].{key} has invalid type "
                    f"{type(value).__name__}"
                )
        for key, (_, required) in schema.items():
            if required and key not in body:
                problems.append(f"missing key '{key}' in [{section}]")

    for section in ("domain", "potential", "grid", "integrator"):
        if section not in config:
            problems.append(f"missing section [{section}]")

    if not problems:
        problems.extend(_check_physical(config))

    if problems:
        for problem in problems:
            logger.error("Config problem: %s", problem)
        raise ConfigError("; ".join(problems))


def _check_physical(config: Dict[str, Any]) -> List[str]:
    """Range checks on the physical parameters."""
    problems: List[str] = []
    kind = config["domain"]["kind"]
    if kind not in DOMAIN_KINDS:
        problems.append(f"unknown domain kind '{kind}'")
    pot_kind = config["potential"]["kind"]
    if pot_kind not in POTENTIAL_KINDS:
        problems.append(f"unknown potential kind '{pot_kind}'")

    grid = config["grid"]
    if grid["M"] < MIN_NODES:
        problems.append(f"grid.M must be >= {MIN_NODES}")
    if len(grid["a"]) != len(grid["b"]):
        problems.append("grid.a and grid.b have different dimensions")
    elif not 1 <= len(grid["a"]) <= MAX_DIM:
        problems.append(f"dimension must be between 1 and {MAX_DIM}")

    integ = config["integrator"]
    n, dt = float(integ["n"]), float(integ["dt"])
    if n <= 0:
        problems.append("integrator.n must be positive")
    if dt <= 0:
        problems.append("integrator.dt must be positive")
    elif n > 0 and dt > 1.0 / (4.0 * n):
        problems.append(
            f"integrator.dt={dt} violates dt <= 1/(4n) = {1.0 / (4.0 * n)}"
        )
    if float(integ["t_end"]) < dt:
        problems.append("integrator.t_end must be >= dt")
    if integ.get("record_every", 1) < 1:
        problems.append("integrator.record_every must be >= 1")
    initial = integ.get("initial", "linear")
    if initial not in INITIAL_KINDS:
        problems.append(f"unknown initial condition '{initial}'")

    verify = config.get("verify", {})
    for name in verify.get("tests", []):
        if name not in TEST_NAMES:
            problems.append(f"unknown verification test '{name}'")
    n_list = verify.get("n_list", [])
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        problems.append("verify.n_list must be increasing")
    if "stability" in verify.get("tests", []) and "n_list" in verify and len(n_list) < 3:
        problems.append("verify.n_list needs at least 3 entries for the stability test")
    return problems


def load_run_config(path: Path) -> Dict[str, Any]:
    """
    Load and validate a run configuration from a TOML file.

    Args:
        path: Location of the run-config file.

    Returns:
        The validated configuration document.

    Raises:
        ConfigError: If the file cannot be read, parsed or validated.
    """
    with CONFIG_LOCK:
        try:
            with open(path, "rb") as handle:
                config = tomllib.load(handle)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}")
        validate_config(config)
        logger.info("Loaded run config from %s", path)
        return config


def default_run_config() -> Dict[str, Any]:
    """Return a fresh copy of the default run configuration."""
    return copy.deepcopy(DEFAULT_RUN_CONFIG)


# ===== Viewer settings ==================================================== #
# The viewer remembers the simulation parameters last used in its
# parameter dialog.
DEFAULT_VIEWER_PARAMS: Dict[str, Any] = {
    "n": 100.0,
    "dt": 1e-3,
    "M": 63,
    "seed": 1,
    "frame_interval_ms": 50,
}


def load_viewer_settings(
    default_params: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Load the viewer parameters from QSettings.

    Args:
        default_params: Parameters to fall back on when nothing valid is
        stored. Defaults to DEFAULT_VIEWER_PARAMS.

    Returns:
        The stored parameters if available and valid, otherwise a copy of
        the defaults.
    """
    defaults = default_params or DEFAULT_VIEWER_PARAMS
    with CONFIG_LOCK:
        settings = QSettings(ORGANIZATION_NAME, APPLICATION_NAME)
        params_str = settings.value(SETTINGS_KEY_VIEWER, "")
        if params_str:
            try:
                loaded = json.loads(params_str)
                if set(defaults).issubset(loaded):
                    return loaded
                logger.error("Invalid viewer settings, using defaults")
            except Exception as e:
                logger.error("Error parsing viewer settings: %s", e)
        else:
            logger.info("No stored viewer settings found, using defaults")
        return copy.deepcopy(defaults)


def save_viewer_settings(params: Dict[str, Any]) -> None:
    """
    Save the viewer parameters using QSettings.

    Args:
        params: Parameter dictionary to persist.
    """
    with CONFIG_LOCK:
        settings = QSettings(ORGANIZATION_NAME, APPLICATION_NAME)
        try:
            settings.setValue(SETTINGS_KEY_VIEWER, json.dumps(params))
        except Exception as e:
            logger.error("Error saving viewer settings: %s", e)
            raise

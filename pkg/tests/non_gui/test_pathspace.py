# test_pathspace.py
import numpy as np
import pytest

from geometry import DomainSpec
from pathspace import (
    Grid,
    PathState,
    SamplerError,
    bump,
    effective_sample_size,
    grid_laplacian,
    inner,
    linear_profile,
    norm,
    partition_estimate,
    potential_energy,
    sample_bridge,
    sample_invariant,
    sample_invariant_batch,
    sine_mode,
    weighted_mean,
)
from potential import PotentialSpec
from seeding import PURPOSE_BRIDGE, spawn_stream


@pytest.mark.non_gui
def test_grid_geometry():
    grid = Grid(9, [0.0], [1.0])
    assert grid.dtheta == pytest.approx(0.1)
    assert grid.theta == pytest.approx(np.arange(1, 10) / 10)
    assert grid.full_theta[[0, -1]] == pytest.approx([0.0, 1.0])
    assert linear_profile(grid)[:, 0] == pytest.approx(grid.theta)


@pytest.mark.non_gui
def test_invalid_grids_and_paths_rejected(small_grid):
    with pytest.raises(SamplerError):
        Grid(2, [0.0], [0.0])
    with pytest.raises(SamplerError):
        Grid(5, [0.0], [0.0, 1.0])
    with pytest.raises(SamplerError):
        PathState(np.zeros((small_grid.M + 1, 1)), small_grid)
    values = np.zeros((small_grid.M, 1))
    values[3] = np.nan
    with pytest.raises(SamplerError):
        PathState(values, small_grid)


@pytest.mark.non_gui
def test_anchors_must_be_inside():
    grid = Grid(5, [0.0], [0.5])
    with pytest.raises(SamplerError, match="open domain"):
        grid.check_anchors(DomainSpec.interval(0.0, 1.0))


@pytest.mark.non_gui
def test_sine_modes_are_orthonormal(small_grid):
    e1, e2 = sine_mode(small_grid, 1), sine_mode(small_grid, 2)
    assert small_grid.dtheta * e1 @ e1 == pytest.approx(1.0)
    assert small_grid.dtheta * e1 @ e2 == pytest.approx(0.0, abs=1e-12)
    field = sine_mode(small_grid, 1, 0)
    assert field.shape == (small_grid.M, 1)
    assert inner(field, field, small_grid) == pytest.approx(1.0)


@pytest.mark.non_gui
def test_sine_modes_are_laplacian_eigenvectors(small_grid):
    e1 = sine_mode(small_grid, 1, 0)
    h = small_grid.dtheta
    eigenvalue = 2.0 / h**2 * (1.0 - np.cos(np.pi * h))
    assert grid_laplacian(e1, small_grid) == pytest.approx(-eigenvalue * e1)


@pytest.mark.non_gui
def test_bridge_marginals():
    grid = Grid(15, [0.0], [1.0])
    paths = sample_bridge(grid, spawn_stream(3, PURPOSE_BRIDGE), 20000)
    theta = grid.theta
    mean = paths[:, :, 0].mean(axis=0)
    variance = paths[:, :, 0].var(axis=0)
    stderr = np.sqrt(theta * (1 - theta) / len(paths))
    assert np.all(np.abs(mean - theta) < 5 * stderr)
    assert variance == pytest.approx(theta * (1 - theta), rel=0.05)


@pytest.mark.non_gui
def test_single_bridge_draw_is_a_path(small_grid):
    path = sample_bridge(small_grid, spawn_stream(0, PURPOSE_BRIDGE))
    assert isinstance(path, PathState)
    assert path.full().shape == (small_grid.M + 2, 1)


@pytest.mark.non_gui
def test_rejection_samples_stay_in_domain(small_grid, unit_interval, zero_potential):
    batch = sample_invariant_batch(
        small_grid, unit_interval, zero_potential, "nu", "rejection",
        spawn_stream(0, PURPOSE_BRIDGE), 200,
    )
    assert batch.paths.shape == (200, small_grid.M, 1)
    assert np.all((batch.paths >= 0) & (batch.paths <= 1))
    assert np.all(batch.log_weights == 0)
    assert 0 < batch.acceptance_rate <= 1


@pytest.mark.non_gui
def test_importance_weights_vanish_outside_under_nu(small_grid, unit_interval, zero_potential):
    batch = sample_invariant_batch(
        small_grid, unit_interval, zero_potential, "nu", "importance",
        spawn_stream(0, PURPOSE_BRIDGE), 500,
    )
    outside = np.any((batch.paths < 0) | (batch.paths > 1), axis=(1, 2))
    assert np.all(np.isneginf(batch.log_weights[outside]))
    assert np.all(batch.log_weights[~outside] == 0)


@pytest.mark.non_gui
def test_yosida_energy_is_finite_outside(small_grid, zero_potential):
    path = PathState(np.full((small_grid.M, 1), 1.1), small_grid)
    assert potential_energy(path, zero_potential) == np.inf
    energy = potential_energy(path, zero_potential, "yosida_Un", n=100.0)
    assert energy == pytest.approx(100.0 * 0.01 * small_grid.M * small_grid.dtheta)


@pytest.mark.non_gui
def test_sampler_argument_errors(small_grid, unit_interval, zero_potential):
    rng = spawn_stream(0, PURPOSE_BRIDGE)
    with pytest.raises(SamplerError):
        sample_invariant(small_grid, unit_interval, zero_potential, "nu_n", "rejection", rng)
    with pytest.raises(SamplerError):
        sample_invariant(small_grid, unit_interval, zero_potential, "nu", "metropolis", rng)
    with pytest.raises(SamplerError, match="exceeded"):
        sample_invariant_batch(
            small_grid, DomainSpec.interval(0.49, 0.51), PotentialSpec.zero(DomainSpec.interval(0.49, 0.51)),
            "nu", "rejection", rng, 10, attempt_cap=100,
        )


@pytest.mark.non_gui
def test_weighted_statistics():
    values = np.array([1.0, 2.0, 3.0, 4.0])
    mean, _ = weighted_mean(values, np.zeros(4))
    assert mean == pytest.approx(2.5)
    assert effective_sample_size(np.zeros(4)) == pytest.approx(4.0)
    assert effective_sample_size(np.array([0.0, -np.inf, -np.inf, -np.inf])) == pytest.approx(1.0)


@pytest.mark.non_gui
def test_norms_of_a_sine_mode(small_grid):
    e2 = sine_mode(small_grid, 2, 0)
    assert norm(e2, "L2") == pytest.approx(1.0)
    assert norm(e2, "Hminus1") == pytest.approx(0.5)
    assert norm(np.zeros_like(e2), "sobolev") == 0.0
    assert norm(e2, "sobolev") > 0
    with pytest.raises(SamplerError):
        norm(e2, "sobolev", eta=0.6)


@pytest.mark.non_gui
def test_bump_vanishes_at_the_ends_with_exact_curvature():
    grid = Grid(199, [0.0], [0.0])
    h, h2 = bump(grid, 0.5, 0.3)
    assert h[0, 0] == 0 and h[-1, 0] == 0
    interior = slice(40, 160)
    assert grid_laplacian(h, grid)[interior] == pytest.approx(h2[interior], abs=5e-2)
    with pytest.raises(SamplerError):
        bump(grid, 0.1, 0.3)


@pytest.mark.non_gui
@pytest.mark.parametrize("center", [None, [0.8]])
def test_rejection_and_importance_agree_under_nu_n(unit_interval, center):
    grid = Grid(15, [0.3], [0.3])
    pot = PotentialSpec.zero(unit_interval) if center is None else PotentialSpec.quadratic(unit_interval, center)
    rejected = sample_invariant_batch(
        grid, unit_interval, pot, "nu_n", "rejection", spawn_stream(5, PURPOSE_BRIDGE), 4000, n=10.0,
    )
    weighted = sample_invariant_batch(
        grid, unit_interval, pot, "nu_n", "importance", spawn_stream(6, PURPOSE_BRIDGE), 4000, n=10.0,
    )
    mid = grid.M // 2
    direct = rejected.paths[:, mid, 0]
    direct_mean, direct_se = direct.mean(), direct.std(ddof=1) / np.sqrt(direct.size)
    mean, se = weighted_mean(weighted.paths[:, mid, 0], weighted.log_weights)
    assert abs(direct_mean - mean) <= 4.0 * np.hypot(direct_se, se)


@pytest.mark.non_gui
@pytest.mark.parametrize("center", [None, [0.8]])
def test_partition_estimates_lie_in_the_unit_interval(small_grid, unit_interval, center):
    pot = PotentialSpec.zero(unit_interval) if center is None else PotentialSpec.quadratic(unit_interval, center)
    exact, exact_se = partition_estimate(small_grid, unit_interval, pot, spawn_stream(7, PURPOSE_BRIDGE), 2000)
    penalised = [
        partition_estimate(small_grid, unit_interval, pot, spawn_stream(7, PURPOSE_BRIDGE), 2000, n=n)[0]
        for n in (10.0, 100.0)
    ]
    assert 0.0 < exact <= 1.0 and exact_se > 0
    assert all(0.0 < z <= 1.0 for z in penalised)
    # same bridge draws, and U_n <= U grows with n towards U
    assert penalised[0] >= penalised[1] - 1e-12
    assert penalised[1] >= exact - 1e-12

# test_verify.py
import json

import numpy as np
import pytest
from scipy.spatial.distance import cdist

import verify
from config import PERMUTATIONS
from geometry import DomainSpec
from integrator import SimConfig, Trajectory
from observables import Const, CylinderFunctional
from pathspace import Grid, PathState, bump, linear_profile, sine_mode
from potential import PotentialSpec
from verify import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    SIGMA_P,
    VerificationError,
    VerificationReport,
    bridge_ibp_oracle,
    combine_reports,
    energy_two_sample,
    summary_table,
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


def quiet_config(grid, dom, pot, **changes):
    params = dict(
        grid=grid, dom=dom, pot=pot, n=100.0, dt=1e-3, t_end=0.05,
        initial=PathState(linear_profile(grid), grid), record_every=5, seed=3,
        progress_every=0,
    )
    params.update(changes)
    return SimConfig(**params)


def random_walk_trajectory(count=100_001, spacing=1e-4, M=15, seed=0):
    """Independent Brownian motions at every node, recorded every spacing."""
    grid = Grid(M, [0.0], [0.0])
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, np.sqrt(spacing), size=(count, M, 1))
    steps[0] = 0.0
    states = np.cumsum(steps, axis=0)
    return Trajectory(
        times=np.arange(count) * spacing,
        states=states,
        penalty_accum=np.zeros_like(states),
        grid=grid,
        dt=1e-5,
        record_every=10,
        n=1.0,
        seed=seed,
        descriptor="{}",
    )


@pytest.mark.non_gui
def test_report_json_writes_non_finite_as_null():
    report = VerificationReport(
        test_name="demo", config={"n": np.float64(2.0)}, estimates={"slope": float("nan")},
        stderrs={}, thresholds={"tol": np.float64(0.1)}, criteria={"ok": np.bool_(True)},
        verdict=PASS, seeds=["0:noise:0"], wall_time=0.5,
    )
    decoded = json.loads(report.to_json())
    assert decoded["estimates"]["slope"] is None
    assert decoded["criteria"]["ok"] is True
    assert decoded["config"]["n"] == 2.0
    assert report.passed


@pytest.mark.non_gui
def test_summary_table_counts_criteria():
    reports = [
        VerificationReport("a", {}, {}, {}, {}, {"x": True, "y": False}, FAIL, [], 1.0),
        VerificationReport("b", {}, {}, {}, {}, {"x": True}, PASS, [], 2.0, note=""),
    ]
    table = summary_table(reports)
    assert table["test"].tolist() == ["a", "b"]
    assert table["criteria_passed"].tolist() == [1, 1]
    assert table.loc[0, "failed"] == "y"


@pytest.mark.non_gui
def test_combine_reports_prefixes_keys_and_ranks_verdicts():
    ok = VerificationReport("ibp", {}, {"z": 1.0}, {"z": 0.1}, {}, {"small": True}, PASS, ["1:a:0"], 1.0)
    bad = VerificationReport("ibp", {}, {"z": 4.0}, {}, {}, {"small": False}, FAIL, ["1:a:0"], 2.0)
    unsure = VerificationReport("ibp", {}, {}, {}, {}, {}, INCONCLUSIVE, [], 0.5, note="low ess")
    merged = combine_reports("ibp", [("n10", ok), ("n100", bad)])
    assert merged.verdict == FAIL
    assert merged.estimates == {"n10_z": 1.0, "n100_z": 4.0}
    assert merged.stderrs == {"n10_z": 0.1}
    assert merged.seeds == ["1:a:0"]
    assert merged.wall_time == 3.0
    with_unsure = combine_reports("ibp", [("n10", bad), ("n100", unsure)])
    assert with_unsure.verdict == INCONCLUSIVE
    assert with_unsure.note == "n100: low ess"
    assert combine_reports("ibp", [("n10", ok)]).verdict == PASS
    with pytest.raises(VerificationError):
        combine_reports("ibp", [])


@pytest.mark.non_gui
def test_permutation_count_can_reach_the_sigma_threshold():
    assert 1.0 / (PERMUTATIONS + 1) < SIGMA_P


@pytest.mark.non_gui
def test_energy_two_sample_rejects_shifted_laws():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 3))
    y = rng.normal(loc=5.0, size=(500, 3))
    statistic, pvalue = energy_two_sample(x, y, np.random.default_rng(2))
    assert statistic > 0
    assert pvalue == pytest.approx(1.0 / (PERMUTATIONS + 1))
    assert pvalue < SIGMA_P


@pytest.mark.non_gui
def test_energy_two_sample_matches_direct_statistic():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 2))
    y = rng.normal(loc=0.5, size=(30, 2))
    statistic, _ = energy_two_sample(x, y, np.random.default_rng(4), resamples=9)
    direct = 2 * cdist(x, y).mean() - cdist(x, x).mean() - cdist(y, y).mean()
    assert statistic == pytest.approx(direct, rel=1e-10)


@pytest.mark.non_gui
def test_energy_two_sample_accepts_equal_laws():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 2))
    y = rng.normal(size=(200, 2))
    _, pvalue = energy_two_sample(x, y, np.random.default_rng(6))
    assert pvalue > SIGMA_P


@pytest.mark.non_gui
def test_yosida_zero_potential_passes(unit_interval, zero_potential):
    report = verify_yosida(
        zero_potential, unit_interval, [10.0, 100.0, 1000.0],
        point_cloud_size=200, pairs=2000, fd_points=50,
    )
    assert report.verdict == PASS, report.criteria
    assert report.estimates["exterior_formula_error"] <= 1e-12
    assert report.seeds == ["0:yosida-points:0", "0:yosida-assumption:0"]


@pytest.mark.non_gui
def test_yosida_quadratic_properties(unit_interval):
    pot = PotentialSpec.quadratic(unit_interval, [0.5], weight=2.0)
    report = verify_yosida(pot, unit_interval, [1.0, 10.0, 100.0], point_cloud_size=200, pairs=2000, fd_points=50)
    for key in (
        "values_monotone", "values_below_phi", "values_converge", "exterior_values_increase",
        "gradient_lipschitz", "gradient_norm_monotone", "gradient_norm_bounded",
        "gradient_converges", "finite_difference",
    ):
        assert report.criteria[key], key


@pytest.mark.non_gui
def test_yosida_needs_increasing_n(unit_interval, zero_potential):
    with pytest.raises(VerificationError):
        verify_yosida(zero_potential, unit_interval, [100.0, 10.0])


@pytest.mark.non_gui
def test_bridge_oracle_is_exact_on_the_grid():
    grid = Grid(31, [0.2], [0.7])
    h, _ = bump(grid, 0.5, 0.3)
    lhs, rhs = bridge_ibp_oracle(grid, sine_mode(grid, 1, 0), h)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.non_gui
def test_ibp_report_structure(small_grid, unit_interval, zero_potential):
    report = verify_ibp(small_grid, unit_interval, zero_potential, None, samples=2000, seed=1, ess_floor=500)
    assert report.verdict in (PASS, FAIL)
    assert report.criteria["streams_disjoint"]
    assert report.criteria["oracle_closed_form"]
    assert report.estimates["ess"] == pytest.approx(2000)
    assert "F0_h0_z" in report.estimates and "F3_h1_z" in report.estimates


@pytest.mark.non_gui
def test_ibp_rejects_directions_touching_the_ends(small_grid, unit_interval, zero_potential):
    F = CylinderFunctional(sine_mode(small_grid, 1, 0), Const(1.0), small_grid)
    with pytest.raises(VerificationError):
        verify_ibp(small_grid, unit_interval, zero_potential, 10.0, [F], [np.ones((small_grid.M, 1))])


@pytest.mark.non_gui
def test_ibp_needs_a_smooth_boundary():
    square = DomainSpec.box([0.0, 0.0], [1.0, 1.0])
    grid = Grid(15, [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(VerificationError, match="smooth boundary"):
        verify_ibp(grid, square, PotentialSpec.zero(square), 10.0)


@pytest.mark.non_gui
def test_contraction_passes_for_the_heat_flow(small_grid, unit_interval, zero_potential):
    cfg = quiet_config(small_grid, unit_interval, zero_potential, noise_scale=0.0)
    report = verify_contraction(cfg, pairs=3)
    assert report.verdict == PASS, report.criteria
    assert report.criteria["equal_initials_stay_equal"]
    assert report.estimates["half_lambda1_M127"] == pytest.approx(np.pi**2 / 2, rel=1e-3)
    with pytest.raises(VerificationError):
        verify_contraction(cfg, pairs=1)


@pytest.mark.non_gui
def test_contraction_measures_slopes_on_refined_grids(small_grid, unit_interval, zero_potential):
    cfg = quiet_config(small_grid, unit_interval, zero_potential)
    report = verify_contraction(cfg, pairs=2)
    for M in (31, 63, 127):
        half = report.estimates[f"half_lambda1_M{M}"]
        discrete_rate = np.log1p(cfg.dt * half) / cfg.dt
        assert report.estimates[f"measured_slope_M{M}"] == pytest.approx(-discrete_rate, rel=1e-8)
        assert report.criteria[f"e1_decay_slope_M{M}"]
    slopes = [report.estimates[f"measured_slope_M{M}"] for M in (31, 63, 127)]
    assert slopes[0] > slopes[1] > slopes[2] > -np.pi**2 / 2
    assert report.criteria["measured_rate_approaches_continuum"]
    assert "3:contraction-sweep:127" in report.seeds


@pytest.mark.non_gui
def test_contraction_skips_continuum_check_with_a_potential(small_grid, unit_interval):
    pot = PotentialSpec.quadratic(unit_interval, [0.5], weight=2.0)
    report = verify_contraction(quiet_config(small_grid, unit_interval, pot, noise_scale=0.0), pairs=2)
    assert "measured_rate_approaches_continuum" not in report.criteria
    assert report.criteria["e1_decay_slope_M127"]


@pytest.mark.non_gui
def test_weak_form_passes(small_grid, unit_interval, zero_potential):
    report = verify_weak_form(quiet_config(small_grid, unit_interval, zero_potential), replicas=2)
    assert report.verdict == PASS, report.criteria
    assert report.seeds == ["3:weak-form:0", "3:weak-form:1"]


@pytest.mark.non_gui
def test_holder_scaling_of_a_random_walk():
    traj = random_walk_trajectory()
    report = verify_holder(traj, [1e-4, 1e-3, 1e-2])
    assert report.verdict == PASS, report.estimates
    assert report.estimates["slope_p2"] == pytest.approx(1.0, abs=0.15)


@pytest.mark.non_gui
def test_holder_argument_checks():
    traj = random_walk_trajectory(count=2001)
    with pytest.raises(VerificationError, match="10 dt"):
        verify_holder(traj, [1e-5, 1e-3])
    with pytest.raises(VerificationError, match="two decades"):
        verify_holder(traj, [1e-4, 1e-3])


@pytest.mark.non_gui
def test_holder_short_run_is_inconclusive():
    traj = random_walk_trajectory(count=2001)
    report = verify_holder(traj, [1e-4, 1e-3, 1e-2])
    assert report.verdict == INCONCLUSIVE
    assert "windows" in report.note


def single_contact_trajectory(grid):
    states = np.full((3, grid.M, 1), 0.5)
    states[1, 5, 0] = 0.995
    return Trajectory(
        times=np.array([0.0, 0.1, 0.2]), states=states, penalty_accum=np.zeros_like(states),
        grid=grid, dt=0.01, record_every=10, n=10.0, seed=0, descriptor="{}",
    )


@pytest.mark.non_gui
def test_contact_with_few_slices_is_inconclusive(small_grid, unit_interval):
    traj = single_contact_trajectory(small_grid)
    report = verify_contact_uniqueness([traj], unit_interval, [0.02, 0.01])
    assert report.verdict == INCONCLUSIVE
    passing = verify_contact_uniqueness([traj], unit_interval, [0.02, 0.01], min_slices=1)
    assert passing.verdict == PASS
    assert passing.estimates["fraction_eps0.01"] == 0.0
    with pytest.raises(VerificationError):
        verify_contact_uniqueness([], unit_interval, [0.01])


@pytest.mark.non_gui
def test_contact_detects_two_far_clusters(small_grid, unit_interval):
    traj = single_contact_trajectory(small_grid)
    states = traj.states.copy()
    states[1, 12, 0] = 0.005
    doubled = Trajectory(
        times=traj.times, states=states, penalty_accum=traj.penalty_accum, grid=small_grid,
        dt=0.01, record_every=10, n=10.0, seed=0, descriptor="{}",
    )
    report = verify_contact_uniqueness([doubled], unit_interval, [0.02, 0.01], min_slices=1)
    assert report.verdict == FAIL
    assert not report.criteria["fraction_small"]


def contact_trajectory(grid, states):
    return Trajectory(
        times=0.1 * np.arange(len(states)), states=states, penalty_accum=np.zeros_like(states),
        grid=grid, dt=0.01, record_every=10, n=10.0, seed=0, descriptor="{}",
    )


@pytest.mark.non_gui
def test_contact_multiplicity_that_vanishes_with_eps_passes(small_grid, unit_interval):
    states = np.full((40, small_grid.M, 1), 0.5)
    states[:, 3, 0] = 0.985  # within 0.02 of the top, not within 0.01
    states[:, 12, 0] = 0.005
    report = verify_contact_uniqueness(
        [contact_trajectory(small_grid, states)], unit_interval, [0.02, 0.01], min_slices=1
    )
    assert report.estimates["fraction_eps0.02"] == 1.0
    assert report.estimates["fraction_eps0.01"] == 0.0
    assert report.estimates["fraction_drop_z"] > 3.0
    assert report.verdict == PASS, report.criteria


@pytest.mark.non_gui
def test_contact_flat_multiplicity_fails_the_decrease(small_grid, unit_interval):
    states = np.full((40, small_grid.M, 1), 0.5)
    states[:, 12, 0] = 0.005
    states[0, 3, 0] = 0.995
    report = verify_contact_uniqueness(
        [contact_trajectory(small_grid, states)], unit_interval, [0.02, 0.01], min_slices=1
    )
    assert report.criteria["fraction_trend"]
    assert report.criteria["fraction_small"]
    assert not report.criteria["fraction_decrease"]
    assert report.verdict == FAIL


@pytest.mark.non_gui
def test_strong_feller_bound_holds(small_grid, unit_interval, zero_potential):
    x = PathState(linear_profile(small_grid), small_grid)
    y = PathState(linear_profile(small_grid) + 0.05 * sine_mode(small_grid, 1, 0), small_grid)
    report = verify_strong_feller(
        small_grid, unit_interval, zero_potential, 100.0,
        lambda paths: np.tanh(paths[..., 0].mean(axis=-1)), 1.0, x, y, 0.02, samples=200,
    )
    assert report.verdict == PASS, report.estimates
    with pytest.raises(VerificationError):
        verify_strong_feller(small_grid, unit_interval, zero_potential, 100.0, np.tanh, 1.0, x, y, 0.0)


@pytest.mark.non_gui
def test_argument_checks_of_sampling_tests(small_grid, unit_interval, zero_potential):
    with pytest.raises(VerificationError):
        verify_invariance(small_grid, unit_interval, zero_potential, 10.0, -1.0)
    with pytest.raises(VerificationError):
        verify_stability(small_grid, unit_interval, zero_potential, [10.0])
    with pytest.raises(VerificationError, match="3 entries"):
        verify_stability(small_grid, unit_interval, zero_potential, [10.0, 100.0])


@pytest.mark.non_gui
@pytest.mark.slow
def test_invariance_report_structure():
    dom = DomainSpec.interval(0.0, 2.0)
    grid = Grid(15, [1.0], [1.0])
    report = verify_invariance(grid, dom, PotentialSpec.zero(dom), 10.0, 0.05, samples=300)
    for case in ("relaxed", "from_profile"):
        for key in ("ks_e1", "ks_e2", "ks_depth", "energy"):
            assert f"{case}_{key}" in report.criteria
    assert report.verdict in (PASS, FAIL)


@pytest.mark.non_gui
@pytest.mark.slow
def test_invariance_fails_when_runs_drift_away(monkeypatch):
    dom = DomainSpec.interval(0.0, 2.0)
    grid = Grid(15, [1.0], [1.0])
    monkeypatch.setattr(
        verify, "ensemble_final_states",
        lambda sim, initials, first_replica=0: np.asarray(initials) + 0.5,
    )
    report = verify_invariance(grid, dom, PotentialSpec.zero(dom), 10.0, 0.05, samples=300)
    assert report.verdict == FAIL
    assert not report.criteria["relaxed_energy"]
    assert report.estimates["relaxed_energy_p"] < SIGMA_P


@pytest.mark.non_gui
@pytest.mark.slow
def test_stability_report_structure():
    dom = DomainSpec.interval(0.0, 2.0)
    grid = Grid(15, [1.0], [1.0])
    report = verify_stability(
        grid, dom, PotentialSpec.zero(dom), [10.0, 100.0, 1000.0], samples=300, t=0.02, ess_floor=50
    )
    assert "exterior_mass_n10" in report.estimates
    assert "cauchy_n100_n1000" in report.estimates
    assert "dynamic_cauchy_decrease" in report.criteria
    assert "exterior_mass_decreases" in report.criteria


@pytest.mark.non_gui
@pytest.mark.slow
def test_stability_flat_cauchy_distances_fail(monkeypatch):
    dom = DomainSpec.interval(0.0, 2.0)
    grid = Grid(15, [1.0], [1.0])
    calls = []

    def same_law_for_every_n(sim, initials, first_replica=0):
        calls.append(sim.n)
        return np.asarray(initials) + 0.1 * sine_mode(grid, 1, 0)

    monkeypatch.setattr(verify, "ensemble_final_states", same_law_for_every_n)
    report = verify_stability(
        grid, dom, PotentialSpec.zero(dom), [10.0, 100.0, 1000.0], samples=200, t=0.02, ess_floor=1
    )
    assert calls == [10.0, 100.0, 1000.0]
    assert report.estimates["cauchy_n10_n100"] == 0.0
    assert report.criteria["dynamic_cauchy_trend"]
    assert not report.criteria["dynamic_cauchy_decrease"]
    assert report.verdict != PASS


@pytest.mark.non_gui
@pytest.mark.slow
def test_reversibility_report_structure():
    dom = DomainSpec.interval(0.0, 2.0)
    grid = Grid(15, [1.0], [1.0])
    report = verify_reversibility(grid, dom, PotentialSpec.zero(dom), 10.0, 0.01, samples=300)
    assert {"symmetric", "diffusive_scaling"} <= set(report.criteria)
    assert report.estimates["dirichlet_energy"] == pytest.approx(0.5)

# test_geometry.py
import numpy as np
import pytest

from geometry import (
    DomainError,
    DomainSpec,
    boundary_distance,
    bounding_box,
    contains,
    distance,
    inner_normal,
    inradius,
    interior_witness,
    nearest_boundary_point,
    project,
    sample_uniform,
)
from seeding import spawn_stream

TRIANGLE = DomainSpec.polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0])


@pytest.mark.non_gui
def test_interval_membership_open_and_closed(unit_interval):
    assert contains(unit_interval, 0.5)
    assert not contains(unit_interval, 1.0, "open")
    assert contains(unit_interval, 1.0, "closed")
    assert not contains(unit_interval, 1.2, "closed")


@pytest.mark.non_gui
def test_membership_is_vectorised():
    ball = DomainSpec.ball([0.0, 0.0], 1.0)
    inside = contains(ball, np.array([[0.0, 0.0], [2.0, 0.0], [0.6, 0.6]]))
    assert inside.tolist() == [True, False, True]


@pytest.mark.non_gui
def test_unknown_membership_mode_rejected(unit_interval):
    with pytest.raises(DomainError):
        contains(unit_interval, 0.5, "half-open")


@pytest.mark.non_gui
@pytest.mark.parametrize(
    "dom, point, expected",
    [
        (DomainSpec.box([0.0, 0.0], [1.0, 2.0]), [3.0, -1.0], [1.0, 0.0]),
        (DomainSpec.ball([0.0, 0.0], 1.0), [3.0, 4.0], [0.6, 0.8]),
        (DomainSpec.ellipsoid([0.0, 0.0], [2.0, 1.0]), [3.0, 0.0], [2.0, 0.0]),
        (TRIANGLE, [1.0, 1.0], [0.5, 0.5]),
    ],
)
def test_projection_onto_closure(dom, point, expected):
    assert project(dom, np.array(point)) == pytest.approx(expected, abs=1e-8)


@pytest.mark.non_gui
def test_projection_leaves_interior_points_alone():
    point = np.array([0.2, 0.3])
    assert np.array_equal(project(TRIANGLE, point), point)


@pytest.mark.non_gui
def test_distance_is_zero_exactly_on_the_closure():
    ball = DomainSpec.ball([0.0, 0.0], 1.0)
    assert distance(ball, np.array([0.5, 0.0])) == 0.0
    assert distance(ball, np.array([1.0, 0.0])) == 0.0
    assert distance(ball, np.array([2.0, 0.0])) == pytest.approx(1.0)


@pytest.mark.non_gui
def test_boundary_distance_inside_and_outside():
    box = DomainSpec.box([0.0, 0.0], [1.0, 2.0])
    assert boundary_distance(box, np.array([0.25, 1.0])) == pytest.approx(0.25)
    assert boundary_distance(box, np.array([1.5, 1.0])) == pytest.approx(0.5)
    assert boundary_distance(TRIANGLE, np.array([0.25, 0.25])) == pytest.approx(0.25)


@pytest.mark.non_gui
def test_nearest_boundary_point_of_interior_point():
    box = DomainSpec.box([0.0, 0.0], [1.0, 2.0])
    assert nearest_boundary_point(box, np.array([0.9, 1.0])) == pytest.approx([1.0, 1.0])


@pytest.mark.non_gui
def test_inner_normals():
    interval = DomainSpec.interval(0.0, 1.0)
    assert inner_normal(interval, np.array([0.0])) == pytest.approx([1.0])
    assert inner_normal(interval, np.array([1.0])) == pytest.approx([-1.0])
    ball = DomainSpec.ball([0.0, 0.0], 2.0)
    assert inner_normal(ball, np.array([0.0, 2.0])) == pytest.approx([0.0, -1.0])
    box = DomainSpec.box([0.0, 0.0], [1.0, 1.0])
    corner = inner_normal(box, np.array([0.0, 0.0]))
    assert corner == pytest.approx([1.0 / np.sqrt(2.0)] * 2)


@pytest.mark.non_gui
def test_inner_normal_requires_boundary_point(unit_interval):
    with pytest.raises(DomainError):
        inner_normal(unit_interval, np.array([0.5]))


@pytest.mark.non_gui
def test_polytope_chebyshev_centre():
    assert inradius(TRIANGLE) == pytest.approx(1.0 / (2.0 + np.sqrt(2.0)))
    assert contains(TRIANGLE, interior_witness(TRIANGLE))


@pytest.mark.non_gui
@pytest.mark.parametrize(
    "build",
    [
        lambda: DomainSpec.interval(1.0, 0.0),
        lambda: DomainSpec.ball([0.0], 0.0),
        lambda: DomainSpec.ellipsoid([0.0, 0.0], [1.0, -1.0]),
        lambda: DomainSpec.polytope([[1.0, 0.0]], [1.0]),
        lambda: DomainSpec.polytope([[1.0], [-1.0]], [0.0, -1.0]),
        lambda: DomainSpec.box([0.0] * 9, [1.0] * 9),
    ],
)
def test_invalid_domains_rejected(build):
    with pytest.raises(DomainError):
        build()


@pytest.mark.non_gui
def test_dimension_mismatch_rejected(unit_interval):
    with pytest.raises(DomainError):
        distance(unit_interval, np.array([0.5, 0.5]))


@pytest.mark.non_gui
def test_sample_uniform_stays_inside():
    ball = DomainSpec.ball([1.0, -1.0], 0.5)
    points = sample_uniform(ball, 500, spawn_stream(0, "points"))
    assert points.shape == (500, 2)
    assert np.all(contains(ball, points))


@pytest.mark.non_gui
def test_describe_keeps_parameters():
    assert DomainSpec.interval(0.0, 2.0).describe() == {"kind": "interval", "lo": 0.0, "hi": 2.0}
    assert TRIANGLE.describe()["b"] == [0.0, 0.0, 1.0]


CLOSED_DOMAINS = [
    DomainSpec.interval(0.0, 1.0),
    DomainSpec.box([0.0, -1.0], [1.0, 2.0]),
    DomainSpec.ball([0.5, 0.0], 1.0),
    DomainSpec.ellipsoid([0.0, 0.0], [2.0, 0.5]),
    TRIANGLE,
]


def point_cloud(dom, count, rng):
    """Points spread over twice the bounding box of dom."""
    lo, hi = bounding_box(dom)
    half = hi - lo
    return rng.uniform(lo - half, hi + half, size=(count, dom.dim))


@pytest.mark.non_gui
@pytest.mark.parametrize("dom", CLOSED_DOMAINS, ids=lambda d: d.kind.value)
def test_projection_is_non_expansive(dom):
    rng = spawn_stream(11, "cloud")
    x = point_cloud(dom, 300, rng)
    z = point_cloud(dom, 300, rng)
    moved = np.linalg.norm(project(dom, x) - project(dom, z), axis=-1)
    gap = np.linalg.norm(x - z, axis=-1)
    assert np.all(moved <= gap + 1e-7)


@pytest.mark.non_gui
@pytest.mark.parametrize("dom", CLOSED_DOMAINS, ids=lambda d: d.kind.value)
def test_projection_satisfies_the_variational_inequality(dom):
    rng = spawn_stream(12, "cloud")
    x = point_cloud(dom, 200, rng)
    px = project(dom, x)
    assert np.all(distance(dom, px) < 1e-7)
    members = np.concatenate([sample_uniform(dom, 100, rng), project(dom, point_cloud(dom, 100, rng))])
    # <x - Px, z - Px> <= 0 for every z in the closure
    products = np.einsum("id,ijd->ij", x - px, members[None, :, :] - px[:, None, :])
    assert np.max(products) <= 1e-7

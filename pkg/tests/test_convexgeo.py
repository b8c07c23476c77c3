import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from minflex.convexgeo import (AffinePlane, ConvexBody, box, halfspace, plane_distance,
                               slab)
from minflex.errors import DegeneratePlane, EmptyBody, NonPolyhedral, PointInsideBody

from conftest import random_rotation


def ball3():
    return ConvexBody.ball(np.zeros(3), 1.0)


def cyl3():
    return ConvexBody.cylinder(3, (0, 1))


def simplex3():
    return ConvexBody.polyhedron(np.vstack([-np.eye(3), np.ones(3)]), [0, 0, 0, 1])


def _slsqp_distance(A, b, x):
    cons = {"type": "ineq", "fun": lambda y: b - A @ y}
    res = minimize(lambda y: np.sum((y - x) ** 2), np.zeros_like(x), constraints=[cons],
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    return math.sqrt(res.fun)


# -- projection ------------------------------------------------------------

def test_project_ball(backend):
    y, d = ball3().project(np.array([2.0, 0, 0]))
    np.testing.assert_allclose(y, [1, 0, 0], atol=1e-12)
    assert d == pytest.approx(1.0, abs=1e-12)


def test_project_halfspace(backend):
    y, d = halfspace([1, 0, 0], 0.0).project(np.array([3.0, 5, -1]))
    np.testing.assert_allclose(y, [0, 5, -1], atol=1e-12)
    assert d == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("T", [0.0, 1.0, 10.0])
def test_project_cylinder_radial_oracle(T):
    # the body is infinite along x3, so (2, T, 0) is at radius sqrt(4 + T^2)
    _, d = cyl3().project(np.array([2.0, T, 0.0]))
    assert d == pytest.approx(math.sqrt(4 + T * T) - 1, abs=1e-12)


def test_project_cylinder_matches_polygonal_cross_check(backend):
    # independent route: Dykstra onto a circumscribed 64-gon prism
    m = 64
    ang = np.linspace(0, 2 * math.pi, m, endpoint=False)
    A = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=1)
    prism = ConvexBody.polyhedron(A, np.ones(m))
    gap = 1 / math.cos(math.pi / m) - 1
    for x in ([2.0, 1.0, 0.3], [0.0, -3.0, 7.0], [1.5, 1.5, -2.0]):
        d_exact = cyl3().distance(np.array(x))
        d_poly = prism.distance(np.array(x))
        assert d_exact - gap - 1e-9 <= d_poly <= d_exact + 1e-9


def test_project_polyhedron_vs_slsqp(backend, rng):
    for _ in range(10):
        A = rng.normal(size=(6, 3))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        b = rng.uniform(0.5, 1.5, 6)
        C = ConvexBody.polyhedron(A, b)
        x = rng.normal(scale=4.0, size=3)
        y, d = C.project(x)
        assert np.all(C.A @ y <= C.b + 1e-9)
        assert d == pytest.approx(_slsqp_distance(A, b, x), abs=1e-6)


def test_empty_body_detected(backend):
    C = ConvexBody.polyhedron([[1, 0, 0], [-1, 0, 0]], [-1.0, -1.0])
    assert C.is_empty
    with pytest.raises(EmptyBody):
        C.project(np.zeros(3))


def test_normals_normalized_and_merged():
    C = ConvexBody.polyhedron([[2, 0, 0], [1, 0, 0], [0, 3, 0]], [2.0, 5.0, 3.0])
    assert C.A.shape == (2, 3)
    np.testing.assert_allclose(np.linalg.norm(C.A, axis=1), 1.0, atol=1e-12)
    assert sorted(C.b.tolist()) == [1.0, 1.0]


def test_support_fn_bounds_samples(rng):
    B = ball3()
    pts = B.sample_points(rng, 200)
    for _ in range(100):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        assert np.max(pts @ u) <= B.support_fn(u) + 1e-9


# -- lineality and halfspace/slab -----------------------------------------

def test_lineality_slab():
    V = slab([1, 0, 0], -1, 1).lineality_space()
    assert V.k == 2
    np.testing.assert_allclose(np.abs(V.basis @ [1, 0, 0]), 0, atol=1e-12)


def test_lineality_quadrant():
    V = ConvexBody.polyhedron([[1, 0, 0], [0, 1, 0]], [0, 0]).lineality_space()
    assert V.k == 1
    np.testing.assert_allclose(np.abs(V.basis[0]), [0, 0, 1], atol=1e-12)


def test_lineality_simplex():
    assert simplex3().lineality_dim() == 0


def test_lineality_smooth_bodies():
    assert cyl3().lineality_dim() == 1
    assert ball3().lineality_dim() == 0


def test_custom_body_needs_hint():
    B = ConvexBody.from_support(3, lambda u: np.linalg.norm(u), lambda x: x / max(1, np.linalg.norm(x)))
    with pytest.raises(NonPolyhedral):
        B.lineality_dim()
    B2 = ConvexBody.from_support(3, lambda u: np.linalg.norm(u),
                                 lambda x: x / max(1, np.linalg.norm(x)), lineality_hint=0)
    assert B2.lineality_dim() == 0


def test_lineality_directions_stay_inside(backend, rng):
    C = ConvexBody.polyhedron([[1, 0, 0, 0], [0, 1, 0, 0], [-1, -1, 0, 0]], [1, 1, 1])
    V = C.lineality_space()
    pts = C.sample_points(rng, 20)
    for v in V.basis:
        for t in (1.0, -1.0, 1e3, -1e3):
            assert np.all(C.contains(pts + t * v, tol=1e-9))


@pytest.mark.parametrize("body,expected", [
    (slab([1, 0, 0], -1, 1), True),
    (halfspace([0, 0, 1], 0.0), True),
    (ConvexBody.cylinder(3, (0, 1)), False),
    (ConvexBody.ball(np.zeros(3), 1.0), False),
])
def test_is_halfspace_or_slab(body, expected):
    assert body.is_halfspace_or_slab() is expected


def test_halfspace_or_slab_under_rotation(rng):
    for _ in range(20):
        R = random_rotation(rng, 4)
        assert slab([1, 0, 0, 0], -1, 2).transform(R, rng.normal(size=4)).is_halfspace_or_slab()
        assert not box([-1] * 4, [1] * 4).transform(R).is_halfspace_or_slab()


# -- supporting hyperplane -------------------------------------------------

def test_supporting_hyperplane_examples(backend):
    a, b = ball3().supporting_hyperplane([2.0, 0, 0])
    np.testing.assert_allclose(a, [1, 0, 0], atol=1e-12)
    assert b == pytest.approx(1.0)
    a, b = halfspace([1, 0, 0], 0).supporting_hyperplane([1.0, 1, 1])
    np.testing.assert_allclose(a, [1, 0, 0], atol=1e-12)
    assert b == pytest.approx(0.0, abs=1e-12)
    a, b = box([-1, -1], [1, 1]).supporting_hyperplane([3.0, 0.5])
    np.testing.assert_allclose(a, [1, 0], atol=1e-8)
    assert b == pytest.approx(1.0, abs=1e-8)


def test_supporting_hyperplane_rejects_inside():
    with pytest.raises(PointInsideBody):
        ball3().supporting_hyperplane([0.1, 0, 0])


# -- planes ----------------------------------------------------------------

def test_affine_plane_validation():
    with pytest.raises(DegeneratePlane):
        AffinePlane(np.zeros(3), np.array([[1, 0, 0], [1, 1e-6, 0]]))
    with pytest.raises(DegeneratePlane):
        AffinePlane.spanned(np.zeros(3), [1, 0, 0], [2, 0, 0])


def test_plane_distance_cylinder_and_ball(backend):
    plane = AffinePlane(np.array([2.0, 0, 0]), np.array([[0, 1.0, 0], [0, 0, 1.0]]))
    d, *_ = plane_distance(cyl3(), plane)
    assert d == pytest.approx(1.0, abs=1e-8)
    d, *_ = plane_distance(ball3(), plane)
    assert d == pytest.approx(1.0, abs=1e-8)


def test_json_round_trip():
    for C in (simplex3(), ball3(), cyl3(), ConvexBody.disc_product(2)):
        C2 = ConvexBody.from_json(C.to_json())
        x = np.array([3.0, -1.0, 0.5] + [0.2] * (C.dim - 3))
        assert C2.distance(x) == pytest.approx(C.distance(x), abs=1e-9)


# -- properties ------------------------------------------------------------

_pts = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(_pts, _pts)
def test_projection_idempotent_and_nonexpansive(x, y):
    for C in (simplex3(), ball3(), cyl3(), box([-1, -2, 0], [1, 0, 3])):
        px, _ = C.project(np.array(x))
        py, _ = C.project(np.array(y))
        assert C.project(px)[1] <= 1e-9
        assert np.linalg.norm(px - py) <= np.linalg.norm(np.subtract(x, y)) + 1e-9


@settings(max_examples=40, deadline=None)
@given(_pts)
def test_supporting_hyperplane_separates(p):
    for C in (simplex3(), ball3(), cyl3()):
        p = np.array(p)
        d = C.distance(p)
        if d <= 1e-6:
            continue
        a, b = C.supporting_hyperplane(p)
        assert a @ p - b >= d - 1e-9

import math

import numpy as np
import pytest
from scipy.optimize import minimize

from minflex.convexgeo import ConvexBody
from minflex.domains import (ConvexComplement, FullSpace, Halfspace, QuadricGraph, Slab,
                             UnionChain, Wedge, WedgeGraph, domain_from_json,
                             sample_points)
from minflex.errors import DimMismatch, InvalidParams

from conftest import random_rotation


def _graph_oracle(x, g, starts):
    """Distance from ``x`` to the graph of a smooth ``g`` (coordinates 0..2 -> 3), multistart BFGS."""
    def obj(y):
        return np.sum((x[:3] - y) ** 2) + (x[3] - g(y)) ** 2
    best = min(minimize(obj, y0, method="BFGS", options={"gtol": 1e-12}).fun for y0 in starts)
    return math.sqrt(best)


def _starts(x, rng, k=6):
    return [x[:3]] + [x[:3] + rng.normal(scale=1.0 + np.abs(x[:3]).max(), size=3) for _ in range(k)]


def _wedge_graph_oracle(x, a2, a3):
    """Min over the four quadrant pieces of the complement, each projected by SLSQP."""
    z = x[1:4]
    best = math.inf
    for s2 in (1.0, -1.0):
        for s3 in (1.0, -1.0):
            cons = [{"type": "ineq", "fun": lambda y, s2=s2: s2 * y[0]},
                    {"type": "ineq", "fun": lambda y, s3=s3: s3 * y[1]},
                    {"type": "ineq", "fun": lambda y, s2=s2, s3=s3:
                     -a2 * s2 * y[0] + a3 * s3 * y[1] - y[2]}]
            res = minimize(lambda y: np.sum((y - z) ** 2), np.zeros(3), method="SLSQP",
                           constraints=cons, options={"ftol": 1e-15, "maxiter": 500})
            best = min(best, res.fun)
    return math.sqrt(max(best, 0.0))


def all_domains():
    return [
        FullSpace(3),
        ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)),
        ConvexComplement(ConvexBody.cylinder(3, (0, 1))),
        Wedge(1.5 * math.pi),
        Wedge(0.5 * math.pi, rotation=random_rotation(np.random.default_rng(3), 3),
              translation=np.array([0.5, -1.0, 2.0])),
        QuadricGraph(1.0, 1.0, 1.0),
        QuadricGraph(0.0, 2.0, -1.0),
        WedgeGraph(1.0, 0.5),
        WedgeGraph(2.0, -1.0, dim=5),
        Halfspace(np.array([0, 0, 1.0]), 0.0),
        Slab(np.array([1.0, 1.0, 0.0]), -1.0, 1.0),
        UnionChain((ConvexComplement(ConvexBody.ball(np.zeros(3), 2.0)),
                    ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)))),
    ]


# -- examples --------------------------------------------------------------

def test_contains_examples():
    assert Wedge(1.5 * math.pi).contains([0.0, 1.0, 0.0])
    assert QuadricGraph(1, 1, 1).contains([0.0, 0.0, 0.0, 1.0])
    assert not ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)).contains([0.5, 0, 0])


def test_contains_is_strict():
    assert not Halfspace(np.array([0, 0, 1.0]), 0.0).contains([1.0, 2.0, 0.0])
    assert not ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)).contains([1.0, 0, 0])
    assert not Wedge(1.5 * math.pi).contains([0.0, 0.0, 0.0])


def test_clearance_examples():
    assert ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)).clearance([2.0, 0, 0]) == pytest.approx(1.0)
    assert Halfspace(np.array([0, 0, 1.0]), 0.0).clearance([0, 0, 5.0]) == pytest.approx(5.0)
    assert Halfspace(np.array([0, 0, 1.0]), 0.0).clearance([0, 0, -5.0]) == 0.0


def test_quadric_clearance_grows(rng):
    D = QuadricGraph(1.0, 1.0, 0.0)
    vals = [D.clearance([0.0, B, 0.0, 0.0]) for B in (1.0, 10.0, 100.0)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] / vals[1] > 5
    for B, v in zip((1.0, 10.0, 100.0), vals):
        x = np.array([0.0, B, 0.0, 0.0])
        assert v == pytest.approx(_graph_oracle(x, lambda y: -y[0] ** 2 - y[1] ** 2, _starts(x, rng)),
                                  abs=1e-6)


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        Wedge(math.pi).contains([1.0, 2.0])


def test_invalid_params():
    with pytest.raises(InvalidParams):
        QuadricGraph(-1.0, 1.0, 0.0)
    with pytest.raises(InvalidParams):
        WedgeGraph(0.0, 1.0)
    with pytest.raises(InvalidParams):
        Wedge(2 * math.pi)


# -- exact graph clearance against the multistart oracle -------------------

@pytest.mark.parametrize("a", [(1.0, 1.0, 1.0), (0.0, 2.0, -1.0), (0.5, 1.0, 3.0)])
def test_quadric_clearance_vs_oracle(a, rng):
    D = QuadricGraph(*a)
    c = D.coeffs
    pts = sample_points(D, rng, 15, box=2.0)
    for x in pts:
        oracle = _graph_oracle(x, lambda y: y ** 2 @ c, _starts(x, rng))
        assert D.clearance(x) == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("a2,a3", [(1.0, 0.5), (2.0, -1.0), (0.5, 2.0)])
def test_wedge_graph_clearance_vs_oracle(a2, a3, rng):
    D = WedgeGraph(a2, a3)
    for x in sample_points(D, rng, 15, box=2.0):
        assert D.clearance(x) == pytest.approx(_wedge_graph_oracle(x, a2, a3), abs=1e-6)


def test_wedge_clearance_planar_oracle(rng):
    phi = 1.5 * math.pi
    D = Wedge(phi)
    t = np.linspace(0, 50, 200001)
    rays = [np.stack([t * math.cos(s * phi / 2), t * math.sin(s * phi / 2)], 1) for s in (1, -1)]
    for x in sample_points(D, rng, 30, box=3.0):
        oracle = min(np.min(np.linalg.norm(r - x[1:], axis=1)) for r in rays)
        assert D.clearance(x) == pytest.approx(oracle, abs=1e-3)


# -- invariants ------------------------------------------------------------

@pytest.mark.parametrize("domain", all_domains(), ids=lambda d: d.variant)
def test_clearance_positive_iff_member(domain, rng):
    pts = rng.uniform(-4, 4, size=(1000, domain.dim))
    inside = domain.contains(pts)
    clear = domain.clearance(pts)
    assert np.all((clear > 0) == inside)


@pytest.mark.parametrize("domain", all_domains(), ids=lambda d: d.variant)
def test_clearance_ball_inside(domain, rng):
    pts = sample_points(domain, rng, 20, box=4.0)
    for x in pts:
        c = domain.clearance(x)
        if not math.isfinite(c):
            continue
        u = rng.normal(size=(100, domain.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        assert np.all(domain.contains(x + c * (1 - 1e-6) * u))


@pytest.mark.parametrize("domain", all_domains(), ids=lambda d: d.variant)
def test_membership_open(domain, rng):
    pts = sample_points(domain, rng, 20, box=4.0)
    for x in pts:
        eps = min(domain.clearance(x), 1.0)
        u = rng.normal(size=(10, domain.dim))
        u *= (eps / 2) / np.linalg.norm(u, axis=1, keepdims=True)
        assert np.all(domain.contains(x + u))


@pytest.mark.parametrize("phi", [1.1 * math.pi, 1.5 * math.pi, 1.9 * math.pi])
def test_wedge_complement_is_convex_body(phi, rng):
    W = Wedge(phi, rotation=random_rotation(rng, 3), translation=rng.normal(size=3))
    C = W.complement_body()
    pts = rng.uniform(-4, 4, size=(1000, 3))
    assert np.all(W.contains(pts) == ~C.contains(pts, tol=0.0))


def test_union_chain_increasing(rng):
    U = UnionChain((ConvexComplement(ConvexBody.ball(np.zeros(3), 2.0)),
                    ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0))))
    assert U.check_increasing(rng)
    bad = UnionChain(tuple(reversed(U.members)))
    assert not bad.check_increasing(rng)


@pytest.mark.parametrize("domain", all_domains(), ids=lambda d: d.variant)
def test_json_round_trip(domain, rng):
    D2 = domain_from_json(domain.to_json())
    pts = rng.uniform(-3, 3, size=(50, domain.dim))
    np.testing.assert_array_equal(D2.contains(pts), domain.contains(pts))
    np.testing.assert_allclose(D2.clearance(pts), domain.clearance(pts), atol=1e-9)

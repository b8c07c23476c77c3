"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import json
import math
import time
from contextlib import contextmanager

import numpy as np

from minflex.cli import COMMANDS, RunConfig, build_parser, dumps, run
from minflex.convexgeo import ConvexBody, box, halfspace, slab
from minflex.domains import (ConvexComplement, FullSpace, QuadricGraph, UnionChain, Wedge,
                             WedgeGraph, sample_points)
from minflex.flexcheck import (Verdict, classify_complex_complement,
                               classify_convex_complement, classify_domain, complex_to_real,
                               verify_growth_condition, verify_tube_condition)
from minflex.psh import ScalarField, certify_p_convex, estimate_contact_order, gate_ok, is_p_psh
from minflex.weierstrass import (SURFACES, annulus, conformality_residuals, derivative_h,
                                 extend_arc, integrate, period_integrals, sample_from_h,
                                 surface_catalogue)

from conftest import random_rotation

RESULTS = []


@contextmanager
def criterion(number, title, limit=None):
    """Record and print one PASS/FAIL line; ``limit`` is a wall-clock budget in seconds."""
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        assert limit is None or elapsed <= limit, f"took {elapsed:.2f}s > {limit}s"
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        line = f"criterion {number} {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s) {title}"
        RESULTS.append(line)
        print(line)


def _assert_witness_sound(res, domain):
    w = res.witness
    assert w is not None and w.delta > 0
    half = w.delta / 2 if math.isfinite(w.delta) else 1.0
    assert verify_tube_condition(domain, w.plane, half)
    assert verify_growth_condition(domain, w.plane, [1, 10, 100])


def _random_polytope(rng, n, k):
    m = n - k
    Q = random_rotation(rng, n)
    normals = rng.normal(size=(m + 3, m))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    A = np.zeros((m + 3, n))
    A[:, :m] = normals
    return ConvexBody.polyhedron(A @ Q.T, rng.uniform(0.5, 2.0, m + 3))


def _random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_criterion_1_classifier_truth_table(rng):
    with criterion(1, "classifier truth table", limit=1.0):
        nf = Verdict.NOT_FLEXIBLE
        assert classify_convex_complement(halfspace([0, 0, 1], 0.0)).verdict is nf
        for n in (3, 4, 5):
            R = random_rotation(rng, n)
            body = slab(np.eye(n)[0], -1, 1).transform(R, rng.normal(size=n))
            assert classify_convex_complement(body).verdict is nf
        for n in (3, 4):
            res = classify_convex_complement(ConvexBody.ball(np.zeros(n), 1.0))
            assert res.verdict is Verdict.FLEXIBLE
            _assert_witness_sound(res, ConvexComplement(ConvexBody.ball(np.zeros(n), 1.0)))
            plane = res.witness.plane
            foot = plane.base - plane.dirs.T @ (plane.dirs @ plane.base)
            assert abs(res.witness.delta - (np.linalg.norm(foot) - 1.0)) <= 0.01 * (np.linalg.norm(foot) - 1.0)
        cyl = classify_convex_complement(ConvexBody.cylinder(3, (0, 1)))
        assert cyl.verdict is Verdict.FLEXIBLE
        got = [classify_domain(Wedge(phi)).verdict for phi in (math.pi / 2, math.pi, 1.5 * math.pi)]
        assert got == [nf, nf, Verdict.FLEXIBLE]


def test_criterion_2_complex_classifier(rng):
    with criterion(2, "complex classifier", limit=1.0):
        A = np.array([[1, 0, 0, 0], [-1, 0, 0, 0], [0, 1, 0, 0], [0, -1, 0, 0]], dtype=float)
        hyperplane = ConvexBody.polyhedron(A, np.zeros(4))
        B = np.array([[0, 1, 0, 0], [0, -1, 0, 0], [0, 0, 0, 1], [0, 0, 0, -1]], dtype=float)
        totally_real = ConvexBody.polyhedron(B, np.zeros(4))
        cases = {"hyperplane": (hyperplane, Verdict.FLEXIBLE),
                 "disc": (ConvexBody.disc_product(2), Verdict.NOT_FLEXIBLE),
                 "totally_real": (totally_real, Verdict.FLEXIBLE)}
        for body, expected in cases.values():
            assert classify_complex_complement(body).verdict is expected
        for _ in range(10):
            R, v = complex_to_real(_random_unitary(rng, 2), rng.normal(size=2) + 1j * rng.normal(size=2))
            for body, expected in cases.values():
                assert classify_complex_complement(body.transform(R, v)).verdict is expected


def test_criterion_3_witness_soundness(rng):
    with criterion(3, "witness soundness", limit=10.0):
        catalogue = [
            FullSpace(3),
            ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)),
            ConvexComplement(ConvexBody.ball(np.zeros(4), 1.0)),
            ConvexComplement(ConvexBody.cylinder(3, (0, 1))),
            ConvexComplement(box([-1, -1, -1], [1, 1, 1])),
            Wedge(1.5 * math.pi),
            Wedge(1.2 * math.pi, rotation=random_rotation(rng, 3), translation=rng.normal(size=3)),
            QuadricGraph(1.0, 1.0, 1.0), QuadricGraph(1.0, 1.0, 0.0), QuadricGraph(0.0, 2.0, -1.0),
            WedgeGraph(1.0, 0.5), WedgeGraph(2.0, -1.0, dim=5),
            UnionChain((ConvexComplement(ConvexBody.ball(np.zeros(3), 2.0)),
                        ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0)))),
        ]
        for _ in range(20):
            n = int(rng.integers(3, 6))
            catalogue.append(ConvexComplement(_random_polytope(rng, n, int(rng.integers(0, n - 1)))))
        failures = 0
        for domain in catalogue:
            res = classify_domain(domain)
            if res.verdict is not Verdict.FLEXIBLE:
                failures += 1
                continue
            try:
                _assert_witness_sound(res, domain)
            except AssertionError:
                failures += 1
        # complex-line witnesses of the complex classifier
        B = np.array([[0, 1, 0, 0], [0, -1, 0, 0], [0, 0, 0, 1], [0, 0, 0, -1]], dtype=float)
        body = ConvexBody.polyhedron(B, np.zeros(4))
        try:
            _assert_witness_sound(classify_complex_complement(body), ConvexComplement(body))
        except AssertionError:
            failures += 1
        assert failures == 0


def test_criterion_4_weierstrass_residuals():
    with criterion(4, "Weierstrass residuals", limit=5.0):
        for name in SURFACES:
            S = surface_catalogue(name, grid=64)
            rep = conformality_residuals(S)
            assert rep.max_null <= 1e-6 and rep.max_harmonic <= 1e-6, name
        P = period_integrals(surface_catalogue("catenoid", grid=64))[0]
        assert np.linalg.norm(P) <= 1e-8
        broken = sample_from_h(annulus(0.5, 2.0, grid=64),
                               lambda W: np.stack([np.exp(-W), 1j * np.exp(-W), 0 * W], -1))
        loop = broken.domain.loops[0]
        # the counterclockwise neck loop gives -2 pi; its reverse gives +2 pi
        P_cw = period_integrals(broken, loops=[loop[::-1]])[0]
        assert abs(P_cw[1] - 2 * math.pi) <= 1e-6
        assert abs(period_integrals(broken)[0][1] + 2 * math.pi) <= 1e-6


def test_criterion_5_round_trip_integration():
    with criterion(5, "round-trip integration"):
        for name in SURFACES:
            S = surface_catalogue(name, grid=64)
            bare = sample_from_h(S.domain, S.h_fn, S.theta, None, name)
            out = integrate(bare, f0=S.f[bare.base])
            h, _, _ = derivative_h(out)
            inner = S.domain.interior()
            assert np.max(np.abs(h[inner] - S.h[inner])) <= 1e-5, name
            assert np.max(np.abs(out.f[S.domain.mask] - S.f[S.domain.mask])) <= 1e-5, name


def test_criterion_6_psh_suite():
    with criterion(6, "p-psh suite", limit=2.0):
        tau = ScalarField.from_expression("x1**2 + x2**2 - 0.5*x3**2", 3)
        r1, r2 = is_p_psh(tau, 1), is_p_psh(tau, 2)
        assert not r1.is_psh
        assert r2.strongly and abs(r2.min_partial_sum - 1.0) <= 1e-9
        assert not gate_ok(3, 3) and gate_ok(2, 5)
        ball = ScalarField.from_expression("pos(norm() - 1)**2", 3, [[-2, 2]] * 3)
        assert certify_p_convex(ball, 3, grid=8).gate_violated
        assert certify_p_convex(ScalarField.from_expression("pos(norm() - 1)**2", 5, [[-2, 2]] * 5),
                                2, grid=8).gate_ok


def _flat(z):
    z = np.asarray(z)
    return np.stack([z.real, z.imag, np.zeros(z.shape)], -1)


def test_criterion_7_contact_order():
    with criterion(7, "contact order"):
        for k in range(1, 7):
            co = estimate_contact_order(_flat, lambda P, k=k: (P[..., 0] ** 2 + P[..., 1] ** 2) ** (k / 2))
            assert co.k == k and co.residual < 1e-6
        tau = ScalarField.from_expression("x1**2 + x2**2 + (x3 + 1)**2 - 1", 3)
        assert estimate_contact_order(_flat, tau).k == 2


def _wedge_oracle(P, phi):
    # polar angle of (x2, x3) strictly inside (-phi/2, phi/2)
    return np.abs(np.arctan2(P[:, 2], P[:, 1])) < phi / 2


def test_criterion_8_arc_extension(rng):
    with criterion(8, "arc extension"):
        ball = ConvexComplement(ConvexBody.ball(np.zeros(3), 1.0))
        wedge = Wedge(1.5 * math.pi)
        for domain, oracle in ((ball, lambda P: np.linalg.norm(P, axis=1) > 1.0),
                               (wedge, lambda P: _wedge_oracle(P, 1.5 * math.pi))):
            pts = sample_points(domain, rng, 100, box=3.0)
            for p, q in zip(pts[:50], pts[50:]):
                arc = extend_arc(p, q, domain)
                assert len(arc.t) >= 1000
                assert np.all(oracle(arc.f)) and arc.inside
                assert arc.endpoint_error <= 1e-12
                assert arc.fd_error <= 1e-8


def _cli_suite():
    wedge = json.dumps({"variant": "wedge", "angle": 1.5 * math.pi})
    ball = json.dumps({"variant": "convex_complement",
                       "body": {"dim": 3, "support": "ball", "params": {"center": [0, 0, 0], "radius": 1}}})
    tau = json.dumps({"expr": "pos(norm() - 1)**2", "dim": 3, "box": [[-2, 2]] * 3})
    suite = [
        ["classify", "--domain", wedge],
        ["classify", "--domain", json.dumps({"variant": "halfspace", "normal": [0, 0, 1], "offset": 0})],
        ["witness", "--domain", ball],
        ["check-psh", "--tau", tau, "--certify"],
        ["verify-surface", "--surface", "catenoid", "--domain", ball, "--offset", "3,0,0"],
        ["catalogue", "--grid", "32"],
        ["extend-arc", "--domain", ball, "--from", "2,0,0", "--to=-2,0,0"],
    ]
    assert {argv[0] for argv in suite} == set(COMMANDS)
    return [dumps(run(RunConfig(**vars(build_parser().parse_args(argv))))[1]) for argv in suite]


def test_criterion_9_determinism():
    with criterion(9, "determinism"):
        assert _cli_suite() == _cli_suite()

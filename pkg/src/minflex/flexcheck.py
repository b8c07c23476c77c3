"""Flexibility classification and witness planes.

A positive verdict is backed by an affine 2-plane ``Lambda`` whose
Euclidean ``delta``-tube lies in the domain and along which the clearance
grows without bound (the tube and growth conditions).  Negative verdicts
come only from three rules: complements of halfspaces and slabs, domains
inside a halfspace (a harmonic map from C into a halfspace has constant
normal component), and, for holomorphic curves, complements of products
``C' x C^(n-1)`` with ``C'`` not a point (Picard).  Anything else is
``Unknown``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convexgeo import (AffinePlane, ConvexBody, distance_to_set, null_space,
                        plane_distance)
from .domains import (ConvexComplement, FullSpace, Halfspace, QuadricGraph,
                      Slab, UnionChain, Wedge, WedgeGraph)
from .errors import (DegeneratePlane, DimMismatch, InvalidParams,
                     NonPolyhedral, OddDimension, PointInsideBody)

DEFAULT_RADII = (1.0, 10.0, 100.0)
GROWTH_STEPS = 60
GROWTH_BLOCK = 8
TUBE_GRID = 101
TUBE_EXTENT = 100.0
TAIL_STEPS = 20
AVOID_TOL = 1e-9
PI_TOL = 1e-12


class Verdict(str, enum.Enum):
    FLEXIBLE = "Flexible"
    NOT_FLEXIBLE = "NotFlexible"
    UNKNOWN = "Unknown"


class Rule(str, enum.Enum):
    HALFSPACE_OR_SLAB = "HalfspaceOrSlab"
    LIOUVILLE = "LiouvilleHalfspaceContainment"
    HYPERBOLIC_FACTOR = "HyperbolicFactor"
    TUBE_PLUS_GROWTH = "TubePlusGrowth"
    CONVEX_COMPLEMENT = "ConvexComplementRule"
    UNION_CHAIN = "UnionChainRule"
    COMPLEX_HYPERPLANE = "ComplexHyperplane"
    COMPLEX_PRODUCT = "ComplexProductRule"


NEGATIVE_RULES = {Rule.HALFSPACE_OR_SLAB, Rule.LIOUVILLE, Rule.HYPERBOLIC_FACTOR}


@dataclass
class Witness:
    """Certified plane with tube radius ``delta`` and a growth table.

    For holomorphic curves the plane is a complex line and
    ``transverse_normal`` is the real normal ``a1`` whose complex
    hyperplane carries the growth discs.
    """

    plane: AffinePlane
    delta: float
    growth: list = field(default_factory=list)
    complex_line: bool = False
    transverse_normal: Optional[np.ndarray] = None

    @property
    def growth_samples(self):
        return [g["clearance"] for g in self.growth]

    def to_json(self):
        out = {"plane": self.plane.to_json(), "delta": _num(self.delta),
               "growth": [{"radius": g["radius"], "point": list(map(float, g["point"])),
                           "clearance": _num(g["clearance"])} for g in self.growth],
               "complex_line": self.complex_line}
        if self.transverse_normal is not None:
            out["transverse_normal"] = self.transverse_normal.tolist()
        return out


def _num(v):
    return None if not math.isfinite(v) else float(v)


@dataclass
class ClassificationResult:
    verdict: Verdict
    reason: Optional[Rule] = None
    witness: Optional[Witness] = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        return {"verdict": self.verdict.value,
                "reason": self.reason.value if self.reason else None,
                "witness": self.witness.to_json() if self.witness else None,
                "diagnostics": self.diagnostics}


@dataclass
class ComplexLinealityReport:
    real_lineality_dim: int
    complex_lineality_dim: int
    m: int
    factor_note: str
    real_basis: np.ndarray = None
    complex_basis: np.ndarray = None


# -- tube and growth conditions --------------------------------------------

def _check_plane(domain, plane):
    if plane.dim != domain.dim:
        raise DimMismatch("plane and domain dimensions differ")
    if np.max(np.abs(plane.dirs @ plane.dirs.T - np.eye(2))) > 1e-12:
        raise DegeneratePlane("plane directions are not orthonormal")


def _plane_samples(plane, extent=TUBE_EXTENT, grid=TUBE_GRID, tail=TAIL_STEPS):
    s = np.linspace(-extent, extent, grid)
    S, T = np.meshgrid(s, s, indexing="ij")
    pts = plane.base + S.reshape(-1, 1) * plane.dirs[0] + T.reshape(-1, 1) * plane.dirs[1]
    rays = []
    steps = extent * 2.0 ** np.arange(tail + 1)
    for d in (plane.dirs[0], -plane.dirs[0], plane.dirs[1], -plane.dirs[1]):
        rays.append(plane.base + steps[:, None] * d)
    return pts, rays


def tube_radius(domain, plane):
    """Certified (exact or sampled) lower bound for the tube radius around ``plane``.

    Returns ``(radius, info)``; for convex complements the radius is the
    plane-to-body distance, otherwise the minimum clearance over the
    sample grid and the tail rays, set to 0 if the tails decrease.
    """
    if isinstance(domain, FullSpace):
        return math.inf, {"method": "full_space"}
    if isinstance(domain, ConvexComplement):
        if domain.body.is_empty:
            return math.inf, {"method": "full_space"}
        dist, x, y, hit = plane_distance(domain.body, plane)
        info = {"method": "alternating_projection", "hit_box": hit,
                "closest_plane_point": x.tolist()}
        return (0.0 if hit else dist), info
    pts, rays = _plane_samples(plane)
    grid_min = float(np.min(domain.clearance(pts)))
    monotone = True
    tail_min = math.inf
    for ray in rays:
        c = domain.clearance(ray)
        tail_min = min(tail_min, float(np.min(c)))
        # round-off in the clearance grows with the size of the sample point
        slack = 1e-9 + 1e-13 * np.linalg.norm(ray[1:], axis=1)
        if np.any(np.diff(c) < -slack):
            monotone = False
    radius = min(grid_min, tail_min) if monotone else 0.0
    return radius, {"method": "sampled", "samples": len(pts), "tail_monotone": monotone,
                    "grid_min": grid_min, "tail_min": tail_min}


def verify_tube_condition(domain, plane, delta):
    """True when the ``delta``-tube around ``plane`` is certified inside ``domain``."""
    _check_plane(domain, plane)
    if not delta > 0:
        raise InvalidParams("tube radius must be positive")
    radius, _ = tube_radius(domain, plane)
    return radius >= delta


def _ray_directions(plane):
    d1, d2 = plane.dirs
    r = 1 / math.sqrt(2)
    return [d1, -d1, d2, -d2, r * (d1 + d2), -r * (d1 + d2), r * (d1 - d2), -r * (d1 - d2)]


def growth_table(domain, plane, radii=DEFAULT_RADII, max_steps=GROWTH_STEPS):
    """Points ``q`` on ``plane`` with clearance at least each radius.

    Rays from the base point are searched with doubling steps.  Each
    target is also required to exceed the previous clearance, so the
    recorded clearances are strictly increasing.  Returns ``None`` when
    some radius is not reached.
    """
    _check_plane(domain, plane)
    steps = 2.0 ** np.arange(max_steps)
    rays = {}

    def first_hit(k, d, target):
        # clearances along a ray, evaluated in batches of GROWTH_BLOCK steps
        pts, cs = rays.get(k, (np.empty((0, len(d))), np.empty(0)))
        while True:
            ok = np.flatnonzero(cs >= target)
            if ok.size:
                return pts[ok[0]], float(cs[ok[0]])
            if len(cs) >= max_steps:
                return None
            new = plane.base + steps[len(cs):len(cs) + GROWTH_BLOCK, None] * d
            with np.errstate(all="ignore"):
                c = np.asarray(domain.clearance(new), dtype=float).reshape(-1)
            pts, cs = np.vstack([pts, new]), np.concatenate([cs, c])
            rays[k] = (pts, cs)

    table = []
    prev = -math.inf
    for r in sorted(radii):
        target = max(float(r), prev * (1 + 1e-6) + 1e-12)
        hit = None
        for k, d in enumerate(_ray_directions(plane)):
            hit = first_hit(k, d, target)
            if hit:
                break
        if hit is None:
            return None
        table.append({"radius": float(r), "point": hit[0], "clearance": hit[1]})
        prev = hit[1]
    return table


def verify_growth_condition(domain, plane, radii=DEFAULT_RADII):
    return growth_table(domain, plane, radii) is not None


def _certify(domain, plane, radii, delta=None):
    """Tube radius plus growth table, or ``None`` if either condition fails."""
    radius, info = tube_radius(domain, plane)
    if delta is not None:
        radius = min(radius, delta)
    if not radius > 0:
        return None, info
    table = growth_table(domain, plane, radii)
    if table is None:
        return None, {**info, "growth": "failed"}
    w = Witness(plane, radius, table)
    ok = verify_tube_condition(domain, plane, radius / 2 if math.isfinite(radius) else 1.0)
    return (w if ok else None), info


# -- convex complements ----------------------------------------------------

def _exterior_point(body):
    """Deterministic point outside a nonempty proper body."""
    if body.has_halfspaces and not body.support:
        y0, _ = body.project(np.zeros(body.dim))
        a, b = body.A[0], body.b[0]
        return y0 + ((b - a @ y0) + 1.0) * a
    if body.support in ("ball", "cylinder", "disc-product"):
        axis = body.rotation[:, body.axes[0]]
        p = body.center + (body.radius + 1.0) * axis
        if body.has_halfspaces and body.distance(p) <= AVOID_TOL:
            p = body.center + (body.radius + 1.0 + max(0.0, float(np.max(body.b - body.A @ body.center)))) * axis
        if body.distance(p) > AVOID_TOL:
            return p
    y0, _ = body.project(np.zeros(body.dim))
    for i in range(body.dim):
        for sgn in (1.0, -1.0):
            t = 1.0
            for _ in range(40):
                p = y0 + sgn * t * np.eye(body.dim)[i]
                if body.distance(p) > AVOID_TOL:
                    return p
                t *= 2.0
    raise InvalidParams("could not find a point outside the body (is it all of R^n?)")


def _hyperplane_avoids(body, normal, point):
    """Distance between ``body`` and the hyperplane ``{normal . x = normal . point}``."""
    off = normal @ point

    def proj(y):
        return y - (normal @ y - off) * normal

    dist, _, _ = distance_to_set(body, proj, point, max_iter=2000)
    return dist


def _max_tilt(body, a, u, point, steps=30):
    """Largest verified tilt angle in ``[0, pi/4]`` of normal ``a`` towards ``u``."""
    def ok(alpha):
        n = math.cos(alpha) * a + math.sin(alpha) * u
        return _hyperplane_avoids(body, n, point) > AVOID_TOL

    hi = math.pi / 4
    if ok(hi):
        return hi
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _real_witness_candidates(body, p, V, a):
    """Planes through ``p`` inside the hyperplane through ``p`` normal to ``a``."""
    n = body.dim
    comp = null_space(np.vstack([V.reshape(-1, n), a]), n)
    if comp.shape[0] >= 2:
        yield AffinePlane.spanned(p, comp[0], comp[1])
    elif comp.shape[0] == 1 and V.shape[0] >= 1:
        yield AffinePlane.spanned(p, comp[0], V[0])
    else:
        fallback = null_space(a[None, :], n)
        yield AffinePlane.spanned(p, fallback[0], fallback[1])


def classify_convex_complement(body: ConvexBody, point=None, radii=DEFAULT_RADII):
    """Classify ``R^n minus body`` (flexible iff the body is not a halfspace or slab)."""
    n = body.dim
    if n < 3:
        raise InvalidParams("dimension must be at least 3")
    domain = ConvexComplement(body)
    if body.is_empty:
        plane = AffinePlane(np.zeros(n), np.eye(n)[:2])
        table = growth_table(FullSpace(n), plane, radii)
        return ClassificationResult(Verdict.FLEXIBLE, Rule.CONVEX_COMPLEMENT,
                                    Witness(plane, math.inf, table),
                                    {"note": "empty body: the domain is all of R^n"})
    try:
        k = body.lineality_dim()
    except NonPolyhedral as exc:
        return ClassificationResult(Verdict.UNKNOWN, None, None, {"error": str(exc)})
    diag = {"lineality_dim": k, "m": n - k}
    if k == n:
        raise InvalidParams("body is all of R^n")
    if k == n - 1:
        return ClassificationResult(Verdict.NOT_FLEXIBLE, Rule.HALFSPACE_OR_SLAB, None,
                                    {**diag, "note": "body is a halfspace or a slab"})
    V = body.lineality_space().basis if body.support != "custom" else np.zeros((0, n))
    p = _exterior_point(body) if point is None else np.asarray(point, dtype=float)
    y, dist = body.project(p)
    if dist <= AVOID_TOL:
        raise PointInsideBody("witness point must lie outside the body")
    a = (p - y) / dist
    diag.update({"point": p.tolist(), "support_normal": a.tolist(), "point_distance": dist})

    attempts = []
    for plane in _real_witness_candidates(body, p, V, a):
        w, info = _certify(domain, plane, radii)
        attempts.append(info)
        if w is not None:
            return ClassificationResult(Verdict.FLEXIBLE, Rule.CONVEX_COMPLEMENT, w,
                                        {**diag, "tilt": 0.0, "tube": info})
    # tilt the supporting hyperplane away from the body and retry
    tilt_dirs = null_space(np.vstack([V.reshape(-1, n), a]), n)
    for u in list(tilt_dirs) + [-u for u in tilt_dirs]:
        alpha = _max_tilt(body, a, u, p) / 2
        if alpha <= 0:
            continue
        a2 = math.cos(alpha) * a + math.sin(alpha) * u
        for plane in _real_witness_candidates(body, p, V, a2):
            w, info = _certify(domain, plane, radii)
            attempts.append(info)
            if w is not None:
                return ClassificationResult(Verdict.FLEXIBLE, Rule.CONVEX_COMPLEMENT, w,
                                            {**diag, "tilt": alpha, "tube": info})
    return ClassificationResult(Verdict.UNKNOWN, None, None,
                                {**diag, "note": "no witness plane certified", "attempts": attempts})


# -- catalogued domains -----------------------------------------------------

def _wedge_witness(domain: Wedge, radii):
    base = domain.translation + domain.rotation @ np.eye(domain.dim)[1]
    plane = AffinePlane.spanned(base, domain.edge_direction(), domain.side_direction(1.0))
    analytic = math.sin(domain.angle / 2)
    w, info = _certify(domain, plane, radii)
    return w, {**info, "analytic_delta": analytic}


def _graph_witness(domain, radii):
    n = domain.dim
    base = np.zeros(n)
    base[3] = 1.0
    if isinstance(domain, QuadricGraph):
        d2 = np.eye(n)[1]
    else:
        d2 = (np.eye(n)[1] - domain.a2 * np.eye(n)[3]) / math.hypot(1.0, domain.a2)
    plane = AffinePlane.spanned(base, np.eye(n)[0], d2)
    return _certify(domain, plane, radii)


def classify_domain(domain, radii=DEFAULT_RADII):
    """Dispatch on the domain variant."""
    if domain.dim < 3:
        raise InvalidParams("dimension must be at least 3")
    if isinstance(domain, FullSpace):
        return classify_convex_complement(ConvexBody.empty(domain.dim), radii=radii)
    if isinstance(domain, ConvexComplement):
        return classify_convex_complement(domain.body, radii=radii)
    if isinstance(domain, Wedge):
        phi = domain.angle
        diag = {"angle": phi}
        if abs(phi - math.pi) <= PI_TOL:
            return ClassificationResult(Verdict.NOT_FLEXIBLE, Rule.HALFSPACE_OR_SLAB, None,
                                        {**diag, "note": "wedge of angle pi is a halfspace"})
        if phi < math.pi:
            return ClassificationResult(Verdict.NOT_FLEXIBLE, Rule.LIOUVILLE, None,
                                        {**diag, "note": "wedge lies in a halfspace"})
        w, info = _wedge_witness(domain, radii)
        if w is None:
            return ClassificationResult(Verdict.UNKNOWN, None, None, {**diag, "tube": info})
        return ClassificationResult(Verdict.FLEXIBLE, Rule.TUBE_PLUS_GROWTH, w, {**diag, "tube": info})
    if isinstance(domain, (QuadricGraph, WedgeGraph)):
        if isinstance(domain, QuadricGraph) and (domain.a1 < 0 or domain.a2 <= 0):
            raise InvalidParams("quadric graph needs a1 >= 0 and a2 > 0")
        if isinstance(domain, WedgeGraph) and domain.a2 <= 0:
            raise InvalidParams("wedge graph needs a2 > 0")
        w, info = _graph_witness(domain, radii)
        if w is None:
            return ClassificationResult(Verdict.UNKNOWN, None, None, {"tube": info})
        return ClassificationResult(Verdict.FLEXIBLE, Rule.TUBE_PLUS_GROWTH, w, {"tube": info})
    if isinstance(domain, (Halfspace, Slab)):
        return ClassificationResult(Verdict.NOT_FLEXIBLE, Rule.LIOUVILLE, None,
                                    {"note": f"{domain.variant} lies in a halfspace"})
    if isinstance(domain, UnionChain):
        results = [classify_domain(m, radii) for m in domain.members]
        verdicts = [r.verdict.value for r in results]
        if all(r.verdict is Verdict.FLEXIBLE for r in results):
            w = results[-1].witness
            if w is not None:
                w, info = _certify(domain, w.plane, radii, delta=w.delta)
            if w is not None:
                return ClassificationResult(Verdict.FLEXIBLE, Rule.UNION_CHAIN, w,
                                            {"member_verdicts": verdicts})
        return ClassificationResult(Verdict.UNKNOWN, None, None, {"member_verdicts": verdicts})
    return ClassificationResult(Verdict.UNKNOWN, None, None, {"note": "uncatalogued domain"})


# -- holomorphic curves in C^n ---------------------------------------------

def complex_structure(dim):
    """Multiplication by i on R^(2n) with coordinates (Re z1, Im z1, Re z2, ...)."""
    if dim % 2:
        raise OddDimension("complex structure needs an even real dimension")
    J = np.zeros((dim, dim))
    for j in range(0, dim, 2):
        J[j + 1, j] = 1.0
        J[j, j + 1] = -1.0
    return J


def complex_lineality(body: ConvexBody):
    """Real lineality ``V`` and its largest complex subspace ``V cap J V``."""
    n2 = body.dim
    J = complex_structure(n2)
    if body.support == "custom":
        raise NonPolyhedral("complex lineality needs lineality directions")
    V = body.lineality_space().basis
    kr = V.shape[0]
    if kr == 0:
        VC = np.zeros((0, n2))
    else:
        PV = V.T @ V
        JV = V @ J.T
        PJV = JV.T @ JV
        I = np.eye(n2)
        VC = null_space(np.vstack([I - PV, I - PJV]), n2)
    kc = VC.shape[0] // 2
    n = n2 // 2
    if kc == 0:
        note = "no complex line in the body"
    else:
        note = f"body is C-affinely a product C' x C^{kc} with C' in C^{n - kc}"
    return ComplexLinealityReport(kr, kc, n - kc, note, V, VC)


def _factor_is_point(body, VC, scale=1e3):
    """Whether the projection of the body onto the complement of ``VC`` is a point."""
    W = null_space(VC, body.dim)
    y0, _ = body.project(np.zeros(body.dim))
    feet = []
    for w in W:
        for sgn in (1.0, -1.0):
            y, _ = body.project(y0 + sgn * scale * w)
            feet.append(W @ y)
    feet = np.array(feet)
    return bool(np.max(np.abs(feet - feet[0])) <= 1e-6), W


def _disc_distance(body, center, T, r):
    """Distance from ``body`` to the disc ``center + {w in span(T), |w| <= r}``."""
    def proj(y):
        w = T.T @ (T @ (y - center))
        nw = np.linalg.norm(w)
        if nw > r:
            w *= r / nw
        return center + w

    dist, _, _ = distance_to_set(body, proj, center, max_iter=2000)
    return dist


def _complex_growth(body, line: AffinePlane, T, radii, max_steps=GROWTH_STEPS):
    table = []
    prev = -math.inf
    for r in sorted(radii):
        hit = None
        for d in _ray_directions(line):
            t = 1.0
            for _ in range(max_steps):
                q = line.base + t * d
                c = body.distance(q)
                if c > max(prev, 0.0) and _disc_distance(body, q, T, r) > AVOID_TOL:
                    hit = (q, c)
                    break
                t *= 2.0
            if hit:
                break
        if hit is None:
            return None
        table.append({"radius": float(r), "point": hit[0], "clearance": hit[1]})
        prev = hit[1]
    return table


def classify_complex_complement(body: ConvexBody, radii=DEFAULT_RADII):
    """Classify ``C^n minus body`` for holomorphic curves (``body`` in R^(2n))."""
    if body.dim % 2:
        raise OddDimension("complex classification needs an even real dimension")
    n = body.dim // 2
    if n < 2:
        raise InvalidParams("need n >= 2")
    J = complex_structure(body.dim)
    if body.is_empty:
        plane = AffinePlane(np.zeros(body.dim), np.eye(body.dim)[:2])
        return ClassificationResult(Verdict.FLEXIBLE, Rule.COMPLEX_PRODUCT,
                                    Witness(plane, math.inf, [], complex_line=True),
                                    {"note": "empty body: the domain is all of C^n"})
    try:
        rep = complex_lineality(body)
    except NonPolyhedral as exc:
        return ClassificationResult(Verdict.UNKNOWN, None, None, {"error": str(exc)})
    diag = {"real_lineality_dim": rep.real_lineality_dim,
            "complex_lineality_dim": rep.complex_lineality_dim, "m": rep.m,
            "factor_note": rep.factor_note}
    if rep.m == 0:
        raise InvalidParams("body is all of C^n")
    if rep.m == 1:
        is_point, _ = _factor_is_point(body, rep.complex_basis)
        if is_point:
            return ClassificationResult(Verdict.FLEXIBLE, Rule.COMPLEX_HYPERPLANE, None,
                                        {**diag, "note": "body is a complex hyperplane; "
                                         "its complement is Oka, no tube witness is used"})
        return ClassificationResult(Verdict.NOT_FLEXIBLE, Rule.HYPERBOLIC_FACTOR, None,
                                    {**diag, "note": "C minus a convex set with more than "
                                     "one point is Kobayashi hyperbolic"})

    domain = ConvexComplement(body)
    V = rep.real_basis
    p = _exterior_point(body)
    y, dist = body.project(p)
    a = (p - y) / dist
    Ja = J @ a
    cands = null_space(np.vstack([V.reshape(-1, body.dim), a, Ja]), body.dim)
    if cands.shape[0] == 0:
        cands = null_space(np.vstack([rep.complex_basis.reshape(-1, body.dim), a, Ja]), body.dim)
    diag.update({"point": p.tolist(), "support_normal": a.tolist()})
    for v in cands:
        line = AffinePlane.spanned(p, v, J @ v)
        delta, info = tube_radius(domain, line)
        if not delta > 0:
            continue
        alpha = _max_tilt(body, a, v, p) / 2
        if alpha > 0:
            a1 = math.cos(alpha) * a + math.sin(alpha) * v
        else:
            a1 = a
        T = null_space(np.vstack([a1, J @ a1]), body.dim)
        if alpha <= 0:
            T = null_space(line.dirs, body.dim)
        table = _complex_growth(body, line, T, radii)
        if table is None:
            continue
        w = Witness(line, delta, table, complex_line=True, transverse_normal=a1)
        return ClassificationResult(Verdict.FLEXIBLE, Rule.COMPLEX_PRODUCT, w,
                                    {**diag, "tilt": alpha, "tube": info})
    return ClassificationResult(Verdict.UNKNOWN, None, None,
                                {**diag, "note": "no complex witness line certified"})


def complex_to_real(U, shift=None):
    """Real ``(2n, 2n)`` matrix and shift of the complex-affine map ``z -> U z + c``."""
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    R = np.zeros((2 * n, 2 * n))
    R[0::2, 0::2] = U.real
    R[0::2, 1::2] = -U.imag
    R[1::2, 0::2] = U.imag
    R[1::2, 1::2] = U.real
    v = np.zeros(2 * n)
    if shift is not None:
        c = np.asarray(shift, dtype=complex)
        v[0::2], v[1::2] = c.real, c.imag
    return R, v

"""Catalogue of open domains in R^n with membership and clearance.

Every domain is open: ``contains`` uses strict inequalities and no
tolerance.  ``clearance`` returns the distance to the complement (a lower
bound for the union chain) and is zero outside the domain.  Both accept a
single point of shape ``(n,)`` or a batch of shape ``(N, n)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .convexgeo import ConvexBody
from .errors import DimMismatch, InvalidParams

VARIANTS = ("full_space", "convex_complement", "wedge", "quadric_graph",
            "wedge_graph", "halfspace", "slab", "union_chain")


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DimMismatch(f"expected points in R^{dim}, got shape {x.shape}")
    return x


def _ret(values, x):
    return values if np.ndim(x) > 1 else values.reshape(()).item()


class Domain:
    """Base class.  Subclasses implement ``_contains`` and ``_clearance`` on batches."""

    variant = ""
    dim: int

    def contains(self, x):
        pts = _as_points(x, self.dim)
        return _ret(self._contains(pts.reshape(-1, self.dim)).reshape(pts.shape[:-1]), pts)

    def clearance(self, x):
        pts = _as_points(x, self.dim)
        flat = pts.reshape(-1, self.dim)
        vals = np.where(self._contains(flat), self._clearance(flat), 0.0)
        return _ret(vals.reshape(pts.shape[:-1]), pts)

    def _contains(self, pts):
        raise NotImplementedError

    def _clearance(self, pts):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class FullSpace(Domain):
    dim: int
    variant = "full_space"

    def _contains(self, pts):
        return np.ones(len(pts), dtype=bool)

    def _clearance(self, pts):
        return np.full(len(pts), math.inf)

    def to_json(self):
        return {"variant": self.variant, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class ConvexComplement(Domain):
    body: ConvexBody
    variant = "convex_complement"

    @property
    def dim(self):
        return self.body.dim

    def _contains(self, pts):
        if self.body.is_empty:
            return np.ones(len(pts), dtype=bool)
        return ~np.asarray(self.body.contains(pts, tol=0.0), dtype=bool).reshape(len(pts))

    def _clearance(self, pts):
        if self.body.is_empty:
            return np.full(len(pts), math.inf)
        if not self.body.has_halfspaces and self.body.support != "custom":
            return np.asarray(self.body._smooth_distance(pts), dtype=float).reshape(len(pts))
        return np.array([self.body.distance(p) for p in pts])

    def to_json(self):
        return {"variant": self.variant, "body": self.body.to_json()}


def _check_frame(dim, rotation, translation):
    Q = np.eye(dim) if rotation is None else np.asarray(rotation, dtype=float)
    v = np.zeros(dim) if translation is None else np.asarray(translation, dtype=float)
    if Q.shape != (dim, dim) or np.max(np.abs(Q.T @ Q - np.eye(dim))) > 1e-9:
        raise InvalidParams("frame rotation must be orthogonal")
    if v.shape != (dim,):
        raise InvalidParams("frame translation has the wrong dimension")
    return Q, v


@dataclass(frozen=True, eq=False)
class Wedge(Domain):
    """``{x : (y_2, y_3) in Gamma}`` in the local frame ``y = Q^T (x - v)``.

    ``Gamma`` is the open planar cone ``|arg(y_2 + i y_3)| < angle / 2``
    with vertex at the origin; the remaining local coordinates are free
    (in R^3 this is the edge axis ``y_1``).
    """

    angle: float
    dim: int = 3
    rotation: np.ndarray = None
    translation: np.ndarray = None
    variant = "wedge"

    def __post_init__(self):
        if not 0 < self.angle < 2 * math.pi:
            raise InvalidParams("wedge angle must lie in (0, 2*pi)")
        if self.dim < 3:
            raise InvalidParams("wedge needs dimension >= 3")
        Q, v = _check_frame(self.dim, self.rotation, self.translation)
        object.__setattr__(self, "rotation", Q)
        object.__setattr__(self, "translation", v)

    def local(self, pts):
        return (pts - self.translation) @ self.rotation

    def _polar(self, pts):
        y = self.local(pts)
        return y[:, 1], y[:, 2]

    def _contains(self, pts):
        u, w = self._polar(pts)
        r = np.hypot(u, w)
        return (r > 0) & (np.abs(np.arctan2(w, u)) < self.angle / 2)

    def _clearance(self, pts):
        u, w = self._polar(pts)
        P = np.stack([u, w], axis=1)
        out = np.full(len(pts), math.inf)
        for sign in (1.0, -1.0):
            e = np.array([math.cos(self.angle / 2), sign * math.sin(self.angle / 2)])
            along = P @ e
            perp = np.abs(P[:, 0] * e[1] - P[:, 1] * e[0])
            d = np.where(along >= 0, perp, np.hypot(u, w))
            out = np.minimum(out, d)
        return out

    def side_direction(self, sign=1.0):
        """World direction of the boundary ray at angle ``sign * angle / 2``."""
        local = np.zeros(self.dim)
        local[1] = math.cos(self.angle / 2)
        local[2] = sign * math.sin(self.angle / 2)
        return self.rotation @ local

    def edge_direction(self):
        return self.rotation[:, 0].copy()

    def complement_body(self):
        """The closed complement as a convex body (only for angle > pi)."""
        if self.angle <= math.pi:
            raise InvalidParams("complement of a wedge is convex only for angle > pi")
        h = self.angle / 2
        A = np.zeros((2, self.dim))
        A[0, 1], A[0, 2] = math.sin(h), -math.cos(h)
        A[1, 1], A[1, 2] = math.sin(h), math.cos(h)
        body = ConvexBody.polyhedron(A, [0.0, 0.0], self.dim)
        return body.transform(self.rotation, self.translation)

    def to_json(self):
        return {"variant": self.variant, "angle": self.angle, "dim": self.dim,
                "frame": {"rotation": self.rotation.tolist(),
                          "translation": self.translation.tolist()}}


def quadric_graph_distance(pts, coeffs, x4_index=3):
    """Distance from points above ``x4 = sum_i c_i x_i^2`` to the region below it.

    The nearest point solves ``y_i = x_i / (1 - 2 s c_i)``, ``y_4 = x_4 - s``
    with ``s`` the unique root in ``(0, s_max)`` of the secular equation
    ``x_4 - s - sum_i c_i x_i^2 / (1 - 2 s c_i)^2 = 0``, where
    ``s_max = min_{c_i > 0} 1 / (2 c_i)``.  The bound on ``s`` is the
    second-order condition of the one-constraint quadratic problem, which
    makes the KKT point global.  Points with ``F(s_max) >= 0`` are the
    degenerate ("hard") case, where the coordinates with the largest
    ``c_i`` are zero and the foot point lies on a circle.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, pts.shape[-1])
    c = np.asarray(coeffs, dtype=float)
    xs = np.delete(pts, x4_index, axis=1)
    x4 = pts[:, x4_index]
    F0 = x4 - xs ** 2 @ c
    cpos = c[c > 0]
    s_max = 1.0 / (2.0 * cpos.max()) if cpos.size else math.inf

    def F(s):
        den = 1.0 - 2.0 * s[:, None] * c[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(xs == 0.0, 0.0, c * xs ** 2 / den ** 2)
        return x4 - s - terms.sum(axis=1)

    n = len(pts)
    if math.isfinite(s_max):
        hi = np.full(n, s_max)
        hard = F(hi) >= 0
    else:
        hi = np.maximum(x4 + xs ** 2 @ np.abs(np.minimum(c, 0.0)), 0.0) + 1.0
        hard = np.zeros(n, dtype=bool)
    lo = np.zeros(n)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = F(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
            break
    s = np.where(hard, s_max if math.isfinite(s_max) else 0.0, 0.5 * (lo + hi))
    den = 1.0 - 2.0 * s[:, None] * c[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(xs == 0.0, 0.0, xs * (-2.0 * s[:, None] * c) / den)
    d2 = (dev ** 2).sum(axis=1) + s ** 2
    if np.any(hard):
        cmax = cpos.max()
        rho2 = np.maximum(F(s) / cmax, 0.0)
        d2 = np.where(hard, d2 + rho2, d2)
    out = np.sqrt(d2)
    return np.where(F0 > 0, out, 0.0)


@dataclass(frozen=True, eq=False)
class QuadricGraph(Domain):
    """``x_4 > -a1 x_1^2 - a2 x_2^2 + a3 x_3^2`` in R^4 (``a1 >= 0``, ``a2 > 0``)."""

    a1: float
    a2: float
    a3: float
    variant = "quadric_graph"
    dim = 4

    def __post_init__(self):
        if self.a1 < 0 or self.a2 <= 0:
            raise InvalidParams("quadric graph needs a1 >= 0 and a2 > 0")

    @property
    def coeffs(self):
        return np.array([-self.a1, -self.a2, self.a3])

    def height(self, pts):
        return pts[:, :3] ** 2 @ self.coeffs

    def _contains(self, pts):
        return pts[:, 3] > self.height(pts)

    def _clearance(self, pts):
        return quadric_graph_distance(pts, self.coeffs)

    def to_json(self):
        return {"variant": self.variant, "a1": self.a1, "a2": self.a2, "a3": self.a3}


def _small_polyhedron_distance(G, h, Z):
    """Exact distance from rows of ``Z`` to ``{y : G y <= h}`` (few constraints).

    Enumerates active sets; the projection onto the affine hull of the
    active face is one of the feasible candidates, and every feasible
    candidate is a point of the polyhedron, so the minimum is exact.
    """
    m = G.shape[0]
    best = np.full(len(Z), math.inf)
    tol = 1e-10 * (1.0 + np.linalg.norm(Z, axis=1))[:, None]
    for r in range(m + 1):
        for S in itertools.combinations(range(m), r):
            if S:
                GS = G[list(S)]
                corr = (Z @ GS.T - h[list(S)]) @ np.linalg.pinv(GS).T
                Y = Z - corr
                if np.linalg.matrix_rank(GS) < len(S):
                    continue
            else:
                Y = Z
            feas = np.all(Y @ G.T <= h + tol, axis=1)
            d = np.linalg.norm(Z - Y, axis=1)
            best = np.where(feas, np.minimum(best, d), best)
    return best


@dataclass(frozen=True, eq=False)
class WedgeGraph(Domain):
    """``x_4 > -a2 |x_2| + a3 |x_3|`` in R^n, ``n >= 4`` (``a2 > 0``)."""

    a2: float
    a3: float
    dim: int = 4
    variant = "wedge_graph"

    def __post_init__(self):
        if self.a2 <= 0:
            raise InvalidParams("wedge graph needs a2 > 0")
        if self.dim < 4:
            raise InvalidParams("wedge graph needs dimension >= 4")

    def _contains(self, pts):
        return pts[:, 3] > -self.a2 * np.abs(pts[:, 1]) + self.a3 * np.abs(pts[:, 2])

    def _clearance(self, pts):
        Z = pts[:, 1:4]
        best = np.full(len(pts), math.inf)
        for s2, s3 in itertools.product((1.0, -1.0), repeat=2):
            G = np.array([[-s2, 0.0, 0.0],
                          [0.0, -s3, 0.0],
                          [self.a2 * s2, -self.a3 * s3, 1.0]])
            best = np.minimum(best, _small_polyhedron_distance(G, np.zeros(3), Z))
        return best

    def to_json(self):
        return {"variant": self.variant, "a2": self.a2, "a3": self.a3, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class Halfspace(Domain):
    """Open halfspace ``{x : normal . x > offset}``."""

    normal: np.ndarray
    offset: float
    variant = "halfspace"

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        n = np.linalg.norm(a)
        if n == 0:
            raise InvalidParams("zero normal")
        object.__setattr__(self, "normal", a / n)
        object.__setattr__(self, "offset", float(self.offset) / n)

    @property
    def dim(self):
        return self.normal.shape[0]

    def _contains(self, pts):
        return pts @ self.normal > self.offset

    def _clearance(self, pts):
        return pts @ self.normal - self.offset

    def to_json(self):
        return {"variant": self.variant, "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Slab(Domain):
    """Open slab ``{x : lo < normal . x < hi}``."""

    normal: np.ndarray
    lo: float
    hi: float
    variant = "slab"

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        n = np.linalg.norm(a)
        if n == 0 or not self.lo < self.hi:
            raise InvalidParams("slab needs a nonzero normal and lo < hi")
        object.__setattr__(self, "normal", a / n)
        object.__setattr__(self, "lo", float(self.lo) / n)
        object.__setattr__(self, "hi", float(self.hi) / n)

    @property
    def dim(self):
        return self.normal.shape[0]

    def _contains(self, pts):
        t = pts @ self.normal
        return (t > self.lo) & (t < self.hi)

    def _clearance(self, pts):
        t = pts @ self.normal
        return np.minimum(t - self.lo, self.hi - t)

    def to_json(self):
        return {"variant": self.variant, "normal": self.normal.tolist(),
                "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, eq=False)
class UnionChain(Domain):
    """Union of an increasing sequence of domains."""

    members: tuple = field(default_factory=tuple)
    variant = "union_chain"

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise InvalidParams("union chain needs at least one member")
        if len({m.dim for m in members}) != 1:
            raise DimMismatch("union chain members differ in dimension")
        object.__setattr__(self, "members", members)

    @property
    def dim(self):
        return self.members[0].dim

    def _contains(self, pts):
        out = np.zeros(len(pts), dtype=bool)
        for m in self.members:
            out |= m._contains(pts)
        return out

    def _clearance(self, pts):
        return np.max([m.clearance(pts) for m in self.members], axis=0)

    def check_increasing(self, rng, samples=200, box=5.0):
        """Sampled check that each member lies in the next one."""
        for inner, outer in zip(self.members, self.members[1:]):
            pts = sample_points(inner, rng, samples, box)
            if len(pts) and not np.all(outer.contains(pts)):
                return False
        return True

    def to_json(self):
        return {"variant": self.variant, "members": [m.to_json() for m in self.members]}


def sample_points(domain, rng, count, box=5.0, max_tries=200):
    """Up to ``count`` uniform points of ``domain`` inside ``[-box, box]^n``."""
    found = []
    for _ in range(max_tries):
        cand = rng.uniform(-box, box, size=(max(4 * count, 64), domain.dim))
        found.extend(cand[domain.contains(cand)])
        if len(found) >= count:
            break
    return np.array(found[:count]).reshape(-1, domain.dim)


def domain_from_json(data):
    """Build a domain from its JSON descriptor (``variant`` discriminator)."""
    variant = data.get("variant")
    if variant == "full_space":
        return FullSpace(int(data["dim"]))
    if variant == "convex_complement":
        return ConvexComplement(ConvexBody.from_json(data["body"]))
    if variant == "wedge":
        frame = data.get("frame", {}) or {}
        return Wedge(float(data["angle"]), int(data.get("dim", 3)),
                     frame.get("rotation"), frame.get("translation"))
    if variant == "quadric_graph":
        return QuadricGraph(float(data["a1"]), float(data["a2"]), float(data["a3"]))
    if variant == "wedge_graph":
        return WedgeGraph(float(data["a2"]), float(data["a3"]), int(data.get("dim", 4)))
    if variant == "halfspace":
        return Halfspace(np.asarray(data["normal"], dtype=float), float(data["offset"]))
    if variant == "slab":
        return Slab(np.asarray(data["normal"], dtype=float), float(data["lo"]), float(data["hi"]))
    if variant == "union_chain":
        return UnionChain(tuple(domain_from_json(m) for m in data["members"]))
    raise InvalidParams(f"unknown domain variant {variant!r}")

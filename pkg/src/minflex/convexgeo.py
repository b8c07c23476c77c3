"""Closed convex bodies in R^d: projection, lineality, supporting hyperplanes.

Polyhedra are stored in H-representation ``{x : A x <= b}`` with unit
normals.  Smooth bodies (balls and round cylinders, optionally rotated)
carry analytic projections; their lineality is read off their frame.
Both parts may be present, in which case the body is their intersection.

Projection onto a polyhedron uses Dykstra's algorithm (see
:mod:`minflex.kernels`).  Emptiness of a polyhedron is detected by a
Dykstra feasibility run and is therefore approximate: a residual
violation above ``EMPTY_TOL`` after the iteration budget means "empty".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import (DegeneratePlane, EmptyBody, InvalidParams, NonPolyhedral,
                     PointInsideBody)

MAX_ITER = 10_000
PROJ_TOL = 1e-10
FEAS_TOL = 1e-9
EMPTY_TOL = 1e-6
RANK_TOL = 1e-9
MERGE_ANGLE = 1e-10
SMOOTH_KINDS = ("ball", "cylinder", "disc-product")


def _orthonormal_rows(vectors, tol=1e-12):
    """Gram-Schmidt on rows, dropping (near) dependent ones."""
    out = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=float)):
        w = v.copy()
        for _ in range(2):
            for u in out:
                w -= (u @ w) * u
        n = np.linalg.norm(w)
        if n > tol * max(1.0, np.linalg.norm(v)):
            out.append(w / n)
    return np.array(out).reshape(len(out), np.atleast_2d(vectors).shape[1])


def null_space(M, d, tol=RANK_TOL):
    """Orthonormal basis (rows) of ``ker M`` in R^d."""
    M = np.asarray(M, dtype=float).reshape(-1, d)
    if M.shape[0] == 0:
        return np.eye(d)
    _, s, vt = np.linalg.svd(M)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vt[rank:].copy()


def orthogonal_complement(basis, d):
    """Orthonormal rows spanning the complement of the row span of ``basis``."""
    basis = np.asarray(basis, dtype=float).reshape(-1, d)
    return null_space(basis, d)


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """Affine 2-plane ``base + span(dirs)`` with orthonormal ``dirs``."""

    base: np.ndarray
    dirs: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        dirs = np.asarray(self.dirs, dtype=float)
        if dirs.shape != (2, base.shape[0]):
            raise DegeneratePlane(f"dirs must have shape (2, {base.shape[0]})")
        if np.max(np.abs(dirs @ dirs.T - np.eye(2))) > 1e-12:
            raise DegeneratePlane("plane directions are not orthonormal")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "dirs", dirs)

    @classmethod
    def spanned(cls, base, u, v):
        dirs = _orthonormal_rows([u, v])
        if dirs.shape[0] != 2:
            raise DegeneratePlane("plane directions are linearly dependent")
        return cls(np.asarray(base, dtype=float), dirs)

    @property
    def dim(self):
        return self.base.shape[0]

    def point(self, s, t):
        return self.base + s * self.dirs[0] + t * self.dirs[1]

    def project(self, x, box=None):
        """Orthogonal projection onto the plane, parameters optionally clamped."""
        st = self.dirs @ (np.asarray(x, dtype=float) - self.base)
        if box is not None:
            st = np.clip(st, -box, box)
        return self.base + st @ self.dirs, st

    def to_json(self):
        return {"base": self.base.tolist(), "dirs": self.dirs.tolist()}


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    base: np.ndarray
    basis: np.ndarray

    @property
    def k(self):
        return self.basis.shape[0]


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Closed convex set in R^dim.

    Use the constructors :meth:`polyhedron`, :meth:`ball`, :meth:`cylinder`,
    :meth:`disc_product`, :meth:`empty` or :meth:`from_support` rather than
    building instances directly.
    """

    dim: int
    A: np.ndarray
    b: np.ndarray
    support: Optional[str] = None
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    axes: tuple = ()
    rotation: Optional[np.ndarray] = None
    lineality_hint: Optional[int] = None
    is_empty: bool = False
    custom_support: Optional[Callable] = field(default=None, repr=False)
    custom_project: Optional[Callable] = field(default=None, repr=False)

    # -- construction -------------------------------------------------
    @staticmethod
    def _normalize(A, b, dim):
        A = np.asarray(A, dtype=float).reshape(-1, dim)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise InvalidParams("halfspace normals and offsets differ in count")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise InvalidParams("zero halfspace normal")
        A = A / norms[:, None]
        b = b / norms
        keep_A, keep_b = [], []
        for a, beta in zip(A, b):
            for j, a2 in enumerate(keep_A):
                if math.acos(max(-1.0, min(1.0, float(a @ a2)))) < MERGE_ANGLE:
                    keep_b[j] = min(keep_b[j], beta)
                    break
            else:
                keep_A.append(a)
                keep_b.append(beta)
        return (np.array(keep_A).reshape(-1, dim), np.array(keep_b, dtype=float))

    @classmethod
    def polyhedron(cls, A, b, dim=None, lineality_hint=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        dim = A.shape[1] if dim is None else dim
        A, b = cls._normalize(A, b, dim)
        body = cls(dim, A, b, lineality_hint=lineality_hint)
        return body._with_emptiness()

    @classmethod
    def empty(cls, dim):
        return cls(dim, np.zeros((0, dim)), np.zeros(0), is_empty=True)

    @classmethod
    def ball(cls, center, radius, A=None, b=None):
        center = np.asarray(center, dtype=float)
        d = center.shape[0]
        return cls._smooth("ball", d, center, radius, tuple(range(d)), None, A, b)

    @classmethod
    def cylinder(cls, dim, axes, center=None, radius=1.0, rotation=None, A=None, b=None):
        """Round cylinder ``{x : |(Q^T (x - c))[axes]| <= radius}``."""
        center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls._smooth("cylinder", dim, center, radius, tuple(sorted(axes)), rotation, A, b)

    @classmethod
    def disc_product(cls, n_complex, center=None, radius=1.0, rotation=None, A=None, b=None):
        """Closed disc in the first complex coordinate times C^(n-1), as a body in R^(2n)."""
        dim = 2 * n_complex
        center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls._smooth("disc-product", dim, center, radius, (0, 1), rotation, A, b)

    @classmethod
    def _smooth(cls, kind, dim, center, radius, axes, rotation, A, b):
        if radius < 0:
            raise InvalidParams("radius must be nonnegative")
        if not axes or any(a < 0 or a >= dim for a in axes):
            raise InvalidParams(f"bad axes {axes} for dimension {dim}")
        Q = np.eye(dim) if rotation is None else np.asarray(rotation, dtype=float)
        if Q.shape != (dim, dim) or np.max(np.abs(Q.T @ Q - np.eye(dim))) > 1e-9:
            raise InvalidParams("rotation must be an orthogonal matrix")
        if A is None:
            A2, b2 = np.zeros((0, dim)), np.zeros(0)
        else:
            A2, b2 = cls._normalize(A, b, dim)
        body = cls(dim, A2, b2, support=kind, center=center, radius=float(radius),
                   axes=tuple(axes), rotation=Q)
        return body._with_emptiness() if A2.shape[0] else body

    @classmethod
    def from_support(cls, dim, support_fn, project_fn, lineality_hint=None):
        """Body known only through its support function and a projection oracle."""
        return cls(dim, np.zeros((0, dim)), np.zeros(0), support="custom",
                   lineality_hint=lineality_hint, custom_support=support_fn,
                   custom_project=project_fn)

    def _with_emptiness(self):
        if self.A.shape[0] == 0:
            return self
        x, _, resid = self._dykstra(np.zeros(self.dim))
        if resid > EMPTY_TOL or (self.support and self._smooth_distance(x) > EMPTY_TOL):
            return ConvexBody(self.dim, self.A, self.b, self.support, self.center,
                              self.radius, self.axes, self.rotation,
                              self.lineality_hint, True)
        return self

    # -- basic queries ------------------------------------------------
    @property
    def is_polyhedral(self):
        return self.support is None

    @property
    def has_halfspaces(self):
        return self.A.shape[0] > 0

    def _local(self, x):
        return (np.asarray(x, dtype=float) - self.center) @ self.rotation

    def _smooth_project(self, x):
        x = np.asarray(x, dtype=float)
        if self.support == "custom":
            return np.asarray(self.custom_project(x), dtype=float)
        y = self._local(x)
        ax = list(self.axes)
        r = np.linalg.norm(y[..., ax], axis=-1, keepdims=True)
        scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        y = y.copy()
        y[..., ax] = y[..., ax] * scale
        return self.center + y @ self.rotation.T

    def _smooth_distance(self, x):
        if self.support == "custom":
            return float(np.linalg.norm(x - self._smooth_project(x)))
        y = self._local(x)
        r = np.linalg.norm(y[..., list(self.axes)], axis=-1)
        return np.maximum(r - self.radius, 0.0)

    def support_fn(self, u):
        """Support function of the smooth part (``inf`` in unbounded directions)."""
        u = np.asarray(u, dtype=float)
        if self.support is None:
            raise NonPolyhedral("support function is only stored for smooth bodies")
        if self.support == "custom":
            return float(self.custom_support(u))
        w = self.rotation.T @ u
        free = [i for i in range(self.dim) if i not in self.axes]
        if free and np.max(np.abs(w[free])) > 1e-12 * max(1.0, np.linalg.norm(u)):
            return math.inf
        return float(u @ self.center + self.radius * np.linalg.norm(w[list(self.axes)]))

    def contains(self, x, tol=FEAS_TOL):
        """Membership with tolerance; ``x`` may be a point or an ``(N, dim)`` array."""
        x = np.asarray(x, dtype=float)
        if self.is_empty:
            return np.zeros(x.shape[:-1], dtype=bool) if x.ndim > 1 else False
        ok = np.ones(x.shape[:-1], dtype=bool)
        if self.has_halfspaces:
            ok &= np.max(x @ self.A.T - self.b, axis=-1) <= tol
        if self.support == "custom":
            pts = x.reshape(-1, self.dim)
            ok &= np.array([np.linalg.norm(p - self._smooth_project(p)) <= tol for p in pts]).reshape(ok.shape)
        elif self.support:
            ok &= self._smooth_distance(x) <= tol
        return bool(ok) if x.ndim == 1 else ok

    # -- projection ---------------------------------------------------
    def _dykstra(self, x):
        if not self.support:
            return kernels.dykstra_halfspaces(self.A, self.b, np.ascontiguousarray(x, dtype=float),
                                              MAX_ITER, PROJ_TOL)
        # mixed body: smooth set plus halfspaces, generic Dykstra
        sets = [self._smooth_project]
        for a, beta in zip(self.A, self.b):
            sets.append(lambda y, a=a, beta=beta: y - max(0.0, a @ y - beta) * a)
        x = np.array(x, dtype=float)
        incs = [np.zeros_like(x) for _ in sets]
        it = 0
        for it in range(1, MAX_ITER + 1):
            change = 0.0
            for i, proj in enumerate(sets):
                y = x + incs[i]
                s = proj(y)
                change += float((s - x) @ (s - x))
                incs[i] = y - s
                x = s
            if math.sqrt(change) <= PROJ_TOL:
                break
        resid = max(0.0, float(np.max(self.A @ x - self.b)))
        return x, it, resid

    def project(self, x):
        """Nearest point of the body to ``x`` and the distance to it."""
        if self.is_empty:
            raise EmptyBody("cannot project onto an empty body")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InvalidParams(f"expected a point in R^{self.dim}")
        if not self.has_halfspaces:
            y = self._smooth_project(x)
        elif not self.support and self.A.shape[0] == 1:
            a, beta = self.A[0], self.b[0]
            y = x - max(0.0, a @ x - beta) * a
        else:
            y, _, _ = self._dykstra(x)
        return y, float(np.linalg.norm(x - y))

    def distance(self, x):
        return self.project(x)[1]

    # -- lineality ----------------------------------------------------
    def lineality_space(self):
        """Maximal affine subspace contained in the body."""
        if self.is_empty:
            raise EmptyBody("empty body has no lineality space")
        if self.support == "custom":
            raise NonPolyhedral("no finite lineality certificate; supply lineality_hint")
        rows = [self.A]
        if self.support:
            rows.append(self.rotation[:, list(self.axes)].T)
        basis = null_space(np.vstack(rows), self.dim)
        if self.lineality_hint is not None and self.lineality_hint != basis.shape[0]:
            raise InvalidParams(
                f"lineality hint {self.lineality_hint} disagrees with computed {basis.shape[0]}")
        base, _ = self.project(np.zeros(self.dim))
        return AffineSubspace(base, basis)

    def lineality_dim(self):
        if self.support == "custom":
            if self.lineality_hint is None:
                raise NonPolyhedral("no finite lineality certificate; supply lineality_hint")
            return int(self.lineality_hint)
        return self.lineality_space().k

    def is_halfspace_or_slab(self):
        """True iff the body is a halfspace or a slab (lineality dimension d-1)."""
        if self.is_empty:
            raise EmptyBody("empty body")
        return self.lineality_dim() == self.dim - 1

    def supporting_hyperplane(self, p):
        """Unit ``a`` and ``b`` with ``a.x <= b`` on the body and ``a.p > b``."""
        y, dist = self.project(p)
        if dist <= FEAS_TOL:
            raise PointInsideBody("point lies in the body")
        a = (np.asarray(p, dtype=float) - y) / dist
        return a, float(a @ y)

    # -- transformations and sampling ---------------------------------
    def transform(self, R, v=None):
        """Image under ``x -> R x + v`` with ``R`` orthogonal."""
        R = np.asarray(R, dtype=float)
        v = np.zeros(self.dim) if v is None else np.asarray(v, dtype=float)
        A2 = self.A @ R.T
        b2 = self.b + A2 @ v
        if self.support == "custom":
            raise NonPolyhedral("custom bodies cannot be transformed")
        if self.support:
            return ConvexBody(self.dim, A2, b2, self.support, R @ self.center + v,
                              self.radius, self.axes, R @ self.rotation,
                              self.lineality_hint, self.is_empty)
        return ConvexBody(self.dim, A2, b2, lineality_hint=self.lineality_hint,
                          is_empty=self.is_empty)

    def sample_points(self, rng, count, spread=5.0):
        """Points of the body obtained by projecting random points."""
        anchor, _ = self.project(np.zeros(self.dim))
        pts = anchor + spread * rng.standard_normal((count, self.dim))
        return np.array([self.project(p)[0] for p in pts])

    # -- serialization ------------------------------------------------
    def to_json(self):
        out = {
            "dim": self.dim,
            "halfspaces": [{"a": a.tolist(), "b": float(beta)} for a, beta in zip(self.A, self.b)],
            "support": self.support or "none",
            "params": {},
        }
        if self.support and self.support != "custom":
            out["params"] = {"center": self.center.tolist(), "radius": self.radius,
                             "axes": list(self.axes), "rotation": self.rotation.tolist()}
        if self.lineality_hint is not None:
            out["lineality_hint"] = self.lineality_hint
        if self.is_empty:
            out["empty"] = True
        return out

    @classmethod
    def from_json(cls, data):
        dim = int(data["dim"])
        hs = data.get("halfspaces", [])
        A = np.array([h["a"] for h in hs], dtype=float).reshape(-1, dim)
        b = np.array([h["b"] for h in hs], dtype=float)
        kind = data.get("support", "none") or "none"
        params = data.get("params", {}) or {}
        hint = data.get("lineality_hint")
        if data.get("empty"):
            return cls.empty(dim)
        extra = dict(A=A, b=b) if len(hs) else {}
        if kind == "none":
            if not len(hs):
                raise InvalidParams("polyhedral body needs at least one halfspace")
            return cls.polyhedron(A, b, dim, lineality_hint=hint)
        center = np.asarray(params.get("center", np.zeros(dim)), dtype=float)
        radius = float(params.get("radius", 1.0))
        rot = params.get("rotation")
        if kind == "ball":
            return cls.ball(center, radius, **extra)
        if kind == "cylinder":
            axes = params.get("axes")
            if axes is None:
                raise InvalidParams("cylinder needs params.axes")
            return cls.cylinder(dim, axes, center, radius, rot, **extra)
        if kind == "disc-product":
            if dim % 2:
                raise InvalidParams("disc-product lives in an even real dimension")
            return cls.disc_product(dim // 2, center, radius, rot, **extra)
        raise InvalidParams(f"unknown support kind {kind!r}")


def halfspace(normal, offset):
    """The closed halfspace ``{x : normal.x <= offset}``."""
    normal = np.asarray(normal, dtype=float)
    return ConvexBody.polyhedron(normal[None, :], [offset])


def slab(normal, lo, hi):
    """The closed slab ``{x : lo <= normal.x <= hi}``."""
    normal = np.asarray(normal, dtype=float)
    n = np.linalg.norm(normal)
    return ConvexBody.polyhedron(np.vstack([normal, -normal]) / n, [hi / n, -lo / n])


def box(lo: Sequence[float], hi: Sequence[float]):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.shape[0]
    return ConvexBody.polyhedron(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([hi, -lo]))


def distance_to_set(body, project_other, start, max_iter=5000, tol=1e-12):
    """Distance between ``body`` and a closed convex set given by its projector.

    Alternating projections started from ``start`` (a point of the other set).
    Returns ``(distance, x_other, y_body)``.
    """
    x = np.asarray(start, dtype=float)
    y, _ = body.project(x)
    for _ in range(max_iter):
        x_new = project_other(y)
        y, _ = body.project(x_new)
        moved = float(np.linalg.norm(x_new - x))
        x = x_new
        if moved <= tol * (1.0 + float(np.linalg.norm(x))):
            break
    return float(np.linalg.norm(x - y)), x, y


def plane_distance(body, plane: AffinePlane, box_size=1e6):
    """Distance from an affine plane to ``body``.

    Plane parameters are confined to ``|s|, |t| <= box_size``; the returned
    flag ``hit_box`` reports that the minimizer reached that box, in which
    case the distance may be approached only at infinity.
    """
    def proj(y):
        return plane.project(y, box=box_size)[0]

    dist, x, y = distance_to_set(body, proj, plane.base)
    st = plane.dirs @ (x - plane.base)
    hit_box = bool(np.max(np.abs(st)) >= box_size * (1 - 1e-9))
    return dist, x, y, hit_box

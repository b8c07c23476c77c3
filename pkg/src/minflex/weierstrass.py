"""Weierstrass data of minimal surfaces on structured grids.

A conformal minimal immersion ``f`` of a planar chart is recorded together
with ``h = 2 df^{1,0} / theta``, where ``theta`` is ``dz`` or ``dz/z``.
Grids are indexed by a chart coordinate ``w = u + i v``: the identity
``w = z`` on rectangles, discs and strips, and ``z = exp(w)`` on annuli.
In that chart ``theta = phi(w) dw`` and

    f_u = Re(h phi),    f_v = -Im(h phi),

which is what the differentiation, integration and period routines use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import (DimMismatch, EndpointOutsideDomain, GridTooCoarse,
                     InvalidParams, LoopExitsGrid, NoPathFound,
                     NullQuadricViolation, PathDisagreement, PeriodObstruction,
                     UnknownSurface, ZeroVector)

NULL_EPS = 1e-300
BRANCH_TOL = 1e-10
PERIOD_TOL = 1e-6
INTEGRATE_NULL_TOL = 1e-8
PATH_TOL = 1e-6
PATH_CHECKS = 50
RING = 3
ARC_SAMPLES = 1000
ARC_FD_STEP = 1e-6

# 6th-order central stencils at offsets -3..3
D1 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
D2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0


# ---------------------------------------------------------------------------
# Null quadric

def null_residual(z):
    """``|sum z_i^2| / max(sum |z_i|^2, eps)``, vectorized over leading axes."""
    z = np.asarray(z, dtype=complex)
    num = np.abs(np.sum(z * z, axis=-1))
    den = np.maximum(np.sum(np.abs(z) ** 2, axis=-1), NULL_EPS)
    out = num / den
    return float(out) if out.ndim == 0 else out


def spinor_param(a, b):
    """The null vector ``(a^2 - b^2, i(a^2 + b^2), 2ab)`` in C^3."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return np.stack([a * a - b * b, 1j * (a * a + b * b), 2 * a * b], axis=-1)


def real_to_null(w):
    """Null vector ``w + i w'`` with ``w' ⟂ w`` and ``|w'| = |w|``.

    The partner ``w'`` is Gram-Schmidt of the coordinate axis least aligned
    with ``w`` (lowest index on ties), rescaled to ``|w|``.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or len(w) < 3:
        raise InvalidParams("real_to_null needs a vector in R^n with n >= 3")
    norm = float(np.linalg.norm(w))
    if norm == 0.0 or not math.isfinite(norm):
        raise ZeroVector("cannot build a null vector with zero real part")
    unit = w / norm
    axis = int(np.argmin(np.abs(unit)))
    e = np.zeros_like(w)
    e[axis] = 1.0
    partner = e - unit[axis] * unit
    partner -= (partner @ unit) * unit
    partner *= norm / np.linalg.norm(partner)
    return w + 1j * partner


# ---------------------------------------------------------------------------
# Parameter domains

@dataclass(frozen=True, eq=False)
class ParamDomain:
    """Structured grid on a planar chart.

    ``kind`` is ``rectangle``, ``disc``, ``annulus`` or ``strip``.  Annuli use
    the log chart ``w = log z`` with ``v`` periodic; discs are sampled on
    their bounding square and masked.  ``loops`` are closed polylines in the
    chart coordinate (first point equal to the last).
    """

    kind: str
    u_range: tuple
    v_range: tuple
    n_u: int
    n_v: int
    periodic_v: bool = False
    radius: Optional[float] = None
    loops: tuple = ()

    @property
    def chart(self):
        return "log" if self.kind == "annulus" else "plane"

    @property
    def u(self):
        return np.linspace(self.u_range[0], self.u_range[1], self.n_u)

    @property
    def v(self):
        if self.periodic_v:
            return self.v_range[0] + (self.v_range[1] - self.v_range[0]) * np.arange(self.n_v) / self.n_v
        return np.linspace(self.v_range[0], self.v_range[1], self.n_v)

    @property
    def hu(self):
        return (self.u_range[1] - self.u_range[0]) / (self.n_u - 1)

    @property
    def hv(self):
        span = self.v_range[1] - self.v_range[0]
        return span / self.n_v if self.periodic_v else span / (self.n_v - 1)

    @property
    def w(self):
        U, V = np.meshgrid(self.u, self.v, indexing="ij")
        return U + 1j * V

    @property
    def mask(self):
        if self.kind == "disc":
            return np.abs(self.w) <= self.radius * (1 + 1e-12)
        return np.ones((self.n_u, self.n_v), dtype=bool)

    def interior(self, ring=RING):
        """Nodes whose full stencil of half-width ``ring`` lies in the mask."""
        m = self.mask
        out = m.copy()
        out[:ring] = out[-ring:] = False
        if not self.periodic_v:
            out[:, :ring] = out[:, -ring:] = False
        for k in range(1, ring + 1):
            for s in (k, -k):
                out &= np.roll(m, s, axis=0)
                out &= np.roll(m, s, axis=1)
        return out

    def boundary_ring(self):
        """Outermost ring of grid nodes (mask nodes with a neighbour outside)."""
        m = self.mask
        inner = m.copy()
        inner[0] = inner[-1] = False
        if not self.periodic_v:
            inner[:, 0] = inner[:, -1] = False
        for s in (1, -1):
            inner &= np.roll(m, s, axis=0) & np.roll(m, s, axis=1)
        return m & ~inner

    def z_of(self, w):
        return np.exp(w) if self.chart == "log" else w

    def phi(self, theta, w):
        """Chart factor with ``theta = phi(w) dw``."""
        w = np.asarray(w, dtype=complex)
        if theta == "dz":
            return np.exp(w) if self.chart == "log" else np.ones_like(w)
        if theta == "dz/z":
            return np.ones_like(w) if self.chart == "log" else 1.0 / w
        raise InvalidParams(f"unsupported 1-form {theta!r}")

    def to_json(self):
        return {"kind": self.kind, "u_range": list(self.u_range),
                "v_range": list(self.v_range), "n_u": self.n_u, "n_v": self.n_v,
                "periodic_v": self.periodic_v, "radius": self.radius}


def circle_loop(center=0j, radius=0.5, points=256):
    t = np.linspace(0.0, 2 * math.pi, points + 1)
    return center + radius * np.exp(1j * t)


def neck_loop(u=0.0, points=256):
    """Loop ``|z| = e^u`` in the log chart, counterclockwise in z."""
    return u + 1j * np.linspace(0.0, 2 * math.pi, points + 1)


def rectangle(u_range, v_range, grid=64, loops=()):
    return ParamDomain("rectangle", tuple(u_range), tuple(v_range), grid, grid, loops=tuple(loops))


def strip(length=4.0, width=math.pi, grid=64, loops=()):
    return ParamDomain("strip", (-length / 2, length / 2), (0.0, width), grid, grid, loops=tuple(loops))


def disc(radius=1.0, grid=64, loops=None):
    if loops is None:
        loops = (circle_loop(0j, radius / 2),)
    return ParamDomain("disc", (-radius, radius), (-radius, radius), grid, grid,
                       radius=radius, loops=tuple(loops))


def annulus(r_in, r_out, grid=64, loops=None):
    if not 0 < r_in < r_out:
        raise InvalidParams("annulus needs 0 < r_in < r_out")
    lo, hi = math.log(r_in), math.log(r_out)
    if loops is None:
        loops = (neck_loop(0.5 * (lo + hi)),)
    return ParamDomain("annulus", (lo, hi), (0.0, 2 * math.pi), grid, grid,
                       periodic_v=True, loops=tuple(loops))


# ---------------------------------------------------------------------------
# Samples

@dataclass(eq=False)
class WeierstrassSample:
    """Grid sample of ``f`` (real, ``(n_u, n_v, n)``) and ``h`` (complex).

    ``h_fn`` is an optional exact evaluator of ``h`` in the chart
    coordinate, used by the period quadrature instead of interpolation.
    """

    domain: ParamDomain
    h: np.ndarray
    f: Optional[np.ndarray] = None
    theta: str = "dz"
    h_fn: Optional[Callable] = None
    base: tuple = (0, 0)
    name: str = "custom"

    @property
    def dim(self):
        return self.h.shape[-1]

    @property
    def phi(self):
        return self.domain.phi(self.theta, self.domain.w)

    def to_json(self):
        return {"name": self.name, "theta": self.theta, "dim": self.dim,
                "domain": self.domain.to_json()}


def sample_from_h(domain, h_fn, theta="dz", f_fn=None, name="custom"):
    """Evaluate ``h_fn`` (and optionally ``f_fn``) on the chart grid."""
    W = domain.w
    h = np.asarray(h_fn(W), dtype=complex)
    f = None if f_fn is None else np.asarray(f_fn(W), dtype=float)
    return WeierstrassSample(domain, h, f, theta, h_fn, (domain.n_u // 2, domain.n_v // 2), name)


def _shift(a, k, axis):
    return np.roll(a, -k, axis=axis)


def _d1(a, step, axis):
    return sum(c * _shift(a, k - 3, axis) for k, c in enumerate(D1) if c) / step


def _d2(a, step, axis):
    return sum(c * _shift(a, k - 3, axis) for k, c in enumerate(D2)) / step ** 2


def derivative_h(sample: WeierstrassSample):
    """``h = (f_u - i f_v) / phi`` by 6th-order central differences.

    Values within ``RING`` nodes of a non-periodic edge (or outside a disc)
    are meaningless; use ``domain.interior()`` to select valid nodes.
    """
    d = sample.domain
    fu = _d1(sample.f, d.hu, 0)
    fv = _d1(sample.f, d.hv, 1)
    return (fu - 1j * fv) / sample.phi[..., None], fu, fv


@dataclass
class ConformalityReport:
    max_null: float
    max_harmonic: float
    min_abs_h: float
    branched: bool
    max_length_defect: float
    max_angle_defect: float
    interior_nodes: int

    def to_json(self):
        return dict(self.__dict__)


def conformality_residuals(sample: WeierstrassSample) -> ConformalityReport:
    """Nullity of ``2 df^{1,0}/theta`` and harmonicity of ``f`` at interior nodes.

    ``max_harmonic`` is ``hu * hv * |Delta f|`` with a 6th-order Laplacian.
    The length and angle defects are ``| |f_u| - |f_v| |`` and ``|f_u . f_v|``.
    """
    if sample.f is None:
        raise InvalidParams("sample has no f values")
    d = sample.domain
    inner = d.interior()
    rows = np.any(inner, axis=1).sum()
    cols = np.any(inner, axis=0).sum()
    if rows < 4 or cols < 4:
        raise GridTooCoarse("fewer than 4 interior nodes per axis")
    h, fu, fv = derivative_h(sample)
    lap = _d2(sample.f, d.hu, 0) + _d2(sample.f, d.hv, 1)
    nulls = null_residual(h[inner])
    harm = d.hu * d.hv * np.max(np.abs(lap[inner]))
    mags = np.linalg.norm(h[inner], axis=-1)
    ln = np.abs(np.linalg.norm(fu[inner], axis=-1) - np.linalg.norm(fv[inner], axis=-1))
    ang = np.abs(np.sum(fu[inner] * fv[inner], axis=-1))
    min_h = float(mags.min())
    return ConformalityReport(float(nulls.max()), float(harm), min_h, min_h < BRANCH_TOL,
                              float(ln.max()), float(ang.max()), int(inner.sum()))


# ---------------------------------------------------------------------------
# Periods

def _check_loop(domain, loop):
    loop = np.asarray(loop, dtype=complex)
    gap = loop[-1] - loop[0] if len(loop) else 0j
    if domain.periodic_v:
        period = domain.v_range[1] - domain.v_range[0]
        gap = complex(gap.real, math.remainder(gap.imag, period))
    if len(loop) < 3 or abs(gap) > 1e-12:
        raise InvalidParams("loops must be closed polylines (first point = last point)")
    u, v = loop.real, loop.imag
    tol = 1e-12
    if np.any(u < domain.u_range[0] - tol) or np.any(u > domain.u_range[1] + tol):
        raise LoopExitsGrid("loop leaves the grid in u")
    if not domain.periodic_v and (np.any(v < domain.v_range[0] - tol) or np.any(v > domain.v_range[1] + tol)):
        raise LoopExitsGrid("loop leaves the grid in v")
    if domain.kind == "disc" and np.any(np.abs(loop) > domain.radius * (1 + 1e-12)):
        raise LoopExitsGrid("loop leaves the disc")
    return loop


def _interpolator(sample):
    """Bicubic interpolation of ``h * phi`` (periodic padding in ``v`` on annuli)."""
    d = sample.domain
    g = sample.h * sample.phi[..., None]
    u, v = d.u, d.v
    if d.periodic_v:
        period = d.v_range[1] - d.v_range[0]
        v = np.concatenate([v[-4:] - period, v, v[:4] + period])
        g = np.concatenate([g[:, -4:], g, g[:, :4]], axis=1)
    splines = []
    for c in range(g.shape[-1]):
        splines.append((RectBivariateSpline(u, v, g[..., c].real, kx=3, ky=3),
                        RectBivariateSpline(u, v, g[..., c].imag, kx=3, ky=3)))

    def evaluate(w):
        uu, vv = w.real, w.imag
        if d.periodic_v:
            vv = d.v_range[0] + np.mod(vv - d.v_range[0], d.v_range[1] - d.v_range[0])
        return np.stack([re.ev(uu, vv) + 1j * im.ev(uu, vv) for re, im in splines], axis=-1)
    return evaluate


def _trapezoid(g, loop):
    dw = np.diff(loop)
    return np.sum(0.5 * (g[1:] + g[:-1]) * dw[:, None], axis=0)


def period_integrals(sample: WeierstrassSample, loops=None):
    """Real periods ``Re oint h theta`` over each loop.

    Composite trapezoid on the loop polyline and on every other vertex,
    combined by Richardson extrapolation.  ``h theta`` is evaluated exactly
    when the sample carries ``h_fn`` and by bicubic interpolation otherwise.
    """
    d = sample.domain
    loops = d.loops if loops is None else loops
    if not loops:
        return []
    if sample.h_fn is not None:
        def g_of(w):
            return np.asarray(sample.h_fn(w), dtype=complex) * d.phi(sample.theta, w)[..., None]
    else:
        g_of = _interpolator(sample)
    out = []
    for loop in loops:
        loop = _check_loop(d, loop)
        g = g_of(loop)
        fine = _trapezoid(g, loop)
        if (len(loop) - 1) % 2 == 0:
            coarse = _trapezoid(g[::2], loop[::2])
            fine = (4 * fine - coarse) / 3
        out.append(fine.real)
    return out


# ---------------------------------------------------------------------------
# Integration

def _cumulative_weights(n, order=6):
    """Per-interval weights of a cumulative degree-5 Lagrange quadrature."""
    order = min(order, n)
    W = np.zeros((n - 1, order))
    S = np.zeros(n - 1, dtype=int)
    for j in range(n - 1):
        s = min(max(j - order // 2 + 1, 0), n - order)
        nodes = np.arange(s, s + order, dtype=float) - j
        for k in range(order):
            others = np.delete(nodes, k)
            poly = np.poly1d(others, r=True) / np.prod(nodes[k] - others)
            ip = np.polyint(poly)
            W[j, k] = ip(1.0) - ip(0.0)
        S[j] = s
    return W, S


def cumulative_integral(y, step, axis=0):
    """``int_{x_0}^{x_k} y`` at every node along ``axis`` (6th-order)."""
    y = np.moveaxis(np.asarray(y), axis, 0)
    n = y.shape[0]
    W, S = _cumulative_weights(n)
    idx = S[:, None] + np.arange(W.shape[1])[None, :]
    inc = np.einsum("jk,jk...->j...", W, y[idx]) * step
    out = np.concatenate([np.zeros_like(y[:1]), np.cumsum(inc, axis=0)], axis=0)
    return np.moveaxis(out, 0, axis)


def integrate(sample: WeierstrassSample, base=None, f0=None, seed=0):
    """Recover ``f = f0 + Re int h theta`` on the grid.

    Two staircase paths (``u`` then ``v``, and ``v`` then ``u``) from the
    base node must agree within ``PATH_TOL`` at 50 random nodes.
    """
    d = sample.domain
    n = sample.dim
    inner = d.interior()
    if np.any(null_residual(sample.h[inner]) > INTEGRATE_NULL_TOL):
        raise NullQuadricViolation("h leaves the null quadric")
    for P in period_integrals(sample):
        if np.max(np.abs(P)) > PERIOD_TOL:
            raise PeriodObstruction(f"nonzero real period {P.tolist()}")
    i0, j0 = sample.base if base is None else base
    f0 = np.zeros(n) if f0 is None else np.asarray(f0, dtype=float)
    g = sample.h * sample.phi[..., None]
    fu, fv = g.real, -g.imag
    # path A: along u on row j0, then along v
    row = cumulative_integral(fu[:, j0], d.hu, axis=0)
    row -= row[i0]
    colA = cumulative_integral(fv, d.hv, axis=1)
    fA = f0 + row[:, None, :] + colA - colA[:, j0:j0 + 1]
    # path B: along v on column i0, then along u
    col = cumulative_integral(fv[i0], d.hv, axis=0)
    col -= col[j0]
    rowB = cumulative_integral(fu, d.hu, axis=0)
    fB = f0 + col[None, :, :] + rowB - rowB[i0:i0 + 1]
    rng = np.random.default_rng(seed)
    nodes = np.argwhere(d.mask)
    pick = nodes[rng.choice(len(nodes), size=min(PATH_CHECKS, len(nodes)), replace=False)]
    gap = np.max(np.abs(fA[pick[:, 0], pick[:, 1]] - fB[pick[:, 0], pick[:, 1]]))
    if gap > PATH_TOL:
        raise PathDisagreement(f"staircase paths disagree by {gap:.3e}")
    return replace(sample, f=fA, base=(i0, j0))


# ---------------------------------------------------------------------------
# Catalogue

def _surface_data(name):
    if name == "plane":
        return (lambda W: np.stack([np.ones_like(W), -1j * np.ones_like(W), np.zeros_like(W)], -1),
                lambda W: np.stack([W.real, W.imag, np.zeros(W.shape)], -1))
    if name == "enneper":
        return (lambda W: np.stack([1 - W ** 2, 1j * (1 + W ** 2), 2 * W], -1),
                lambda W: np.stack([(W - W ** 3 / 3).real, (1j * (W + W ** 3 / 3)).real,
                                    (W ** 2).real], -1))
    if name == "catenoid":
        return (lambda W: np.stack([np.sinh(W), -1j * np.cosh(W), np.ones_like(W)], -1),
                lambda W: np.stack([np.cosh(W.real) * np.cos(W.imag),
                                    np.cosh(W.real) * np.sin(W.imag), W.real], -1))
    if name == "helicoid":
        return (lambda W: np.stack([np.cosh(W), -1j * np.sinh(W), -1j * np.ones_like(W)], -1),
                lambda W: np.stack([np.sinh(W.real) * np.cos(W.imag),
                                    np.sinh(W.real) * np.sin(W.imag), W.imag], -1))
    raise UnknownSurface(f"unknown surface {name!r}")


SURFACES = ("plane", "enneper", "catenoid", "helicoid")


def _default_domain(name, grid):
    if name == "plane":
        return rectangle((-1.0, 1.0), (-1.0, 1.0), grid, loops=(circle_loop(0j, 0.5),))
    if name == "enneper":
        return disc(1.0, grid)
    if name == "catenoid":
        return annulus(math.exp(-1.0), math.e, grid)
    return rectangle((-1.0, 1.0), (0.0, 2 * math.pi), grid,
                     loops=(circle_loop(math.pi * 1j, 0.5),))


def surface_catalogue(name, scale=1.0, offset=None, rotation=None, grid=64, domain=None):
    """Closed-form sample of a classical minimal surface in R^3.

    ``plane`` and ``helicoid`` live on rectangles, ``enneper`` on the unit
    disc and ``catenoid`` on the annulus ``e^-1 < |z| < e`` with
    ``theta = dz/z``.  The surface is mapped by ``x -> scale R x + offset``.
    """
    h_fn, f_fn = _surface_data(name)
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
        raise InvalidParams("rotation must be an orthogonal 3x3 matrix")
    off = np.zeros(3) if offset is None else np.asarray(offset, dtype=float)
    if off.shape != (3,):
        raise DimMismatch("offset must be a 3-vector")
    d = _default_domain(name, grid) if domain is None else domain
    theta = "dz/z" if d.chart == "log" else "dz"

    def h_map(W):
        return scale * h_fn(W) @ R.T

    def f_map(W):
        return scale * f_fn(W) @ R.T + off
    return sample_from_h(d, h_map, theta, f_map, name)


# ---------------------------------------------------------------------------
# Containment

@dataclass
class ContainmentReport:
    fraction: float
    min_clearance: float
    violations: list
    nodes: int
    boundary_only: bool

    def to_json(self):
        return {"fraction": self.fraction, "min_clearance": self.min_clearance,
                "violations": [list(map(int, v)) for v in self.violations[:100]],
                "violation_count": len(self.violations), "nodes": self.nodes,
                "boundary_only": self.boundary_only}


def contained_in(sample: WeierstrassSample, domain, boundary_only=False):
    """Fraction of grid nodes mapped into ``domain`` and their least clearance."""
    if sample.f is None:
        raise InvalidParams("sample has no f values")
    if domain.dim != sample.f.shape[-1]:
        raise DimMismatch(f"surface in R^{sample.f.shape[-1]} vs domain in R^{domain.dim}")
    sel = sample.domain.boundary_ring() if boundary_only else sample.domain.mask
    idx = np.argwhere(sel)
    pts = sample.f[sel]
    inside = np.asarray(domain.contains(pts), dtype=bool)
    clear = np.asarray(domain.clearance(pts), dtype=float)
    bad = idx[~inside].tolist()
    return ContainmentReport(float(inside.mean()), float(clear.min()), bad,
                             int(len(pts)), boundary_only)


# ---------------------------------------------------------------------------
# Arc extension

def _segment_certified(domain, a, b, samples=512):
    """Sample the segment; a clearance above half the spacing covers the gaps."""
    t = np.linspace(0.0, 1.0, samples)
    pts = a + t[:, None] * (b - a)
    spacing = np.linalg.norm(b - a) / (samples - 1)
    if not np.all(domain.contains(pts)):
        return -math.inf
    c = np.asarray(domain.clearance(pts), dtype=float)
    return float(c.min()) if np.all(c > 0.5 * spacing) else -math.inf


def _polyline_ok(domain, pts):
    return min(_segment_certified(domain, a, b) for a, b in zip(pts[:-1], pts[1:]))


def find_polyline(domain, p, q, seed=42, budget=2000, max_waypoints=3):
    """Polyline from ``p`` to ``q`` inside ``domain``.

    Tries the straight segment, then random detours through one to
    ``max_waypoints`` waypoints around the midpoint at growing radii.
    Among the candidates at the first radius that works, the one with the
    largest clearance wins.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if _polyline_ok(domain, [p, q]) > 0:
        return np.stack([p, q])
    rng = np.random.default_rng(seed)
    span = max(float(np.linalg.norm(q - p)), 1e-3)
    mid = 0.5 * (p + q)
    tries = 0
    for k in range(1, max_waypoints + 1):
        for scale in span * np.geomspace(0.25, 8.0, 12):
            best, best_c = None, 0.0
            for _ in range(16):
                tries += 1
                if tries > budget:
                    raise NoPathFound("sampling budget exhausted")
                dirs = rng.normal(size=(k, len(p)))
                dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
                frac = (np.arange(1, k + 1) / (k + 1))[:, None]
                way = p + frac * (q - p) + scale * dirs if k > 1 else mid + scale * dirs
                pts = np.vstack([p, way, q])
                c = _polyline_ok(domain, pts)
                if c > best_c:
                    best, best_c = pts, c
            if best is not None:
                return best
    raise NoPathFound("no polyline found")


@dataclass
class ArcExtension:
    t: np.ndarray
    f: np.ndarray
    h: np.ndarray
    breakpoints: np.ndarray
    h_segments: np.ndarray
    polyline: np.ndarray
    endpoint_error: float
    consistency: float
    fd_error: float
    min_clearance: float
    inside: bool
    smooth: bool = False

    def to_json(self):
        return {"segments": int(len(self.h_segments)),
                "breakpoints": self.breakpoints.tolist(),
                "polyline": self.polyline.tolist(),
                "h_segments": [[[c.real, c.imag] for c in hs] for hs in self.h_segments],
                "endpoint_error": self.endpoint_error,
                "consistency": self.consistency, "fd_error": self.fd_error,
                "min_clearance": self.min_clearance, "inside": self.inside,
                "samples": int(len(self.t)), "smooth": self.smooth,
                "null_residual": float(np.max(null_residual(self.h_segments)))}


def _subdivide(poly, segments):
    """Split polyline legs until there are at least ``segments`` pieces."""
    pts = [poly[0]]
    lengths = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    extra = max(segments - (len(poly) - 1), 0)
    share = np.floor(extra * lengths / lengths.sum()).astype(int)
    share[np.argmax(lengths)] += extra - share.sum()
    for a, b, s in zip(poly[:-1], poly[1:], share):
        for t in np.arange(1, s + 1) / (s + 1):
            pts.append(a + t * (b - a))
        pts.append(b)
    return np.array(pts)


def extend_arc(p_val, q_val, domain, segments=1, seed=42, samples=ARC_SAMPLES):
    """Piecewise-constant null data ``h`` on ``[0, 1]`` joining two points.

    With ``theta = dt`` the path is ``f(t) = p + Re int_0^t h``; on each
    segment ``h = real_to_null(Delta / Delta t)`` so ``f`` follows a
    polyline in ``domain``.  ``h`` jumps at the breakpoints.
    """
    p = np.asarray(p_val, dtype=float)
    q = np.asarray(q_val, dtype=float)
    if p.shape != (domain.dim,) or q.shape != (domain.dim,):
        raise DimMismatch("endpoints do not match the domain dimension")
    for name, x in (("start", p), ("end", q)):
        if not domain.contains(x):
            raise EndpointOutsideDomain(f"{name} point {x.tolist()} is outside the domain")
    poly = _subdivide(find_polyline(domain, p, q, seed), segments)
    legs = np.diff(poly, axis=0)
    lengths = np.linalg.norm(legs, axis=1)
    if np.any(lengths == 0):
        keep = np.concatenate([[True], lengths > 0])
        poly = poly[keep]
        legs = np.diff(poly, axis=0)
        lengths = lengths[lengths > 0]
    dt = lengths / lengths.sum()
    brk = np.concatenate([[0.0], np.cumsum(dt)])
    brk[-1] = 1.0
    H = np.array([real_to_null(leg / s) for leg, s in zip(legs, dt)])
    t = np.union1d(np.linspace(0.0, 1.0, samples), brk)
    seg = np.clip(np.searchsorted(brk, t, side="right") - 1, 0, len(H) - 1)
    f = poly[seg] + H[seg].real * (t - brk[seg])[:, None]
    # trapezoid of the segment-wise constant integrand reproduces f
    trap = p + np.concatenate([np.zeros((1, len(p))),
                               np.cumsum(H[seg[:-1]].real * np.diff(t)[:, None], axis=0)])
    consistency = float(np.max(np.abs(trap - f)))
    mids = 0.5 * (brk[:-1] + brk[1:])
    fp = poly[:-1] + H.real * (mids + ARC_FD_STEP - brk[:-1])[:, None]
    fm = poly[:-1] + H.real * (mids - ARC_FD_STEP - brk[:-1])[:, None]
    fd = float(np.max(np.abs((fp - fm) / (2 * ARC_FD_STEP) - H.real)))
    inside = bool(np.all(domain.contains(f)))
    clear = float(np.min(domain.clearance(f)))
    err = float(max(np.max(np.abs(f[0] - p)), np.max(np.abs(f[-1] - q))))
    return ArcExtension(t, f, H[seg], brk, H, poly, err, consistency, fd, clear, inside)


# ---------------------------------------------------------------------------
# Export

def mesh_triangles(domain: ParamDomain):
    """Triangles (vertex indices into the flattened grid) over masked cells."""
    nu, nv = domain.n_u, domain.n_v
    m = domain.mask
    idx = np.arange(nu * nv).reshape(nu, nv)
    cols = nv if domain.periodic_v else nv - 1
    tris = []
    for i in range(nu - 1):
        for j in range(cols):
            jn = (j + 1) % nv
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, jn], idx[i, jn]
            if m[i, j] and m[i + 1, j] and m[i + 1, jn] and m[i, jn]:
                tris.append((a, b, c))
                tris.append((a, c, d))
    return np.array(tris, dtype=int).reshape(-1, 3)


def to_obj(sample: WeierstrassSample) -> str:
    if sample.f is None or sample.f.shape[-1] != 3:
        raise DimMismatch("OBJ export needs a surface in R^3")
    lines = [f"v {x:.12g} {y:.12g} {z:.12g}" for x, y, z in sample.f.reshape(-1, 3)]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh_triangles(sample.domain)]
    return "\n".join(lines) + "\n"


def to_csv(sample: WeierstrassSample) -> str:
    if sample.f is None:
        raise InvalidParams("sample has no f values")
    d = sample.domain
    n = sample.f.shape[-1]
    rows = ["u,v," + ",".join(f"x{i + 1}" for i in range(n))]
    W = d.w
    for (i, j) in np.argwhere(d.mask):
        vals = [W[i, j].real, W[i, j].imag, *sample.f[i, j]]
        rows.append(",".join(f"{x:.12g}" for x in vals))
    return "\n".join(rows) + "\n"

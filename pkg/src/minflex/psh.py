"""p-plurisubharmonic functions, p-convexity certificates and contact order.

A C^2 function ``tau`` on R^n is p-plurisubharmonic when the sum of the
``p`` smallest eigenvalues of its Hessian is nonnegative everywhere, and
strongly so when the sum is positive.  All checks here are grid based:
they verify the eigenvalue condition at finitely many points and record
the resolution and tolerances they used.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp
from scipy.spatial import cKDTree

from .errors import (EmptyZeroSet, InsideBody, InvalidParams, NonFiniteHessian,
                     NotTouching, ParseError)
from .kernels import thread_count

PSH_TOL = 1e-8
SMOOTH_WIDTH = 1e-3
FD_STEP = 1e-4
TOUCH_TOL = 1e-9
STRONG_CLEARANCE = 0.05
CONTACT_RADII = (1e-3, 1e-1)
CONTACT_NRADII = 24
CONTACT_NANGLES = 64
CHUNK = 4096


# ---------------------------------------------------------------------------
# Smoothing helpers (numeric and symbolic)

def smooth_pos(u, width=SMOOTH_WIDTH):
    """C^3 replacement for ``max(u, 0)``.

    Equal to ``max(u, 0)`` outside ``|u| < width``.  Inside, the derivative
    is the quintic smoothstep ``6t^5 - 15t^4 + 10t^3`` of
    ``t = (u + width) / (2 width)``.
    """
    u = np.asarray(u, dtype=float)
    t = np.clip((u + width) / (2 * width), 0.0, 1.0)
    mid = 2 * width * t ** 4 * (t * t - 3 * t + 2.5)
    return np.where(u <= -width, 0.0, np.where(u >= width, u, mid))


def _sym_pos(u, width=SMOOTH_WIDTH):
    t = (u + width) / (2 * width)
    mid = 2 * width * t ** 4 * (t ** 2 - 3 * t + sp.Rational(5, 2))
    return sp.Piecewise((0, u <= -width), (u, u >= width), (mid, True))


def _sym_smax(a, b, width=SMOOTH_WIDTH):
    return b + _sym_pos(a - b, width)


# ---------------------------------------------------------------------------
# Scalar fields

_ALLOWED_NAMES = {"abs", "Abs", "max", "Max", "min", "Min", "smax", "pos",
                  "sqrt", "norm", "exp", "log", "pi"}
_TOKEN = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_CHARS = re.compile(r"^[0-9A-Za-z_.+\-*/(), ]*$")


def _parse_expression(text, dim):
    if not isinstance(text, str) or not _CHARS.match(text):
        raise ParseError(f"illegal characters in expression {text!r}")
    xs = sp.symbols(f"x1:{dim + 1}", real=True)
    names = {f"x{i + 1}": s for i, s in enumerate(xs)}
    for tok in _TOKEN.findall(text):
        if tok not in names and tok not in _ALLOWED_NAMES:
            raise ParseError(f"unknown name {tok!r} in expression")
    local = dict(names)
    local.update({
        "abs": sp.Abs, "Abs": sp.Abs, "max": sp.Max, "Max": sp.Max,
        "min": sp.Min, "Min": sp.Min, "sqrt": sp.sqrt, "exp": sp.exp,
        "log": sp.log, "pi": sp.pi,
        "pos": lambda u, w=SMOOTH_WIDTH: _sym_pos(u, w),
        "smax": lambda a, b, w=SMOOTH_WIDTH: _sym_smax(a, b, w),
        "norm": lambda *args: sp.sqrt(sum(s ** 2 for s in (args or xs))),
    })
    try:
        expr = sp.sympify(text, locals=local)
    except (sp.SympifyError, TypeError, SyntaxError) as exc:
        raise ParseError(f"cannot parse expression {text!r}: {exc}") from exc
    extra = expr.free_symbols - set(xs)
    if extra:
        raise ParseError(f"free symbols {sorted(map(str, extra))} in expression")
    return expr, xs


def _lambdify(expr, xs):
    fn = sp.lambdify(xs, expr, modules="numpy")

    def call(pts):
        out = fn(*(pts[:, i] for i in range(pts.shape[1])))
        return np.broadcast_to(np.asarray(out, dtype=float), (len(pts),))
    return call


def _lambdify_many(exprs, xs):
    """One vectorized evaluator for a list of expressions, sharing subterms."""
    fn = sp.lambdify(xs, list(exprs), modules="numpy", cse=True)

    def call(pts):
        out = fn(*(pts[:, i] for i in range(pts.shape[1])))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (len(pts),)) for v in out], -1)
    return call


def _symmetric(upper_fn, dim):
    """Expand an evaluator of the upper-triangular entries to full matrices."""
    iu = np.triu_indices(dim)

    def call(pts):
        vals = upper_fn(pts)
        H = np.empty((len(pts), dim, dim))
        H[:, iu[0], iu[1]] = vals
        H[:, iu[1], iu[0]] = vals
        return H
    return call


def _box_array(box, dim):
    B = np.asarray(box, dtype=float)
    if B.shape != (dim, 2) or np.any(B[:, 1] <= B[:, 0]):
        raise InvalidParams("box must be a list of [lo, hi] pairs with lo < hi")
    return B


@dataclass
class ScalarField:
    """Real function ``tau`` on R^n with an evaluation box.

    Build from a string with :meth:`from_expression` (polynomials, ``abs``,
    ``max``/``min``, ``sqrt``, ``norm()``, smoothed ``pos(u)`` and
    ``smax(a, b)``) or pass a vectorized callable directly.  Callables take
    points of shape ``(N, n)`` and return ``(N,)``.
    """

    func: Callable
    dim: int
    box: np.ndarray
    hessian_fn: Optional[Callable] = None
    gradient_fn: Optional[Callable] = None
    expression: Optional[str] = None

    def __post_init__(self):
        self.box = _box_array(self.box, self.dim)

    @classmethod
    def from_expression(cls, text, dim, box=None, analytic=True):
        expr, xs = _parse_expression(text, dim)
        if box is None:
            box = [[-1.0, 1.0]] * dim
        grad_fn = hess_fn = None
        if analytic:
            grad = [sp.diff(expr, s) for s in xs]
            iu = np.triu_indices(dim)
            upper = [sp.diff(grad[i], xs[j]) for i, j in zip(*iu)]
            if not any(e.has(sp.DiracDelta) for e in upper):
                hess_fn = _symmetric(_lambdify_many(upper, xs), dim)
                grad_fn = _lambdify_many(grad, xs)
        return cls(_lambdify(expr, xs), dim, box, hess_fn, grad_fn, text)

    @classmethod
    def from_json(cls, data):
        try:
            dim = int(data["dim"])
            text = data["expr"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"scalar field needs 'expr' and 'dim': {exc}") from exc
        return cls.from_expression(text, dim, data.get("box"),
                                   analytic=data.get("analytic", True))

    def to_json(self):
        return {"expr": self.expression, "dim": self.dim, "box": self.box.tolist()}

    @property
    def scale(self):
        return float(np.max(self.box[:, 1] - self.box[:, 0])) / 2.0

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        flat = pts.reshape(-1, self.dim)
        out = np.asarray(self.func(flat), dtype=float).reshape(pts.shape[:-1])
        return out if pts.ndim > 1 else float(out)

    def fd_hessian(self, pts, step=None):
        """Central-difference Hessian with step ``1e-4 * scale``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        h = FD_STEP * self.scale if step is None else step
        n = self.dim
        f0 = self.func(pts)
        H = np.empty((len(pts), n, n))
        E = np.eye(n) * h
        for i in range(n):
            fp, fm = self.func(pts + E[i]), self.func(pts - E[i])
            H[:, i, i] = (fp - 2 * f0 + fm) / h ** 2
            for j in range(i + 1, n):
                v = (self.func(pts + E[i] + E[j]) - self.func(pts + E[i] - E[j])
                     - self.func(pts - E[i] + E[j]) + self.func(pts - E[i] - E[j]))
                H[:, i, j] = H[:, j, i] = v / (4 * h ** 2)
        return H

    def hessian(self, pts):
        """Analytic Hessian where available and finite, FD elsewhere."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.hessian_fn is None:
            H = self.fd_hessian(pts)
        else:
            with np.errstate(all="ignore"):
                H = np.asarray(self.hessian_fn(pts), dtype=float)
            bad = ~np.all(np.isfinite(H), axis=(1, 2))
            if np.any(bad):
                H[bad] = self.fd_hessian(pts[bad])
        H = 0.5 * (H + np.swapaxes(H, 1, 2))
        if not np.all(np.isfinite(H)):
            raise NonFiniteHessian("Hessian is not finite at some evaluation point")
        return H


def _chunked(fn, pts):
    """Apply ``fn`` to row chunks, in parallel when MINFLEX_THREADS > 1."""
    chunks = [pts[i:i + CHUNK] for i in range(0, len(pts), CHUNK)] or [pts]
    workers = min(thread_count(), len(chunks))
    if workers <= 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)


def _partial_sums(tau, pts):
    return _chunked(lambda c: np.cumsum(np.linalg.eigvalsh(tau.hessian(c)), axis=1), pts)


def hessian_partial_sum(tau: ScalarField, x, p: int) -> float:
    """Sum of the ``p`` smallest eigenvalues of the Hessian of ``tau`` at ``x``."""
    if not 1 <= p <= tau.dim:
        raise InvalidParams(f"p must lie in [1, {tau.dim}]")
    x = np.asarray(x, dtype=float)
    if x.shape != (tau.dim,):
        raise InvalidParams("point has the wrong dimension")
    if np.any(x < tau.box[:, 0]) or np.any(x > tau.box[:, 1]):
        raise InvalidParams("point lies outside the evaluation box")
    return float(np.linalg.eigvalsh(tau.hessian(x[None])[0])[:p].sum())


def grid_points(box, grid):
    axes = [np.linspace(lo, hi, grid) for lo, hi in np.asarray(box)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def gate_ok(p, n):
    """The dimension bound ``1 <= p <= max(2, n - 2)``."""
    return 1 <= p <= max(2, n - 2)


@dataclass
class PshReport:
    p: int
    dim: int
    grid: int
    points: int
    tol: float
    min_partial_sum: float
    argmin: np.ndarray
    is_psh: bool
    strongly: bool
    gate_ok: bool
    minima_by_q: list = field(default_factory=list)
    monotone_ok: bool = True
    strong_on_complement: Optional[bool] = None

    def to_json(self):
        return {"p": self.p, "dim": self.dim, "grid": self.grid,
                "points": self.points, "tol": self.tol,
                "min_partial_sum": self.min_partial_sum,
                "argmin": [float(v) for v in self.argmin],
                "is_psh": self.is_psh, "strongly": self.strongly,
                "gate_ok": self.gate_ok,
                "minima_by_q": [float(v) for v in self.minima_by_q],
                "monotone_ok": self.monotone_ok,
                "strong_on_complement": self.strong_on_complement}


def _report_from_sums(S, pts, p, n, grid, tol):
    minima = S.min(axis=0)
    i = int(np.argmin(S[:, p - 1]))
    # p-psh forces lambda_p >= 0, hence every larger partial sum is >= 0 too.
    monotone = all(minima[q] >= -tol for q in range(p, n)) if minima[p - 1] >= -tol else True
    return PshReport(p=p, dim=n, grid=grid, points=len(pts), tol=tol,
                     min_partial_sum=float(minima[p - 1]), argmin=pts[i].copy(),
                     is_psh=bool(minima[p - 1] >= -tol),
                     strongly=bool(minima[p - 1] > tol), gate_ok=gate_ok(p, n),
                     minima_by_q=minima.tolist(), monotone_ok=bool(monotone))


def is_p_psh(tau: ScalarField, p: int, grid: int = 16, tol: float = PSH_TOL) -> PshReport:
    """Check the eigenvalue-sum condition on a uniform grid over ``tau.box``."""
    n = tau.dim
    if not 1 <= p <= n:
        raise InvalidParams(f"p must lie in [1, {n}]")
    if grid < 8:
        raise InvalidParams("grid needs at least 8 points per axis")
    pts = grid_points(tau.box, grid)
    S = _partial_sums(tau, pts)
    report = _report_from_sums(S, pts, p, n, grid, tol)
    if not report.monotone_ok:
        raise AssertionError("p-psh without q-psh for some q > p")
    return report


@dataclass
class PConvexCertificate:
    p: int
    dim: int
    grid: int
    certified: bool
    gate_ok: bool
    gate_violated: bool
    zero_set_sample: np.ndarray
    nonnegative: bool
    report: PshReport
    strong_on_complement: bool
    complement_samples: int
    min_strong_sum: float

    def to_json(self):
        return {"p": self.p, "dim": self.dim, "grid": self.grid,
                "certified": self.certified, "gate_ok": self.gate_ok,
                "gate_violated": self.gate_violated,
                "zero_set_size": int(len(self.zero_set_sample)),
                "zero_set_sample": self.zero_set_sample[:16].tolist(),
                "nonnegative": self.nonnegative,
                "strong_on_complement": self.strong_on_complement,
                "complement_samples": self.complement_samples,
                "min_strong_sum": self.min_strong_sum,
                "psh": self.report.to_json()}


def certify_p_convex(tau: ScalarField, p: int, grid: int = 16,
                     tol: float = PSH_TOL) -> PConvexCertificate:
    """Grid certificate that ``L = tau^{-1}(0)`` is p-convex.

    Requires ``tau >= 0`` and p-psh on the grid, and strongly p-psh at the
    grid points whose distance to the sampled zero set exceeds 5% of the
    box diameter.  A ``p`` above ``max(2, n - 2)`` is flagged through
    ``gate_violated`` rather than raised.
    """
    n = tau.dim
    if not 1 <= p <= n:
        raise InvalidParams(f"p must lie in [1, {n}]")
    if grid < 8:
        raise InvalidParams("grid needs at least 8 points per axis")
    pts = grid_points(tau.box, grid)
    vals = tau(pts)
    zero = np.abs(vals) < TOUCH_TOL
    if not np.any(zero):
        raise EmptyZeroSet("tau has no zeros on the evaluation grid")
    S = _partial_sums(tau, pts)
    report = _report_from_sums(S, pts, p, n, grid, tol)
    diam = float(np.linalg.norm(tau.box[:, 1] - tau.box[:, 0]))
    dist, _ = cKDTree(pts[zero]).query(pts)
    far = dist > STRONG_CLEARANCE * diam
    far_sums = S[far, p - 1]
    strong = bool(np.all(far_sums > tol))
    report.strong_on_complement = strong
    nonneg = bool(np.all(vals >= -tol))
    ok = gate_ok(p, n)
    return PConvexCertificate(
        p=p, dim=n, grid=grid, certified=nonneg and report.is_psh and strong,
        gate_ok=ok, gate_violated=not ok, zero_set_sample=pts[zero],
        nonnegative=nonneg, report=report, strong_on_complement=strong,
        complement_samples=int(far.sum()),
        min_strong_sum=float(far_sums.min()) if far_sums.size else math.inf)


# ---------------------------------------------------------------------------
# Contact order

@dataclass
class ContactOrder:
    k: int
    c: float
    slope: float
    residual: float
    radii: np.ndarray
    minima: np.ndarray

    def to_json(self):
        return {"k": self.k, "c": self.c, "slope": self.slope,
                "residual": self.residual}


def estimate_contact_order(f, tau, center=0j, radii=None,
                           n_radii=CONTACT_NRADII, n_angles=CONTACT_NANGLES):
    """Fit ``min_{|z - center| = r} tau(f(z)) ~ c r^k`` on a log-log grid.

    ``f`` maps an array of complex parameters to points of shape
    ``(..., n)``; ``tau`` maps points to values.  The slope of the
    least-squares line through ``(log r, log m(r))`` is rounded to ``k`` and
    ``c = exp(intercept)``; ``residual`` is the largest absolute deviation
    of the fit in log space.
    """
    center = complex(center)
    t0 = float(np.asarray(tau(np.asarray(f(np.array([center])))))[0])
    if t0 <= -TOUCH_TOL:
        raise InsideBody(f"tau(f(center)) = {t0:.3e} < 0")
    if t0 >= TOUCH_TOL:
        raise NotTouching(f"tau(f(center)) = {t0:.3e} is not zero")
    lo, hi = CONTACT_RADII if radii is None else radii
    r = np.geomspace(lo, hi, n_radii)
    ang = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False)
    z = center + r[:, None] * np.exp(1j * ang)[None, :]
    vals = np.asarray(tau(np.asarray(f(z.ravel())))).reshape(z.shape)
    if np.any(vals < 0):
        raise InsideBody("the disc enters the body near the touching point")
    m = vals.min(axis=1)
    if np.any(m <= 0):
        raise NotTouching("tau o f vanishes on a whole circle (degenerate contact)")
    lr, lm = np.log(r), np.log(m)
    slope, icpt = np.polyfit(lr, lm, 1)
    resid = float(np.max(np.abs(lm - (slope * lr + icpt))))
    return ContactOrder(k=int(round(slope)), c=float(math.exp(icpt)),
                        slope=float(slope), residual=resid, radii=r, minima=m)

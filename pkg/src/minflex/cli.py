"""Command-line front end.

Exit codes: 0 for a positive outcome (Flexible, p-psh or certified,
contained, arc inside), 2 for a negative or undecided one (NotFlexible,
Unknown, violation), 1 for errors.  Reports are written as sorted,
timestamp-free JSON so identical inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import flexcheck, psh, weierstrass
from .convexgeo import ConvexBody
from .domains import ConvexComplement, domain_from_json
from .errors import MinflexError, ParseError
from .schema import (BODY_SCHEMA, DOMAIN_SCHEMA, REPORT_SCHEMA, TAU_SCHEMA,
                     load_json, validate)

COMMANDS = ("classify", "check-psh", "verify-surface", "witness", "extend-arc", "catalogue")
EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


@dataclass
class RunConfig:
    """All numeric defaults of the command-line runs."""

    command: str
    domain: str = None
    body: str = None
    tau: str = None
    surface: str = None
    complex: bool = False
    p: int = 1
    grid: int = None
    radii: tuple = flexcheck.DEFAULT_RADII
    seed: int = 42
    out: str = None
    format: str = "json"
    offset: tuple = None
    scale: float = 1.0
    start: tuple = None
    end: tuple = None
    segments: int = 1
    certify: bool = False
    null_tol: float = 1e-6
    harmonic_tol: float = 1e-6
    period_tol: float = 1e-8
    dist_tol: float = 1e-9
    surface_grid: int = 64
    psh_grid: int = 16

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ParseError(f"unknown command {self.command!r}")
        for name in ("null_tol", "harmonic_tol", "period_tol", "dist_tol"):
            if not getattr(self, name) > 0:
                raise ParseError(f"{name} must be positive")
        if self.format not in ("json", "csv", "obj"):
            raise ParseError(f"unknown format {self.format!r}")

    def to_json(self):
        out = {k: v for k, v in asdict(self).items() if v is not None}
        out["radii"] = list(self.radii)
        for k in ("offset", "start", "end"):
            if k in out:
                out[k] = list(out[k])
        return out


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _vector(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_domain(cfg):
    if cfg.domain is None and cfg.body is None:
        raise ParseError("need --domain or --body")
    if cfg.body is not None:
        return ConvexComplement(ConvexBody.from_json(load_json(cfg.body, BODY_SCHEMA, "body")))
    return domain_from_json(load_json(cfg.domain, DOMAIN_SCHEMA, "domain"))


# -- commands ---------------------------------------------------------------

def _classify_result(cfg):
    if cfg.complex:
        if cfg.body is None:
            raise ParseError("--complex needs --body")
        body = ConvexBody.from_json(load_json(cfg.body, BODY_SCHEMA, "body"))
        return flexcheck.classify_complex_complement(body, cfg.radii)
    return flexcheck.classify_domain(_load_domain(cfg), cfg.radii)


def cmd_classify(cfg):
    res = _classify_result(cfg)
    code = EXIT_OK if res.verdict is flexcheck.Verdict.FLEXIBLE else EXIT_NEGATIVE
    return code, res.verdict.value, res.to_json(), {}


def cmd_witness(cfg):
    res = _classify_result(cfg)
    out = {"verdict": res.verdict.value,
           "reason": res.reason.value if res.reason else None}
    w = res.witness
    if w is None:
        return EXIT_NEGATIVE, "no-witness", out, {}
    domain = ConvexComplement(ConvexBody.from_json(load_json(cfg.body, BODY_SCHEMA, "body"))) \
        if cfg.body is not None else _load_domain(cfg)
    half = w.delta / 2 if math.isfinite(w.delta) else 1.0
    tube_ok = flexcheck.verify_tube_condition(domain, w.plane, half)
    growth_ok = bool(w.growth) if w.complex_line else \
        flexcheck.verify_growth_condition(domain, w.plane, cfg.radii)
    out.update({"witness": w.to_json(), "tube_ok": tube_ok, "growth_ok": growth_ok,
                "checked_delta": half})
    ok = tube_ok and growth_ok
    return (EXIT_OK if ok else EXIT_NEGATIVE), ("certified" if ok else "violation"), out, {}


def cmd_check_psh(cfg):
    tau = psh.ScalarField.from_json(load_json(cfg.tau, TAU_SCHEMA, "tau"))
    grid = cfg.grid or cfg.psh_grid
    rep = psh.is_p_psh(tau, cfg.p, grid)
    out = {"psh": rep.to_json(), "tau": tau.to_json()}
    ok = rep.is_psh
    if cfg.certify:
        cert = psh.certify_p_convex(tau, cfg.p, grid)
        out["certificate"] = cert.to_json()
        ok = cert.certified
    status = ("certified" if cfg.certify else "p-psh") if ok else "violation"
    return (EXIT_OK if ok else EXIT_NEGATIVE), status, out, {}


def _surface_report(sample, cfg):
    res = weierstrass.conformality_residuals(sample)
    periods = weierstrass.period_integrals(sample)
    rep = {"surface": sample.name, "sample": sample.to_json(), "residuals": res.to_json(),
           "periods": [p.tolist() for p in periods],
           "branched": res.branched}
    ok = (res.max_null <= cfg.null_tol and res.max_harmonic <= cfg.harmonic_tol
          and all(np.max(np.abs(p)) <= cfg.period_tol for p in periods))
    return rep, ok


def _meshes(sample, cfg, prefix):
    if cfg.format == "obj":
        return {f"{prefix}.obj": weierstrass.to_obj(sample)}
    if cfg.format == "csv":
        return {f"{prefix}.csv": weierstrass.to_csv(sample)}
    return {}


def cmd_verify_surface(cfg):
    if cfg.surface is None:
        raise ParseError("verify-surface needs --surface")
    sample = weierstrass.surface_catalogue(cfg.surface, scale=cfg.scale, offset=cfg.offset,
                                           grid=cfg.grid or cfg.surface_grid)
    rep, ok = _surface_report(sample, cfg)
    if cfg.domain is not None or cfg.body is not None:
        domain = _load_domain(cfg)
        full = weierstrass.contained_in(sample, domain)
        ring = weierstrass.contained_in(sample, domain, boundary_only=True)
        rep["containment"] = full.to_json()
        rep["boundary_containment"] = ring.to_json()
        ok = ok and full.fraction == 1.0 and full.min_clearance > cfg.dist_tol
    status = "contained" if ok else "violation"
    return (EXIT_OK if ok else EXIT_NEGATIVE), status, rep, _meshes(sample, cfg, cfg.surface)


def cmd_catalogue(cfg):
    names = weierstrass.SURFACES if cfg.surface in (None, "all") else (cfg.surface,)
    out, files, ok = {}, {}, True
    for name in names:
        sample = weierstrass.surface_catalogue(name, scale=cfg.scale, offset=cfg.offset,
                                               grid=cfg.grid or cfg.surface_grid)
        rep, good = _surface_report(sample, cfg)
        bare = weierstrass.WeierstrassSample(sample.domain, sample.h, None, sample.theta,
                                             sample.h_fn, sample.base, name)
        rebuilt = weierstrass.integrate(bare, f0=sample.f[sample.base], seed=cfg.seed)
        h_fd, _, _ = weierstrass.derivative_h(rebuilt)
        inner = sample.domain.interior()
        rep["round_trip_h_error"] = float(np.max(np.abs(h_fd - sample.h)[inner]))
        rep["round_trip_f_error"] = float(np.max(np.abs(rebuilt.f - sample.f)[sample.domain.mask]))
        out[name] = rep
        files.update(_meshes(sample, cfg, name))
        ok = ok and good
    return (EXIT_OK if ok else EXIT_NEGATIVE), ("verified" if ok else "violation"), out, files


def cmd_extend_arc(cfg):
    domain = _load_domain(cfg)
    if cfg.start is None or cfg.end is None:
        raise ParseError("extend-arc needs --from and --to")
    arc = weierstrass.extend_arc(cfg.start, cfg.end, domain, cfg.segments, seed=cfg.seed)
    ok = arc.inside and arc.endpoint_error <= 1e-12
    files = {}
    if cfg.format == "csv":
        rows = ["t," + ",".join(f"x{i + 1}" for i in range(domain.dim))]
        rows += [",".join(f"{v:.12g}" for v in (t, *x)) for t, x in zip(arc.t, arc.f)]
        files["arc.csv"] = "\n".join(rows) + "\n"
    return (EXIT_OK if ok else EXIT_NEGATIVE), ("inside" if ok else "violation"), arc.to_json(), files


HANDLERS = {"classify": cmd_classify, "witness": cmd_witness, "check-psh": cmd_check_psh,
            "verify-surface": cmd_verify_surface, "catalogue": cmd_catalogue,
            "extend-arc": cmd_extend_arc}


def dumps(report):
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run(cfg: RunConfig):
    """Execute one command; returns ``(exit_code, report, files)``."""
    try:
        code, status, result, files = HANDLERS[cfg.command](cfg)
        error = None
    except MinflexError as exc:
        code, status, result, files = EXIT_ERROR, "error", None, {}
        error = {"type": type(exc).__name__, "message": str(exc)}
    report = _clean({"command": cfg.command, "status": status, "exit_code": code,
                     "config": cfg.to_json(), "result": result, "error": error})
    validate(report, REPORT_SCHEMA, "report")
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps(report))
        for name, text in files.items():
            with open(os.path.join(cfg.out, name), "w", encoding="utf-8") as fh:
                fh.write(text)
    return code, report, files


def build_parser():
    ap = argparse.ArgumentParser(prog="minflex", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--domain", help="domain descriptor: JSON file or inline JSON")
        sp.add_argument("--body", help="convex body descriptor: JSON file or inline JSON")
        sp.add_argument("--complex", action="store_true",
                        help="classify for holomorphic curves (body in R^(2n))")
        sp.add_argument("--tau", help="scalar field descriptor (expr, dim, box)")
        sp.add_argument("--surface", help="plane | enneper | catenoid | helicoid | all")
        sp.add_argument("--p", type=int, default=1)
        sp.add_argument("--grid", type=int)
        sp.add_argument("--radii", type=_vector, default=flexcheck.DEFAULT_RADII)
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--out", help="output directory for report.json and meshes")
        sp.add_argument("--format", choices=("json", "csv", "obj"), default="json")
        sp.add_argument("--offset", type=_vector)
        sp.add_argument("--scale", type=float, default=1.0)
        sp.add_argument("--from", dest="start", type=_vector)
        sp.add_argument("--to", dest="end", type=_vector)
        sp.add_argument("--segments", type=int, default=1)
        sp.add_argument("--certify", action="store_true",
                        help="check-psh: also certify p-convexity of the zero set")
        sp.add_argument("--null-tol", type=float, default=1e-6)
        sp.add_argument("--harmonic-tol", type=float, default=1e-6)
        sp.add_argument("--period-tol", type=float, default=1e-8)
        sp.add_argument("--dist-tol", type=float, default=1e-9)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(**vars(args))
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    code, report, _ = run(cfg)
    sys.stdout.write(dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())

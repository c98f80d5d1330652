"""Command-line front end.

Exit codes: 0 success, 1 computation error (or a failed ``reproduce``),
2 configuration error. Errors are written to stderr as a JSON block.
"""
from __future__ import annotations

import argparse
import sys
import numpy as np

from . import acceptance
from . import algebra as al
from . import config as cfgmod
from . import dynamics as dyn
from . import evolution_operator as eo
from . import numerics as nm
from .errors import MosquitoEvoError, Overflow, ParseError, ValidationError
from .report import dumps, envelope, vector

COMMANDS = ("simulate", "ode", "fixed-points", "classify", "idempotents", "algebra",
            "operator", "reproduce")
CSV_COMMANDS = ("simulate", "ode")


class ConfigError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mosquito-evo", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="run configuration file (default: built-in baseline)")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--steps", type=int, help="map iterations, or RK4 steps for ode")
    ap.add_argument("--epsilon", help="zero, lstar or a number")
    ap.add_argument("--tol", type=float, help="fixed-point residual tolerance")
    ap.add_argument("--seed", type=int, help="seed for multistart searches")
    ap.add_argument("--clamp", action="store_true", help="clamp orbits to the nonnegative cone")
    return ap


def load_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.parse_config(args.config) if args.config else cfgmod.baseline_config()
    if args.steps is not None:
        cfg.steps = args.steps
    if args.epsilon is not None:
        cfg.epsilon = args.epsilon
    if args.tol is not None:
        cfg.tol = args.tol
    if args.seed is not None:
        cfg.seed = args.seed
    if args.clamp:
        cfg.clamp = True
    if args.out is not None:
        cfg.out = args.out
    cfgmod.validate(cfg)
    return cfg


def resolve_epsilon(cfg: cfgmod.RunConfig, params: dyn.ParameterSet) -> tuple[float, str]:
    eps = cfgmod.parse_epsilon(cfg.epsilon)
    if eps == "zero":
        return 0.0, "zero"
    if eps == "lstar":
        return al.interior_epsilon(params), "lstar (L of the residual-verified interior fixed point)"
    return float(eps), "explicit"


# ---------------------------------------------------------------------------
# analyses; each returns (results, warnings)
# ---------------------------------------------------------------------------


def spectrum_block(rep: nm.SpectrumReport) -> dict:
    return {
        "eigenvalues": [complex(v) for v in rep.values],
        "moduli": rep.moduli,
        "spectral_radius": rep.spectral_radius,
        "residuals": rep.residuals,
    }


def fixed_point_block(fp: dyn.FixedPointReport) -> dict:
    d = {"point": vector(fp.point), "source": fp.source, "residual": fp.residual,
         "in_cone": fp.in_cone}
    if fp.kind is not None:
        d.update(kind=fp.kind.value, stable_dim=fp.stable_dim, unstable_dim=fp.unstable_dim,
                 spectrum=spectrum_block(fp.spectrum))
    return d


def run_fixed_points(cfg, params):
    warns = []
    cf = dyn.fixed_points_closed_form(params)
    fps = dyn.fixed_points_newton(params, tol=cfg.tol)
    blocks = []
    for fp in fps:
        try:
            c = dyn.classify(params, fp.point, "Newton", fixed_tol=max(cfg.tol, 1e-8))
            blocks.append(fixed_point_block(c))
        except MosquitoEvoError as exc:
            b = fixed_point_block(fp)
            b["classification_error"] = str(exc)
            blocks.append(b)
        if not fp.in_cone:
            warns.append(f"fixed point with L={fp.point[1]:.6g} lies outside the nonnegative cone")
    for name, r in cf.residuals.items():
        if r > dyn.FIXED_POINT_TOL:
            warns.append(f"closed-form variant '{name}' is not a fixed point (residual {r:.3g})")
    interior = [fp for fp in fps if abs(fp.point[1]) > 1e-9]
    if params == dyn.BASELINE and interior:
        gap = abs(interior[0].point[1] - dyn.REFERENCE_L_STAR)
        if gap > 1e-6:
            warns.append(f"discrepancy: reference L* = {dyn.REFERENCE_L_STAR} vs verified "
                         f"L = {interior[0].point[1]:.10g}")
    cycles = dyn.period2_search(params, tol=cfg.tol, seed=cfg.seed)
    for cyc in cycles:
        if not (dyn.in_cone(cyc.v) and dyn.in_cone(cyc.w)):
            warns.append("a 2-cycle lies outside the nonnegative cone")
    res = {
        "closed_form": {
            "C": cf.C,
            "candidates": {k: vector(v) for k, v in cf.candidates.items()},
            "residuals": cf.residuals,
            "verified": cf.verified,
        },
        "fixed_points": blocks,
        "two_cycles": [{"v": vector(c.v), "w": vector(c.w), "residual": c.residual}
                       for c in cycles],
        "tolerance": cfg.tol,
    }
    return res, warns


def run_classify(cfg, params):
    rep = dyn.classify(params, cfg.initial, "config", fixed_tol=max(cfg.tol, 1e-8))
    warns = [] if rep.in_cone else ["point lies outside the nonnegative cone"]
    out = fixed_point_block(rep)
    out["hyperbolicity_band"] = dyn.HYPERBOLIC_BAND
    return out, warns


def idempotent_block(s: al.IdempotentSolution) -> dict:
    return {"element": vector(s.element),
            "branch": None if s.branch is None else ["+" if b else "-" for b in s.branch],
            "residual": s.residual, "method": s.method, "methods": list(s.methods)}


def run_idempotents(cfg, params):
    eps, how = resolve_epsilon(cfg, params)
    S = al.structure_matrix(params, eps)
    sols = al.find_idempotents(S, seed=cfg.seed)
    chain_only = [s for s in sols if s.methods == ("ChainReduction",)]
    newton_only = [s for s in sols if s.methods == ("NewtonMultistart",)]
    warns = []
    if chain_only or newton_only:
        warns.append(f"solver disagreement: {len(chain_only)} chain-only, "
                     f"{len(newton_only)} Newton-only idempotents")
    return {"epsilon": eps, "epsilon_source": how, "residual_bound": al.IDEMPOTENT_TOL,
            "idempotents": [idempotent_block(s) for s in sols]}, warns


def run_algebra(cfg, params):
    eps, how = resolve_epsilon(cfg, params)
    S = al.structure_matrix(params, eps)
    det, rank = nm.det_rank(S.A)
    simple = al.is_simple(S)
    ideal = al.proper_ideal(S)
    nil = al.absolute_nilpotents(S, seed=cfg.seed)
    lam1 = al.lambda_one_condition(params, eps)
    idem, warns = run_idempotents(cfg, params)
    if not lam1.consistent:
        warns.append("closed-form unit-eigenvalue identity disagrees with char_poly(1)")
    res = {
        "epsilon": eps, "epsilon_source": how,
        "structure_matrix": S.A, "det": det, "rank": rank,
        "simple": {"verdict": simple.simple, "det": simple.det, "det_nonzero": simple.det_nonzero,
                   "descendants_complete": simple.descendants_complete,
                   "det_tolerance": f"{al.SIMPLE_DET_TOL:g} * ||A||_inf"},
        "nilpotent_algebra": al.is_nilpotent(S),
        "modular_indices": sorted(al.modular_indices(S)),
        "radical": al.is_radical(S),
        "basis_powers": {f"e{i}": al.basis_power(S, i, 2)[1] for i in range(1, 7)},
        "absolute_nilpotents": {
            "elements": [vector(x) for x in nil.elements],
            "cascade_certified": nil.cascade_certified, "det_nonzero": nil.det_nonzero,
            "starts": nil.n_starts, "converged": nil.n_converged,
            "max_converged_norm": nil.max_converged_norm},
        "ideal": None if ideal is None else {
            "basis": [vector(u) for u in ideal.basis], "dim": ideal.dim, "proper": ideal.proper,
            "last_square_gap": ideal.last_square_gap, "closure_gap": ideal.closure_gap},
        "lambda_one": {"holds": lam1.holds, "lhs": lam1.lhs, "rhs": lam1.rhs,
                       "char_poly_at_1": lam1.charpoly_at_one},
        "idempotents": idem["idempotents"],
    }
    return res, warns


def run_operator(cfg, params):
    eps, how = resolve_epsilon(cfg, params)
    op = eo.operator_matrix(al.structure_matrix(params, eps))
    pairs = nm.eig(op.L)
    one = eo.one_in_spectrum(op)
    per = []
    for p in pairs:
        d = {"lambda": p.value, "modulus": abs(p.value), "residual": p.residual}
        try:
            if p.vector is None:
                raise MosquitoEvoError("no eigenvector")
            b = None if one else eo.b_from_c(op, p.vector, p.value)
            cls = eo.classify_limit_bc(p.value, b, p.vector)
            d.update(tag=cls.tag, reason=cls.reason)
            if cls.limit_gap is not None:
                d["b_c_plus_c_over_1_minus_lambda"] = cls.limit_gap
        except MosquitoEvoError as exc:
            d["tag"] = None
            d["reason"] = str(exc)
        per.append(d)
    le = eo.limit_exists(op, period=cfg.period)
    res = {
        "epsilon": eps, "epsilon_source": how,
        "convention": "matrix of x -> l x, the transpose of the structure matrix",
        "operator_matrix": op.L,
        "spectrum": spectrum_block(nm.SpectrumReport(pairs)),
        "one_in_spectrum": one,
        "eigenpairs": per,
        "limit": {"period": cfg.period, "exists": le.exists, "reason": le.reason,
                  "spectral_radius": le.spectral_radius, "projector": le.projector,
                  "idempotency_error": le.idempotency_error,
                  "commutation_error": le.commutation_error},
    }
    return res, []


ANALYSES = {"fixed-points": run_fixed_points, "classify": run_classify,
            "idempotents": run_idempotents, "algebra": run_algebra, "operator": run_operator}


def param_warnings(cfg, params) -> list[str]:
    out = params.range_warnings()
    if cfg.raw is not None:
        out = cfg.raw.range_warnings() + out
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def write(text: str, path: str | None):
    if path:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def error_block(kind: str, exc: BaseException) -> str:
    body = {"type": type(exc).__name__, "category": kind, "message": str(exc)}
    if isinstance(exc, ValidationError):
        body["problems"] = exc.problems
    if isinstance(exc, ParseError) and exc.line is not None:
        body["line"] = exc.line
    return dumps({"schema_version": 1, "error": body})


def run_trajectory(cmd, cfg) -> int:
    if cfg.sweep:
        raise ConfigError("sweep is only supported for JSON-report commands")
    params = cfg.params
    for w in param_warnings(cfg, params):
        sys.stderr.write(f"warning: {w}\n")
    try:
        if cmd == "simulate":
            n = cfg.steps if cfg.steps is not None else 10
            traj = dyn.orbit(params, cfg.initial, n, clamp=cfg.clamp)
        else:
            T = cfg.steps * cfg.dt if cfg.steps is not None else cfg.T
            traj = dyn.ode_integrate(cfg.raw if cfg.raw is not None else params,
                                     cfg.initial, T, cfg.dt)
    except Overflow as exc:
        if exc.trajectory is not None:
            write(exc.trajectory.to_csv(), cfg.out)
        raise
    if traj.cone_exits:
        sys.stderr.write(f"warning: orbit left the nonnegative cone at steps "
                         f"{traj.cone_exits[:10]}\n")
    if getattr(traj, "clamp_events", None):
        sys.stderr.write(f"warning: clamped at steps {traj.clamp_events[:10]}\n")
    write(traj.to_csv(), cfg.out)
    return 0


def run_report(cmd, cfg) -> int:
    fn = ANALYSES[cmd]
    if cfg.sweep:
        runs = []
        for k, over in enumerate(cfg.sweep):
            params = cfg.params.replace(**over)
            res, warns = fn(cfg, params)
            runs.append({"index": k, "overrides": over, "results": res,
                         "warnings": param_warnings(cfg, params) + warns})
        results, warns = {"sweep": runs}, []
    else:
        results, warns = fn(cfg, cfg.params)
        warns = param_warnings(cfg, cfg.params) + warns
    write(dumps(envelope(cmd, cfg.echo(), results, warns)), cfg.out)
    return 0


def run_reproduce(cfg) -> int:
    crits = acceptance.run_all()
    for c in crits:
        sys.stderr.write(c.line() + "\n")
    results = {
        "all_passed": all(c.passed for c in crits),
        "criteria": [{"number": c.number, "name": c.name, "passed": c.passed,
                      "detail": c.detail, "flags": c.flags} for c in crits],
    }
    warns = [f"criterion {c.number}: {f}" for c in crits for f in c.flags]
    base = cfgmod.baseline_config()
    write(dumps(envelope("reproduce", base.echo(), results, warns)), cfg.out)
    return 0 if results["all_passed"] else 1


def run_command(cmd: str, cfg: cfgmod.RunConfig) -> int:
    if cmd in CSV_COMMANDS:
        return run_trajectory(cmd, cfg)
    if cmd == "reproduce":
        return run_reproduce(cfg)
    return run_report(cmd, cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ParseError, ValidationError, ValueError) as exc:
        sys.stderr.write(error_block("config", exc))
        return 2
    try:
        return run_command(args.command, cfg)
    except (ConfigError, ValidationError) as exc:
        sys.stderr.write(error_block("config", exc))
        return 2
    except (MosquitoEvoError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(error_block("computation", exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())

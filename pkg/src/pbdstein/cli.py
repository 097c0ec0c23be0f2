"""Command-line front end.

Exit codes: 0 success, 2 invalid flags or parameters, 3 a formula's
precondition fails (e.g. the PBD fit condition), 4 a numerical-consistency
check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .coupling_sim import estimate_gf1, path_to_csv, simulate_bd_path
from .dist_core import ABParams, PBDParams, pbd_equilibrium, poisson_pmf
from .errors import InapplicableError, NumericalConsistencyError, ParameterDomainError, PBDError
from .metrics import total_variation, wasserstein
from .poisson_binomial import exact_pmf, fit_pbd, load_profile, reference_laws
from .stein_bounds import approx_bounds, factor_bounds, factor_bounds_ab, poisson_factor_bounds
from .stein_solver import (
    SOLVER_TOL,
    exact_sup_delta2_g,
    exact_sup_delta_g,
    exact_sup_g,
    f1,
    solve_g,
    solver_pmf,
)

SCHEMA = "pbd-stein/1"
EXIT_OK, EXIT_USAGE, EXIT_INAPPLICABLE, EXIT_NUMERIC = 0, 2, 3, 4
DOMINANCE_SLACK = 1e-10
DISTANCE_SLACK = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_params(p: argparse.ArgumentParser, *, ab: bool = True) -> None:
    g = p.add_argument_group("PBD parameters")
    g.add_argument("--alpha", type=float, help="birth rate of PBD(alpha;0,beta,1)")
    g.add_argument("--beta", type=float, help="linear death coefficient of PBD(alpha;0,beta,1)")
    if ab:
        g.add_argument("--a", type=float, help="birth rate of PBD(a;0,1,b)")
        g.add_argument("--b", type=float, help="quadratic death coefficient of PBD(a;0,1,b)")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json", dest="output_format")
    p.add_argument("--output", type=Path, default=None, help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbdstein", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("pmf", help="equilibrium pmf of a PBD law")
    _add_params(p)
    p.add_argument("--tol", type=float, default=1e-10)
    _add_output(p)

    p = sub.add_parser("stein", help="exact Stein-factor suprema next to their bounds")
    _add_params(p)
    p.add_argument("--solver-tol", type=float, default=SOLVER_TOL,
                   help="truncation tolerance of the pmf behind the Stein tables")
    p.add_argument("--i-max", type=int, default=None, help="cap on the difference scans")
    _add_output(p)

    p = sub.add_parser("bounds", help="closed-form bounds")
    _add_params(p)
    p.add_argument("--profile", type=Path, help="Bernoulli profile (JSON or CSV)")
    _add_output(p)

    p = sub.add_parser("compare", help="PBD vs Poisson / shifted Poisson for a profile")
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    _add_output(p)

    p = sub.add_parser("simulate", help="coupling Monte Carlo for g_f1(i), or a chain path")
    _add_params(p, ab=False)
    p.add_argument("--site", type=int, default=1, help="focus site i >= 1 for E T_i")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="parallel width (results do not depend on it)")
    p.add_argument("--horizon", type=float, default=None, help="simulate a chain path up to this time")
    p.add_argument("--i0", type=int, default=0, help="start state of the chain path")
    _add_output(p)
    return parser


def _params(args, *, required: bool = True):
    ab_given = getattr(args, "a", None) is not None or getattr(args, "b", None) is not None
    pbd_given = args.alpha is not None or args.beta is not None
    if ab_given and pbd_given:
        raise UsageError("--alpha/--beta and --a/--b are mutually exclusive")
    if pbd_given:
        if args.alpha is None or args.beta is None:
            raise UsageError("--alpha and --beta must be given together")
        return _wrap(PBDParams, "--alpha/--beta", args.alpha, args.beta)
    if ab_given:
        if args.a is None or args.b is None:
            raise UsageError("--a and --b must be given together")
        return _wrap(ABParams, "--a/--b", args.a, args.b)
    if required:
        raise UsageError("one of --alpha/--beta or --a/--b is required")
    return None


def _wrap(cls, flags, *values):
    try:
        return cls(*values)
    except ParameterDomainError as exc:
        raise UsageError(f"{flags}: {exc}") from None


def _cmd_pmf(args) -> dict:
    params = _params(args)
    pmf = pbd_equilibrium(params, args.tol)
    return {"pmf": pmf, "params": params.to_dict()}


def _cmd_stein(args) -> dict:
    params = _params(args)
    pmf = solver_pmf(params, args.solver_tol)
    sol = solve_g(params, f1, pmf)
    sup_g = exact_sup_g(params, pmf)
    out = {
        "params": params.to_dict(),
        "mean": pmf.mean(),
        "exact_sup_g": sup_g.to_dict(),
        "solution_f1": sol.to_dict(),
    }
    if isinstance(params, ABParams):
        bounds = factor_bounds_ab(params.a, params.b)
        if params.b == 0:
            bounds.update(poisson_factor_bounds(params.a))
        pairs = {"g": ("sup_gt_18",), "dg": ("sup_dgt_19",), "d2g": ("sup_d2gt_110",)}
        if params.b == 0:
            pairs = {"g": ("sup_gt_18",)}
    else:
        bounds = factor_bounds(params)
        pairs = {"g": ("sup_g_15",), "dg": ("sup_dg_16",), "d2g": ("sup_d2g_17",)}
    if "dg" in pairs:
        out["exact_sup_delta_g"] = exact_sup_delta_g(params, pmf, args.i_max).to_dict()
        out["exact_sup_delta2_g"] = exact_sup_delta2_g(params, pmf, args.i_max).to_dict()
    out["bounds"] = bounds.to_dict()
    exact_key = {"g": "exact_sup_g", "dg": "exact_sup_delta_g", "d2g": "exact_sup_delta2_g"}
    dominance = {}
    for name, (bid,) in pairs.items():
        exact = out[exact_key[name]]["value"]
        dominance[bid] = bool(exact <= bounds[bid] * (1 + DOMINANCE_SLACK) + DOMINANCE_SLACK)
    out["dominance"] = dominance
    out["bound_15" if isinstance(params, PBDParams) else "bound_18"] = bounds[pairs["g"][0]]
    if not all(dominance.values()):
        out["_exit"] = EXIT_NUMERIC
    return out


def _cmd_bounds(args) -> dict:
    params = _params(args, required=args.profile is None)
    out: dict = {}
    if params is not None:
        if isinstance(params, ABParams):
            rep = factor_bounds_ab(params.a, params.b)
            if params.b == 0:
                rep.update(poisson_factor_bounds(params.a))
        else:
            rep = factor_bounds(params)
        out["params"] = params.to_dict()
        out["bounds"] = rep.to_dict()
    if args.profile is not None:
        profile = load_profile(args.profile)
        out["profile_bounds"] = approx_bounds(profile).to_dict()
    return out


def _cmd_compare(args) -> dict:
    profile = load_profile(args.profile)
    W = exact_pmf(profile)
    rep = approx_bounds(profile)
    refs = reference_laws(profile, args.tol)
    out: dict = {
        "n": profile.n,
        "lambda": profile.lam, "lambda_2": profile.lam2, "lambda_3": profile.lam3,
        "bounds": rep.to_dict(),
        "shift": refs.shift, "integer_shift": refs.integer_shift,
    }
    d_pn = wasserstein(W, refs.poisson)
    d_sp = wasserstein(W, refs.shifted_poisson)
    out["poisson"] = {"d_W": d_pn.to_dict(), "d_TV": total_variation(W, refs.poisson).to_dict()}
    out["shifted_poisson"] = {"d_W": d_sp.to_dict(),
                              "d_TV": total_variation(W, refs.shifted_poisson).to_dict()}
    violations = []
    try:
        params = fit_pbd(profile)
    except InapplicableError as exc:
        out["pbd"] = None
        out["pbd_reason"] = f"fit inapplicable: {exc.condition}"
        print(f"pbdstein: inapplicable: {exc.condition}", file=sys.stderr)
        out["_exit"] = EXIT_INAPPLICABLE
    else:
        pbd = pbd_equilibrium(params, args.tol)
        d_pbd = wasserstein(W, pbd)
        out["pbd"] = {"params": params.to_dict(), "d_W": d_pbd.to_dict(),
                      "d_TV": total_variation(W, pbd).to_dict()}
        if "pbd_application_114" in rep.values:
            out["pbd"]["bound_114"] = rep.values["pbd_application_114"]
            ok = d_pbd.value <= rep.values["pbd_application_114"] + d_pbd.tail_error + DISTANCE_SLACK
            out["pbd"]["within_bound_114"] = ok
            if not ok:
                violations.append("pbd_application_114")
    if "bx_shifted" in rep.values:
        out["shifted_poisson"]["bx_shifted"] = rep.values["bx_shifted"]
    if refs.integer_shift and "bx_shifted" in rep.values:
        ok = d_sp.value <= rep.values["bx_shifted"] + d_sp.tail_error + DISTANCE_SLACK
        out["shifted_poisson"]["within_bx_shifted"] = ok
        if not ok:
            violations.append("bx_shifted")
    if violations:
        out["violations"] = violations
        out["_exit"] = EXIT_NUMERIC
    return out


def _cmd_simulate(args) -> dict:
    params = _params(args)
    if args.horizon is not None:
        path = simulate_bd_path(params, args.i0, args.horizon, args.seed)
        return {"path": path, "params": params.to_dict(), "seed": args.seed}
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    est = estimate_gf1(params, args.site, args.samples, args.seed, workers=args.workers)
    exact = solve_g(params, f1, solver_pmf(params)).g[args.site]
    return {"estimate": est.to_dict(), "params": params.to_dict(), "exact_g_f1": float(exact),
            "z_score": (est.mean - exact) / est.stderr if est.stderr > 0 else 0.0}


COMMANDS = {"pmf": _cmd_pmf, "stein": _cmd_stein, "bounds": _cmd_bounds,
            "compare": _cmd_compare, "simulate": _cmd_simulate}


def _flatten(d: dict, prefix: str = "") -> list[tuple[str, object]]:
    rows = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_flatten(v, key + "."))
        elif not isinstance(v, list):
            rows.append((key, v))
    return rows


def _render(cmd: str, result: dict, fmt: str) -> str:
    if fmt == "csv":
        if cmd == "pmf":
            return result["pmf"].to_csv()
        if cmd == "simulate" and "path" in result:
            return path_to_csv(result["path"])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(result):
            w.writerow([k, "" if v is None else (repr(v) if isinstance(v, float) else v)])
        return buf.getvalue()
    doc = {"schema": SCHEMA, "command": cmd}
    for k, v in result.items():
        doc[k] = v.to_dict() if hasattr(v, "to_dict") else v
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"pbdstein: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InapplicableError as exc:
        print(f"pbdstein: inapplicable: {exc.condition}: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except ParameterDomainError as exc:
        print(f"pbdstein: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalConsistencyError, PBDError) as exc:
        print(f"pbdstein: numerical consistency failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"pbdstein: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code = result.pop("_exit", EXIT_OK)
    text = _render(args.subcommand, result, args.output_format)
    if args.output is not None:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

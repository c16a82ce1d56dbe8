"""Command-line interface: ``asymfsr {sectors,reduce,solve,sweep} --config PATH``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
Floats are written as the shortest decimal that round-trips.
"""

import argparse
import io
import json
import os
import sys

import numpy as np

from .config import (build_highorder_config, build_system_config, load_config, parse_lambda,
                     parse_moduli, run_config)
from .exceptions import NumericalError, ValidationError
from .highorder import build_system
from .model import build_model
from .sectors import extend, make_sectors
from .solver import SolveOptions, assemble_Y, solve_Z
from .verify import SWEEP_FIELDS, fit_slope, sweep_point
from .funcspace import mesh


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _c(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return _c(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj):
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def _problem(cfg, args):
    """The first-order system of a config (reducing high-order problems first)."""
    if cfg["kind"] == "system":
        return build_system_config(cfg, args.cells), None
    red = build_system(build_highorder_config(cfg, args.cells))
    return red.system, red


def _opts(run):
    return SolveOptions(max_iter=run.max_iter, tol_series=run.tol, mu=run.mu)


def _model(system, run):
    secs = make_sectors(system.B)
    if run.sector > len(secs):
        raise ValidationError(f"sector index {run.sector} out of range 1..{len(secs)}")
    es = extend(secs[run.sector - 1], run.shift, system.B, 1.0, secs)
    return build_model(system, es)


def _sector_record(es, b):
    perm = list(es.perm)
    return {
        "kappa": es.base.kappa,
        "alpha_lo": float(es.base.alpha_lo),
        "alpha_hi": float(es.base.alpha_hi),
        "width": float(es.base.width),
        "bisector": float(es.base.bisector),
        "ordering": [i + 1 for i in perm],
        "b_ordered": [_c(b[i]) for i in perm],
        "blocks": list(es.blocks),
        "h": float(es.h),
        "lambda0": float(es.lam0),
        "apex": _c(es.apex),
        "shift": float(es.r),
    }


def cmd_sectors(cfg, run, args):
    system, _ = _problem(cfg, args)
    secs = make_sectors(system.B)
    b = system.B.array()
    recs = [_sector_record(extend(s, run.shift, system.B, 1.0, secs), b) for s in secs]
    recs.sort(key=lambda r: r["alpha_lo"])
    if run.fmt == "json":
        return dump_json({"count": len(recs), "sectors": recs})
    lines = [f"{len(recs)} sectors"]
    for r in recs:
        lines.append(
            f"sector {r['kappa']}: alpha in ({fmt(r['alpha_lo'])}, {fmt(r['alpha_hi'])}) "
            f"ordering {r['ordering']} blocks {r['blocks']} h {fmt(r['h'])} lambda0 {fmt(r['lambda0'])}"
        )
    return "\n".join(lines) + "\n"


def _matrix_dump(values):
    n = values.shape[1]
    return [[{"type": "samples", "values": [_c(z) for z in values[:, j, k]]} for k in range(n)] for j in range(n)]


def cmd_reduce(cfg, run, args):
    if cfg["kind"] != "high_order":
        raise ValidationError("reduce needs a high_order config")
    problem = build_highorder_config(cfg, args.cells)
    red = build_system(problem)
    s = red.system
    out = {
        "kind": "system",
        "grid": {"cells": s.N},
        "n": s.n,
        "B": [_c(v) for v in s.B.array()],
        "omega": [_c(v) for v in red.omega],
        "rho": {"type": "samples", "values": [_c(v) for v in s.rho.real_values]},
        "A": _matrix_dump(s.A.values),
        "Ctail": [_matrix_dump(C.values) for C in s.Ctail],
        "A_crosscheck": red.A_crosscheck,
    }
    if s.mu_prime is not None:
        out["mu_prime"] = s.mu_prime
    return dump_json(out)


def _solve_csv(Y):
    N, n = Y.N, Y.P.shape[1]
    x = mesh(N)
    head = ["x"]
    for j in range(n):
        for k in range(n):
            head += [f"P_{j + 1}_{k + 1}_re", f"P_{j + 1}_{k + 1}_im"]
    for k in range(n):
        head += [f"expRe_{k + 1}", f"expIm_{k + 1}"]
    buf = io.StringIO()
    buf.write(",".join(head) + "\n")
    for i in range(N + 1):
        row = [fmt(x[i])]
        for j in range(n):
            for k in range(n):
                z = Y.P[i, j, k]
                row += [fmt(z.real), fmt(z.imag)]
        for k in range(n):
            e = Y.exponents[i, k]
            row += [fmt(e.real), fmt(e.imag)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _solve_stats(sol, ms, Y, lam):
    from .verify import det_identity_check, ode_residual

    return {
        "lambda": _c(lam),
        "sector": ms.sector.base.kappa,
        "ordering": [i + 1 for i in ms.sector.perm],
        "iterations": sol.iterations,
        "fp_resid": sol.fp_residual,
        "ups": sol.stats.ups,
        "ups_mu": sol.stats.ups_mu,
        "gamma": sol.stats.gamma,
        "rem_inf": sol.remainder_norm(),
        "rem1_inf": sol.refined_remainder_norm(),
        "contraction_ratio": sol.contraction_ratio,
        "contraction_bound": sol.contraction_bound,
        "Z_term_norms": [float(np.max(np.abs(t.values))) for t in sol.Zterms],
        "constants": dict(sol.constants),
        "ode_resid": ode_residual(ms, Y, lam),
        "det_err": det_identity_check(ms.system, Y, lam),
    }


def cmd_solve(cfg, run, args):
    if len(run.lambdas) != 1:
        raise ValidationError(f"solve needs exactly one --lambda, got {len(run.lambdas)}")
    lam = run.lambdas[0]
    system, _ = _problem(cfg, args)
    ms = _model(system, run)
    sol = solve_Z(ms, lam, _opts(run))
    Y = assemble_Y(ms, sol)
    stats = _solve_stats(sol, ms, Y, lam)
    if run.fmt == "json":
        n = system.n
        P = {f"P_{j + 1}_{k + 1}": [_c(z) for z in Y.P[:, j, k]] for j in range(n) for k in range(n)}
        ex = {f"exp_{k + 1}": [_c(z) for z in Y.exponents[:, k]] for k in range(n)}
        return dump_json({"x": mesh(Y.N), "P": P, "exponents": ex, "stats": stats}), None
    return _solve_csv(Y), dump_json(stats)


def _sweep_lambdas(run):
    if run.ray is not None:
        return [r * np.exp(1j * run.ray) for r in run.moduli]
    return list(run.lambdas)


def cmd_sweep(cfg, run, args):
    system, _ = _problem(cfg, args)
    ms = _model(system, run)
    opts = _opts(run)
    lams = _sweep_lambdas(run)
    recs = [sweep_point(ms, lam, opts)[0] for lam in lams]
    ok = [(abs(l), r) for l, r in zip(lams, recs) if r["status"] == "ok"]
    slopes = {key: fit_slope([m for m, _ in ok], [r[key] for _, r in ok])
              for key in ("ups", "ups_mu", "rem_inf", "rem1_inf")}
    side = {"ray": run.ray, "moduli": [abs(l) for l in lams], "slopes": slopes}
    if run.fmt == "json":
        return dump_json({"records": recs, **side}), None
    buf = io.StringIO()
    buf.write(",".join(SWEEP_FIELDS) + "\n")
    for r in recs:
        buf.write(",".join(fmt(r[k]) if k in r else "" for k in SWEEP_FIELDS) + "\n")
    return buf.getvalue(), dump_json(side)


def build_parser():
    p = argparse.ArgumentParser(prog="asymfsr", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["sectors", "reduce", "solve", "sweep"])
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--sector", type=int, metavar="K")
    p.add_argument("--shift", type=float, metavar="R")
    p.add_argument("--lambda", dest="lambdas", action="append", metavar="RE,IM")
    p.add_argument("--ray", type=float, metavar="ANGLE")
    p.add_argument("--moduli", metavar="LIST")
    p.add_argument("--mu", metavar="VAL|inf")
    p.add_argument("--cells", type=int, metavar="N")
    p.add_argument("--max-iter", type=int, metavar="M")
    p.add_argument("--tol", type=float, metavar="T")
    return p


COMMANDS = {"sectors": cmd_sectors, "reduce": cmd_reduce, "solve": cmd_solve, "sweep": cmd_sweep}


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _sidecar(out, cmd):
    stem = out[:-4] if out.endswith(".csv") else out
    return f"{stem}.{'stats' if cmd == 'solve' else 'slopes'}.json"


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        cfg = load_config(args.config)
        overrides = {
            "sector": args.sector, "shift": args.shift, "mu": args.mu, "max_iter": args.max_iter,
            "tol": args.tol, "format": args.format, "out": args.out,
        }
        if args.lambdas is not None:
            overrides["lambda"] = [parse_lambda(l) for l in args.lambdas]
        if args.ray is not None:
            overrides["ray"] = args.ray
            overrides["moduli"] = parse_moduli(args.moduli or "")
            if args.lambdas is None:
                overrides["lambda"] = []
        elif args.moduli is not None:
            raise ValidationError("--moduli needs --ray")
        rc = run_config(cfg, overrides)
        result = COMMANDS[args.command](cfg, rc, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return 2
    text, side = result if isinstance(result, tuple) else (result, None)
    if rc.out:
        _write(rc.out, text)
        if side is not None:
            _write(_sidecar(rc.out, args.command), side)
    else:
        stdout.write(text)
    return 0


def main(argv=None):
    try:
        code = run(argv)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()

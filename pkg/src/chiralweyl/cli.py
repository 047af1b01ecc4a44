"""Command-line front end.

    chiralweyl ope "a(-1)|0>" "b(-1)|0>"
    chiralweyl normal-order "a(-1)|0>" "b(-2)|0>"
    chiralweyl coord-change "z + z^2" --state "a(-1)|0>"
    chiralweyl bv "e0_1 e1_1" --op laplacian
    chiralweyl trace "a(-1)|0> @z1 * b(-1)|0> @z2 / (z1-z2)" --smooth 1,0,0,0
    chiralweyl expect current --coeff 2
    chiralweyl check chain-map --backend genus0

Exit status: 0 pass, 1 computation error, 2 check failure.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction

from . import bv, checks, coord, fock, trace
from .chiral import ChiralSection, format_section, parse_chain
from .kernels import DiagKernel, KernelError, ParseError, RegimeError, format_kernel, parse_kernel

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


# ------------------------------------------------------------ config

def load_config(path):
    """Flat key=value file; '#' starts a comment."""
    cfg = {}
    if not path:
        return cfg
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value in config line {n}", line, 0)
            k, v = line.split("=", 1)
            cfg[k.strip()] = v.strip()
    return cfg


def system_from(cfg, name=None):
    name = name or cfg.get("system", "mixed")
    if name in ("bg", "betagamma") and "alpha" in cfg:
        return fock.beta_gamma(Fraction(cfg["alpha"]), int(cfg.get("rank", 1)))
    if name == "sb" and "rank" in cfg:
        return fock.symplectic_bosons(int(cfg["rank"]))
    if name not in checks.SYSTEMS:
        raise ValueError(f"unknown system {name!r}; choose from {', '.join(checks.SYSTEMS)}")
    return checks.SYSTEMS[name]()


def pairing_from(cfg, m):
    src = cfg.get("pairing")
    if not src:
        return [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    rows = [[Fraction(x) for x in r.split(",")] for r in src.split(";")]
    if len(rows) != m or any(len(r) != m for r in rows):
        raise ValueError(f"pairing must be {m}x{m}")
    return rows


# ------------------------------------------------------------ expressions

def parse_series(src: str):
    """Power series in z, e.g. ``z + 1/2 z^2``; returns coefficients of z^0, z^1, ..."""
    k = parse_kernel(re.sub(r"\bz\b", "z1", src), 1)
    if k.poles or k.singles:
        raise ParseError("series may not have poles", src, 0)
    terms = k.num.terms
    deg = max((e[0] for e in terms), default=0)
    return [Fraction(terms.get((d,), 0)) for d in range(deg + 1)]


def format_series(c) -> str:
    out = ""
    for d, x in enumerate(c):
        if not x:
            continue
        mag = abs(x)
        body = f"{mag}" if d == 0 else ("z" if mag == 1 else f"{mag}*z") + (f"^{d}" if d > 1 else "")
        if not out:
            out = ("-" if x < 0 else "") + body
        else:
            out += (" - " if x < 0 else " + ") + body
    return out or "0"


def parse_expr(src: str, gs=None):
    """Classify and parse an expression: (kind, object).

    kinds: chain (has '@'), state (has '|0>'), bv (e0_/e1_ symbols),
    kernel (z1..z9), series (bare z).
    """
    gs = gs or fock.mixed_system()
    if "@" in src:
        return "chain", parse_chain(gs, src)
    if "|0>" in src:
        return "state", fock.parse_state(gs, src)
    if re.search(r"\be[01]_\d", src):
        return "bv", bv.parse_bv(src)
    if re.search(r"z[1-9]", src):
        return "kernel", parse_kernel(src)
    if re.search(r"\bz\b", src):
        return "series", parse_series(src)
    return "kernel", parse_kernel(src, 1)


def format_expr(kind, obj, gs=None) -> str:
    gs = gs or fock.mixed_system()
    if kind == "chain":
        return format_section(obj)
    if kind == "state":
        return fock.format_state(gs, obj)
    if kind == "bv":
        return bv.format_bv(obj)
    if kind == "kernel":
        return format_kernel(obj)
    return format_series(obj)


# ------------------------------------------------------------ commands

def _result(backend, value, error_estimate=0.0, checks_=None):
    return {"backend": backend, "value": value, "error_estimate": error_estimate,
            "checks": checks_ or []}


def cmd_ope(args, cfg):
    gs = system_from(cfg, args.system)
    a, b = fock.parse_state(gs, args.a), fock.parse_state(gs, args.b)
    ope = fock.singular_ope(gs, a, b)
    value = {str(n): fock.format_state(gs, s) for n, s in sorted(ope.items(), reverse=True)}
    return _result("exact", value)


def cmd_normal_order(args, cfg):
    gs = system_from(cfg, args.system)
    a, b = fock.parse_state(gs, args.a), fock.parse_state(gs, args.b)
    return _result("exact", fock.format_state(gs, fock.normal_ordered_product(gs, a, b)))


def cmd_coord_change(args, cfg):
    D = int(args.order or cfg.get("trunc_degree", 4))
    f = parse_series(args.series)
    f = f + [Fraction(0)] * (D + 4 - len(f))
    ch = coord.decompose_coord(f, D)
    value = {"v0": str(ch.v[0]), "v": [str(x) for x in ch.v[1:]],
             "schwarzian": format_series(coord.schwarzian_correction(f, D))}
    if args.state:
        gs = system_from(cfg, args.system)
        s = fock.parse_state(gs, args.state)
        level = max((gs.mono_level(m) for m in s.terms), default=0)
        ma = coord.ModeAlgebra(gs, max(level, 1))
        out = coord.r_operator(ma, ch.v, s, inverse=args.inverse)
        value["R_state"] = fock.format_state(gs, fock.FockState(out))
    return _result("exact", value)


def cmd_bv(args, cfg):
    p = bv.parse_bv(args.expr)
    m = p.m
    other = bv.parse_bv(args.other, m) if args.other else None
    bg = bv.HarmonicBackground(pairing_from(cfg, m))
    if args.op == "laplacian":
        return _result("exact", bv.format_bv(bv.bv_laplacian(p, bg)))
    if args.op == "bracket":
        if other is None:
            raise ValueError("--op bracket needs --other")
        return _result("exact", bv.format_bv(bv.bv_bracket(p, other, bg)))
    if args.op == "exp":
        return _result("exact", bv.format_bv(bv.bv_exp(p)))
    r = bv.check_qme(p, bg)
    return _result("exact", {"exp_form": r["exp_form"], "master_form": r["master_form"]},
                   checks_=[{"name": "qme-formulations-agree", "passed": r["agree"]}])


def _smooth_for(n, weight):
    phi = {(0,) * (2 * n): Fraction(1)}
    for p in range(n):
        phi = trace.smooth_mul(phi, trace.bump(n, p, 2))
    if weight:
        exps = tuple(int(x) for x in weight.split(","))
        if len(exps) != 2 * n:
            raise ValueError(f"--smooth needs {2 * n} exponents (z, zbar per point)")
        phi = trace.smooth_mul(phi, {exps: Fraction(1)})
    return phi


def cmd_trace(args, cfg):
    backend = args.backend or cfg.get("backend", "genus0")
    if backend == "genus0":
        gs = system_from(cfg, args.system)
        sec = parse_chain(gs, args.chain)
        n = sec.n
        ch = trace.FormChain(sec, _smooth_for(n, args.smooth), tuple(range(n)))
        lie = trace._is_lie_chain(sec)
        value = trace.trace_lie(ch) if lie else trace.trace_ch(ch)
        return _result("genus0", str(value), 0.0,
                       [{"name": "map", "value": "Tr_Lie" if lie else "Tr_ch"}])
    if backend == "formal":
        gs = fock.symplectic_bosons(1) if args.system is None else system_from(cfg, args.system)
        state = fock.parse_state(gs, args.chain)
        fb = trace.FormalBackend(gs, pairing_from(cfg, int(cfg.get("zero_modes", 1))),
                                 max_jet=max(2, max((-md - 1 for m in state.terms for _, md in m), default=0)))
        tr = trace.formal_trace(fb, state)
        value = {bv.format_bv(bv.BVPolynomial(fb.m, {key: 1})): _fmt_dol(fb.model, e) for key, e in tr.items()}
        defect = trace.formal_chain_map_defect(fb, state)
        return _result("formal", value, 0.0, [{"name": "chain-map", "passed": not defect}])
    raise ValueError(f"trace is not available on the {backend} backend")


def _fmt_dol(model, e):
    parts = []
    for mono, c in sorted(e.items(), key=lambda kv: model._mono_key(kv[0])):
        sym = " ".join(s if p == 1 else f"{s}^{p}" for s, p in mono)
        parts.append(f"{c} {sym}")
    return " + ".join(parts)


def _complex_cfg(cfg, key, default):
    return complex(cfg.get(key, default).replace(" ", ""))


def cmd_expect(args, cfg):
    tau = _complex_cfg(cfg, "tau", "0.3+1.1j")
    u = _complex_cfg(cfg, "u", "0.27+0.341j")
    q_terms = int(cfg.get("q_terms", 32))
    grid_n = int(cfg.get("grid_n", 32))
    tol = float(cfg.get("tol_numeric", 1e-8))
    m = trace.genus1_szego(tau, u, q_terms, tol)
    coeff = complex(args.coeff.replace(" ", ""))
    if args.which == "current":
        r = trace.expect_current(coeff, m, grid_n)
    else:
        r = trace.expect_stress_constant_term(coeff, m, grid_n)
    chk = [{"name": "a0_two_methods", "value": m.checks["a0_diff"]},
           {"name": "a1_two_methods", "value": m.checks["a1_diff"]},
           {"name": "orientation", "value": "area factor Im(tau) > 0"}]
    return _result(r["backend"], [r["value"].real, r["value"].imag], r["error_estimate"], chk)


def cmd_check(args, cfg):
    seed = args.seed if args.seed is not None else (int(cfg["seed"]) if "seed" in cfg else None)
    backend = args.backend
    if args.suite != "chain-map":
        backend = None
    elif backend is None:
        backend = cfg.get("backend", "genus0")
    rep = checks.run_check_suite(args.suite, cfg, seed=seed, backend=backend)
    return _result(backend or "exact", "pass" if rep["passed"] else "fail", 0.0, [rep])


COMMANDS = {"ope": cmd_ope, "normal-order": cmd_normal_order, "coord-change": cmd_coord_change,
            "bv": cmd_bv, "trace": cmd_trace, "expect": cmd_expect, "check": cmd_check}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file")
    common.add_argument("--format", choices=("json", "text"), default="text")
    common.add_argument("--seed", type=int)
    common.add_argument("--backend", choices=("genus0", "genus1", "formal"))
    common.add_argument("--system", help="sb | bg | bc | mixed (default mixed: a, b even; c, d odd)")

    p = argparse.ArgumentParser(prog="chiralweyl", description="Free-field chiral algebra engine")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("ope", parents=[common], help="singular OPE a(z) b(w)")
    s.add_argument("a")
    s.add_argument("b")
    s = sub.add_parser("normal-order", parents=[common], help="normal ordered product :a b:")
    s.add_argument("a")
    s.add_argument("b")
    s = sub.add_parser("coord-change", parents=[common], help="decompose a coordinate change")
    s.add_argument("series")
    s.add_argument("--order", type=int)
    s.add_argument("--state")
    s.add_argument("--inverse", action="store_true")
    s = sub.add_parser("bv", parents=[common], help="BV operations on zero-mode polynomials")
    s.add_argument("expr")
    s.add_argument("--op", choices=("laplacian", "bracket", "exp", "qme"), default="laplacian")
    s.add_argument("--other")
    s = sub.add_parser("trace", parents=[common], help="trace of a chain (genus0) or state (formal)")
    s.add_argument("chain")
    s.add_argument("--smooth", help="extra monomial exponents a1,b1,...: z_i^a zbar_i^b")
    s = sub.add_parser("expect", parents=[common], help="genus-one expectation values")
    s.add_argument("which", choices=("current", "stress"))
    s.add_argument("--coeff", default="1")
    s = sub.add_parser("check", parents=[common], help="run a verification suite")
    s.add_argument("suite", choices=sorted(checks.SUITES))
    return p


def _text(obj, indent=0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        lines = []
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
        return "\n".join(lines)
    if isinstance(obj, list):
        return "\n".join(_text(x, indent) if isinstance(x, (dict, list)) else f"{pad}- {x}" for x in obj)
    return f"{pad}{obj}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        res = COMMANDS[args.command](args, cfg)
    except (ParseError, KernelError, RegimeError, ValueError, KeyError, ArithmeticError,
            fock.FockError, bv.BVError, coord.CoordError, trace.TraceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.format == "json":
        print(json.dumps(res, indent=2, default=str))
    else:
        print(_text(res))
    failed = any(c.get("passed") is False for c in res["checks"] if isinstance(c, dict))
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

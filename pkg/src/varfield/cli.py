"""Command line front end.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O failure.
Set ``VARFIELD_COLOR=0`` to disable ANSI colour (``=1`` forces it on).
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import electrodynamics as em
from .errors import VarfieldError
from .euler_lagrange import derive_all
from .numeric import (AnalyticField, GridSpec, ibp_study, random_field, residual_study,
                      convergence_order, write_csv)
from .parser import LagrangianDef, parse_expression, parse_lagrangian, parse_transform
from .symbolic import render
from .transform import el_equivalence_report, transform_lagrangian

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
DEFAULT_SEED = 12345
ORDER_WINDOW = (1.7, 2.3)


@dataclass
class RunConfig:
    subcommand: str
    inputs: list = field(default_factory=list)
    n_t: int = 9
    n_x: int = 9
    levels: int = 3
    eps: float | None = None
    seed: int = DEFAULT_SEED
    variations: int = 20
    fields: list = field(default_factory=list)      # NAME=EXPR for check
    solution: list = field(default_factory=list)    # NAME=EXPR exact solution
    trial: list = field(default_factory=list)       # NAME=EXPR, transform action check
    det_sign: int | None = None
    targets: str | None = None
    fmt: str = "text"
    out: str | None = None

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> RunConfig:
        inputs = [p for p in (getattr(ns, "lagrangian", None), getattr(ns, "map", None)) if p]
        return cls(subcommand=ns.command, inputs=inputs,
                   n_t=getattr(ns, "nt", 9), n_x=getattr(ns, "nx", 9),
                   levels=getattr(ns, "levels", 3), eps=getattr(ns, "eps", None),
                   seed=getattr(ns, "seed", DEFAULT_SEED),
                   variations=getattr(ns, "variations", 20),
                   fields=getattr(ns, "psi", None) or [],
                   solution=getattr(ns, "solution", None) or [],
                   trial=getattr(ns, "trial", None) or [],
                   det_sign=getattr(ns, "det_sign", None),
                   targets=getattr(ns, "targets", None),
                   fmt=ns.format, out=ns.out)


class _Failure(Exception):
    """Domain failure that is not a parse error, e.g. an order outside the window."""


def _use_color(stream) -> bool:
    env = os.environ.get("VARFIELD_COLOR")
    if env == "0":
        return False
    if env == "1":
        return True
    return hasattr(stream, "isatty") and stream.isatty()


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(cfg: RunConfig, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2)


def _bindings(specs, L: LagrangianDef) -> dict:
    """``["psi=x1^2", "A[2]=t", "A=grad(x1*t)"]`` -> {name: polys}; unset components are 0."""
    declared = {f.name: f for f in L.fields}
    out: dict = {}
    for spec in specs:
        lhs, sep, src = spec.partition("=")
        lhs = lhs.strip()
        if not sep:
            raise _Failure(f"expected NAME=EXPR, got {spec!r}")
        name, _, idx = lhs.rstrip("]").partition("[")
        decl = declared.get(name)
        comp = int(idx) if idx.isdigit() else (None if not idx else 0)
        if decl is None or comp == 0 or (comp is not None and comp > decl.ncomp):
            raise _Failure(f"no field component {lhs!r}")
        value = parse_expression(src, L)
        if isinstance(value, tuple) != (decl.ncomp == 3 and comp is None):
            raise _Failure(f"shape of {src.strip()!r} does not fit {lhs!r}")
        if isinstance(value, tuple):
            out[name] = value
            continue
        comps = list(out.get(name) or [parse_expression("0")] * decl.ncomp)
        comps[(comp or 1) - 1] = value
        out[name] = tuple(comps)
    return out


def _load(path: str, parse):
    try:
        return parse(_read(path))
    except VarfieldError as exc:
        exc.path = path
        raise


# -- subcommands ---------------------------------------------------------------

def cmd_derive(cfg: RunConfig) -> int:
    L = _load(cfg.inputs[0], parse_lagrangian)
    eqs = derive_all(L)
    if cfg.fmt == "json":
        _emit(cfg, _json([e.to_json(L.scalars) for e in eqs]))
    else:
        lines = []
        for e in eqs:
            label = e.field if e.field in L.scalars else f"{e.field}[{e.comp}]"
            lines.append(f"{label}: {e.render(L.scalars)} = 0")
        _emit(cfg, "\n".join(lines))
    return EXIT_OK


def cmd_transform(cfg: RunConfig) -> int:
    L = _load(cfg.inputs[0], parse_lagrangian)
    T_ = _load(cfg.inputs[1], parse_transform)
    TL = transform_lagrangian(L, T_, cfg.det_sign)
    det = render(TL.jacobian.det)
    report = None
    if cfg.solution:
        sol = _bindings(cfg.solution, L)
        trial = _bindings(cfg.trial, L) if cfg.trial else None
        report = el_equivalence_report(L, T_, sol, GridSpec(n_t=cfg.n_t, n_x=cfg.n_x),
                                       trial=trial, levels=cfg.levels, det_sign=cfg.det_sign)
    if cfg.fmt == "json":
        doc = {"lagrangian": TL.base.render(), "det": det, "det_sign": TL.det_sign,
               "det_sign_assumption": TL.det_sign_assumption}
        if report is not None:
            doc["equivalence"] = report.to_json()
        _emit(cfg, _json(doc))
    else:
        head = [f"# transformed by {os.path.basename(cfg.inputs[1])}",
                f"# det = {det}", f"# det_sign = {TL.det_sign:+d} ({TL.det_sign_assumption})"]
        if report is not None:
            r = report.to_json()
            head.append(f"# action rel_err = {r['rel_err']!r}")
            head.append(f"# residual order = {r['convergence_order_estimate']!r}")
            head.append(f"# action order = {r['action_order_estimate']!r}")
        _emit(cfg, "\n".join(head) + "\n" + TL.base.render())
    return EXIT_OK


def _within(order: float) -> bool:
    return ORDER_WINDOW[0] <= order <= ORDER_WINDOW[1]


def cmd_check(cfg: RunConfig) -> int:
    if cfg.levels < 3:
        raise _Failure(f"convergence studies need at least 3 refinement levels, got {cfg.levels}")
    L = _load(cfg.inputs[0], parse_lagrangian)
    grid = GridSpec(n_t=cfg.n_t, n_x=cfg.n_x)
    rng = np.random.default_rng(cfg.seed)
    polys = random_field(rng, L, 4)
    polys.update(_bindings(cfg.fields, L))
    varied = [f.name for f in L.varied]
    variations = [random_field(rng, L, 2, names=varied) for _ in range(cfg.variations)]
    study = ibp_study(L, grid, AnalyticField.from_polys(polys), variations,
                      levels=cfg.levels, eps=cfg.eps)
    rows = study.rows()
    ok = study.passed(*ORDER_WINDOW)
    res_order = None
    if cfg.solution:
        sol = polys | _bindings(cfg.solution, L)
        res_rows = residual_study(derive_all(L), grid, AnalyticField.from_polys(sol),
                                  levels=cfg.levels, constants=L.constants)
        rows += res_rows
        res_order = convergence_order([r.h for r in res_rows], [r.error for r in res_rows])
        ok = ok and _within(res_order)

    if cfg.fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# seed: {cfg.seed}\n")
        write_csv(rows, buf)
        _emit(cfg, buf.getvalue())
    elif cfg.fmt == "json":
        _emit(cfg, _json({
            "seed": cfg.seed, "variations": cfg.variations, "levels": cfg.levels,
            "ibp_order": study.order, "ibp_orders": study.orders,
            "residual_order": res_order, "passed": ok,
            "rows": [r.__dict__ for r in rows]}))
    else:
        lines = [f"seed: {cfg.seed}", f"variations: {cfg.variations}",
                 f"{'study':<9} {'h':>10} {'value':>14} {'error':>12} {'order':>7}"]
        for r in rows:
            o = "" if r.estimated_order is None else f"{r.estimated_order:7.3f}"
            lines.append(f"{r.study:<9} {r.h:10.5f} {r.value:14.6e} {r.error:12.4e} {o:>7}")
        lines.append(f"ibp order: {study.order:.4f} (per-variation "
                     f"{min(study.orders):.3f}..{max(study.orders):.3f})")
        if res_order is not None:
            lines.append(f"residual order: {res_order:.4f}")
        lines.append("PASS" if ok else "FAIL")
        _emit(cfg, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_demo_em(cfg: RunConfig) -> int:
    targets = None
    if cfg.targets:
        try:
            targets = json.loads(_read(cfg.targets))
        except json.JSONDecodeError as exc:
            raise _Failure(f"{cfg.targets}: invalid JSON: {exc}") from None
    try:
        system = em.build_em_system(targets)
    except (KeyError, TypeError) as exc:
        raise _Failure(f"{cfg.targets}: malformed targets: missing or bad entry {exc}") from None
    report = em.verify_em(system)
    if cfg.fmt == "json":
        _emit(cfg, _json(report.to_json()))
    else:
        color = not cfg.out and _use_color(sys.stdout)
        _emit(cfg, report.to_text(color=color))
    return EXIT_OK if report.ok else EXIT_FAIL


COMMANDS = {"derive": cmd_derive, "transform": cmd_transform,
            "check": cmd_check, "demo-em": cmd_demo_em}


# -- argument parsing ------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors are validation failures (exit 1); 2 is reserved for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="varfield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("text", "json")):
        p.add_argument("--format", choices=formats, default="text")
        p.add_argument("--out", help="write to this file instead of stdout")

    def grid(p):
        p.add_argument("--nt", type=int, default=9, help="time nodes on the coarsest grid")
        p.add_argument("--nx", type=int, default=9, help="nodes per space axis on the coarsest grid")
        p.add_argument("--levels", type=int, default=3, help="refinement levels (>= 3)")

    p = sub.add_parser("derive", help="print the Euler-Lagrange equations of a .lag file")
    p.add_argument("lagrangian")
    common(p)

    p = sub.add_parser("transform", help="rewrite a .lag file under a .map transformation")
    p.add_argument("lagrangian")
    p.add_argument("map")
    p.add_argument("--det-sign", type=int, choices=(-1, 1), dest="det_sign")
    p.add_argument("--solution", action="append", metavar="NAME=EXPR",
                   help="exact solution; adds an equivalence report")
    p.add_argument("--trial", action="append", metavar="NAME=EXPR",
                   help="field used for the action comparison (default: the solution)")
    grid(p)
    common(p)

    p = sub.add_parser("check", help="integration-by-parts and residual refinement study")
    p.add_argument("lagrangian")
    grid(p)
    p.add_argument("--eps", type=float, help="central-difference step for delta S")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--variations", type=int, default=20)
    p.add_argument("--psi", action="append", metavar="NAME=EXPR",
                   help="base field (default: seeded random quartic)")
    p.add_argument("--solution", action="append", metavar="NAME=EXPR",
                   help="exact solution; adds a residual study")
    common(p, ("text", "json", "csv"))

    p = sub.add_parser("demo-em", help="derive and verify the Maxwell equations")
    p.add_argument("--targets", help="target equations JSON (default: bundled)")
    common(p)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig.from_args(ns)
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VarfieldError as exc:
        where = getattr(exc, "path", None)
        prefix = f"{where}: " if where else ""
        print(f"error: {prefix}{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

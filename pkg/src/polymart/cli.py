"""Command-line front end: ``polymart {build,check,ortho,sim,report}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import checks as ck
from .algebra import as_rational
from .errors import (
    CertificationFailed,
    DegenerateTriple,
    HypothesisViolated,
    InsufficientMoments,
    NonPolynomialTime,
    NotConstant,
    PolymartError,
)
from .martingale import build_family
from .model import levy_check, parse_model, parse_model_spec
from .orthopoly import marginal_orthogonal, transitional_orthogonal
from .report import CheckReport
from .simkit import DEFAULT_PATHS, DEFAULT_ZMAX, mc_martingale_test, mc_moment_check, sample_paths

CHECK_ORDER = ("ii", "levy", "reversed", "ortho", "cgs", "harness", "qh", "m2")
EXIT_PASS, EXIT_FAIL, EXIT_DEGENERATE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    model_file: str | None = None
    N: int = 6
    triples: list[list[str]] = field(default_factory=list)
    checks: list[str] = field(default_factory=list)
    paths: int | None = None
    seed: int | None = None
    zmax: float | None = None
    out: str = "polymart-out"
    format: str = "json"
    extra: dict = field(default_factory=dict)


def _rational(text: str) -> Fraction:
    try:
        return as_rational(text.strip())
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a rational number: {text!r}") from exc


def _tuple(text: str, size: int, what: str) -> tuple[Fraction, ...]:
    parts = text.split(",")
    if len(parts) != size:
        raise UsageError(f"{what} needs {size} comma-separated values, got {text!r}")
    return tuple(_rational(p) for p in parts)


def _triple(text: str) -> tuple[Fraction, Fraction, Fraction]:
    s, t, u = _tuple(text, 3, "--triple")
    if not (0 < s < t < u):
        raise UsageError(f"triple must satisfy 0 < s < t < u, got {text}")
    return s, t, u


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polymart", description="Exact polynomial martingale toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--model", help="builtin name[:param], e.g. wiener or poisson:1/2")
        g.add_argument("--model-file", help="path to a model file")
        sp.add_argument("-N", type=int, default=6, help="family order; moments are kept to order 2N")
        sp.add_argument("--out", default="polymart-out")
        sp.add_argument("--format", choices=["json"], default="json")

    model_args(sub.add_parser("build", help="construct and certify the family"))

    c = sub.add_parser("check", help="run characterization checks")
    model_args(c)
    c.add_argument("--checks", default="", help="comma-separated subset of " + ",".join(CHECK_ORDER))
    c.add_argument("--all", action="store_true", help="run every check in dependency order")
    c.add_argument("--ortho", action="store_true", help="shorthand for --checks ortho")
    c.add_argument("--triple", action="append", default=[], help="s,t,u for the quadratic-harness solve")

    o = sub.add_parser("ortho", help="marginal and transitional orthogonal systems")
    model_args(o)
    o.add_argument("--time", action="append", default=[], help="marginal time (repeatable)")
    o.add_argument("--transitional", action="append", default=[], help="s,y,t (repeatable)")

    m = sub.add_parser("sim", help="Monte Carlo validation")
    model_args(m)
    m.add_argument("--paths", type=int, default=DEFAULT_PATHS)
    m.add_argument("--seed", type=int, default=42)
    m.add_argument("--zmax", type=float, default=DEFAULT_ZMAX)
    m.add_argument("--grid", default="1,2", help="comma-separated ascending times")
    m.add_argument("--workers", type=int, default=1)

    r = sub.add_parser("report", help="aggregate earlier output directories")
    r.add_argument("inputs", nargs="+", help="directories holding summary.json")
    r.add_argument("--out", default="polymart-report")
    r.add_argument("--format", choices=["json"], default="json")
    return p


def _load_model(args):
    order = 2 * args.N
    if args.N < 2:
        raise UsageError("-N must be at least 2")
    if args.model:
        return parse_model_spec(args.model, order)
    try:
        text = Path(args.model_file).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read model file: {exc}") from exc
    return parse_model(text)


def _config(args) -> RunConfig:
    cfg = RunConfig(command=args.command, out=args.out, format=args.format)
    for name in ("model", "model_file", "N", "paths", "seed", "zmax"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


def exit_code(verdicts) -> int:
    verdicts = list(verdicts)
    if "fail" in verdicts:
        return EXIT_FAIL
    if "degenerate" in verdicts:
        return EXIT_DEGENERATE
    return EXIT_PASS


class Bundle:
    """Collects reports and writes them with the embedded configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.items: list[tuple[str, dict]] = []

    def add(self, name: str, payload: dict):
        self.items.append((name, payload))

    def add_report(self, report: CheckReport, name: str | None = None):
        self.add(name or report.check, report.to_dict())

    def write(self) -> int:
        out = Path(self.cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg = asdict(self.cfg)
        rows = []
        for name, payload in self.items:
            doc = dict(payload)
            doc["config"] = cfg
            (out / f"{_slug(name)}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
            rows.append({"name": name, "verdict": payload.get("verdict", "pass"), "level": payload.get("level")})
        code = exit_code(r["verdict"] for r in rows)
        summary = {"config": cfg, "results": rows, "exit_code": code}
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        _print_table(rows)
        return code


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _print_table(rows):
    width = max([len(r["name"]) for r in rows] + [5])
    print(f"{'check':<{width}}  verdict         level")
    for r in rows:
        print(f"{r['name']:<{width}}  {r['verdict']:<14}  {r['level'] or ''}")


def _na(name: str, why: str) -> CheckReport:
    return CheckReport(name, "not-applicable", notes=[why])


def cmd_build(args, cfg: RunConfig) -> int:
    model = _load_model(args)
    bundle = Bundle(cfg)
    try:
        fam = build_family(model, min(args.N, model.max_order))
    except CertificationFailed as exc:
        bundle.add_report(CheckReport("certify", "fail", residuals={f"M_{exc.n}": exc.residual}, notes=[str(exc)]))
        return bundle.write()
    bundle.add_report(CheckReport("certify", "pass", notes=[fam.describe()]))
    doc = fam.to_dict()
    doc["verdict"] = "pass"
    bundle.add("family", doc)
    return bundle.write()


def _guard(name: str, fn) -> CheckReport:
    try:
        return fn()
    except (HypothesisViolated, DegenerateTriple) as exc:
        return CheckReport(name, "degenerate", notes=[f"{type(exc).__name__}: {exc}"])
    except (InsufficientMoments, NonPolynomialTime) as exc:
        return _na(name, f"{type(exc).__name__}: {exc}")


def _cgs_report(fam) -> CheckReport:
    try:
        L, new = ck.constant_gram_schmidt(fam)
    except NotConstant as exc:
        return CheckReport("cgs", "fail", {"order": exc.order}, {"coefficient": exc.coefficient}, [str(exc)])
    constants = {f"L_{i},{j}": v for i, row in enumerate(L) for j, v in enumerate(row) if j <= i}
    ortho = ck.check_orthogonality(new)
    return CheckReport("cgs", ortho.verdict, constants, ortho.residuals, [new.describe()] + ortho.notes[1:])


def _qh_reports(fam, triples) -> list[CheckReport]:
    out = []
    for s, t, u in triples:
        tag = f"{s},{t},{u}"
        rep = _guard("qh", lambda: ck.qh_solve(fam, s, t, u))
        rep.check = f"qh@{tag}"
        if rep.verdict in ("pass", "fail"):
            st = ck.qh_structure_constants(fam)
            closed = ck.qh_closed_form_eval(st, s, t, u)
            for k, v in closed.constants.items():
                if k.startswith("closed"):
                    rep.constants[k] = v
            for k, v in closed.residuals.items():
                rep.notes.append(f"closed-form minus linear-system {k}: {v}")
            rep.notes.extend(closed.notes[1:])
        out.append(rep)
    return out


def cmd_check(args, cfg: RunConfig) -> int:
    requested = [c.strip() for c in args.checks.split(",") if c.strip()]
    if args.ortho:
        requested.append("ortho")
    if args.all:
        requested = list(CHECK_ORDER)
    unknown = [c for c in requested if c not in CHECK_ORDER]
    if unknown or not requested:
        raise UsageError(f"choose checks from {','.join(CHECK_ORDER)}" + (f"; unknown: {unknown}" if unknown else ""))
    triples = [_triple(x) for x in args.triple] or [(Fraction(1), Fraction(2), Fraction(4))]
    cfg.checks = [c for c in CHECK_ORDER if c in requested]
    cfg.triples = [[str(x) for x in tr] for tr in triples]
    model = _load_model(args)
    bundle = Bundle(cfg)
    try:
        fam = build_family(model, min(args.N, model.max_order))
        bundle.add_report(CheckReport("certify", "pass", notes=[fam.describe()]))
    except CertificationFailed as exc:
        bundle.add_report(CheckReport("certify", "fail", residuals={f"M_{exc.n}": exc.residual}, notes=[str(exc)]))
        for c in cfg.checks:
            bundle.add_report(_na(c, "family failed certification"))
        return bundle.write()

    harness_ok = True
    for c in cfg.checks:
        if c == "ii":
            bundle.add_report(ck.check_independent_increments(fam))
        elif c == "levy":
            bundle.add_report(_guard("levy", lambda: levy_check(model)))
        elif c == "reversed":
            for n in range(1, fam.N + 1):
                bundle.add_report(_guard(f"reversed-martingale-{n}", lambda: ck.check_reversed_martingale(fam, n)))
        elif c == "ortho":
            bundle.add_report(_guard("orthogonality", lambda: ck.check_orthogonality(fam)))
        elif c == "cgs":
            bundle.add_report(_guard("cgs", lambda: _cgs_report(fam)))
        elif c == "harness":
            rep = _guard("harness", lambda: ck.check_harness(fam))
            harness_ok = rep.verdict == "pass"
            bundle.add_report(rep)
        elif c in ("qh", "m2"):
            if not harness_ok:
                names = [f"qh@{s},{t},{u}" for s, t, u in triples] if c == "qh" else ["m2-reversed"]
                for name in names:
                    bundle.add_report(_na(name, "harness check failed"))
            elif c == "qh":
                for rep in _qh_reports(fam, triples):
                    bundle.add_report(rep)
            else:
                bundle.add_report(_guard("m2-reversed", lambda: ck.check_m2_reversed(fam)))
    return bundle.write()


def cmd_ortho(args, cfg: RunConfig) -> int:
    model = _load_model(args)
    times = [_rational(x) for x in args.time] or [Fraction(1)]
    conds = [_tuple(x, 3, "--transitional") for x in args.transitional]
    cfg.extra = {"times": [str(t) for t in times], "transitional": [[str(v) for v in c] for c in conds]}
    bundle = Bundle(cfg)
    K = min(args.N, model.max_order // 2)
    for t in times:
        system = marginal_orthogonal(model, t, K)
        bundle.add(f"marginal@{t}", dict(system.to_dict(), verdict="pass"))
    if conds:
        fam = build_family(model, min(args.N, model.max_order))
        for s, y, t in conds:
            system = transitional_orthogonal(fam, s, y, t, fam.N // 2)
            bundle.add(f"transitional@{s},{y},{t}", dict(system.to_dict(), verdict="pass"))
    return bundle.write()


def cmd_sim(args, cfg: RunConfig) -> int:
    if args.paths < 2:
        raise UsageError("--paths must be at least 2")
    model = _load_model(args)
    grid = [_rational(x) for x in args.grid.split(",")]
    cfg.extra = {"grid": [str(g) for g in grid], "workers": args.workers}
    fam = build_family(model, min(args.N, model.max_order))
    batch = sample_paths(model, grid, args.paths, args.seed, workers=args.workers)
    bundle = Bundle(cfg)
    for s, t in zip(grid, grid[1:]):
        for n in range(1, min(3, fam.N - 1) + 1):
            K = min(2, fam.N - n)
            for k, res in enumerate(mc_martingale_test(fam, batch, n, s, t, K=K, z_max=args.zmax)):
                bundle.add(f"mc-martingale-n{n}-k{k}@{s},{t}", res.to_dict())
    for t in grid:
        for n in (1, 2):
            bundle.add(f"mc-moment-n{n}@{t}", mc_moment_check(model, batch, n, t, z_max=args.zmax).to_dict())
    return bundle.write()


def cmd_report(args, cfg: RunConfig) -> int:
    rows = []
    for d in args.inputs:
        path = Path(d) / "summary.json"
        try:
            summary = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
        for r in summary["results"]:
            rows.append(dict(r, name=f"{d}:{r['name']}"))
    cfg.extra = {"inputs": list(args.inputs)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code = exit_code(r["verdict"] for r in rows)
    doc = {"config": asdict(cfg), "results": rows, "exit_code": code}
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _print_table(rows)
    return code


COMMANDS = {"build": cmd_build, "check": cmd_check, "ortho": cmd_ortho, "sim": cmd_sim, "report": cmd_report}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    cfg = _config(args)
    try:
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"polymart: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PolymartError as exc:
        print(f"polymart: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

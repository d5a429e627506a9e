"""Command-line front end: every subcommand writes one JSON report to stdout.

Exit status is 0 on success, 1 when a computation fails and 2 for usage
errors (bad flags, unreadable or malformed input files, values outside an
operation's domain).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ArityError, ParseError, SmalekitError, UsageError

COMPUTED, CLOSED_FORM, INPUT = "computed", "closed-form", "input"


@dataclass
class ScenarioReport:
    """A scenario run: tagged inputs and quantities plus optional checks."""

    scenario: str
    inputs: dict = field(default_factory=dict)
    quantities: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def put(self, name: str, value, provenance: str = COMPUTED) -> None:
        self.quantities[name] = {"value": value, "provenance": provenance}

    def given(self, name: str, value) -> None:
        self.inputs[name] = {"value": value, "provenance": INPUT}

    @property
    def passed(self) -> bool | None:
        return all(self.checks.values()) if self.checks else None

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "inputs": self.inputs, "quantities": self.quantities}
        if self.checks:
            out["checks"] = self.checks
            out["passed"] = self.passed
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        out.update(self.extra)
        return out


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def render_pretty(report: ScenarioReport) -> str:
    lines = [f"scenario: {report.scenario}"]
    rows = [(k, v["value"], v["provenance"]) for k, v in report.inputs.items()]
    rows += [(k, v["value"], v["provenance"]) for k, v in report.quantities.items()]
    width = max((len(r[0]) for r in rows), default=0)
    for name, value, prov in rows:
        shown = value if isinstance(value, str) else json.dumps(value, default=_jsonable)
        lines.append(f"  {name:<{width}}  {shown}  [{prov}]")
    for name, ok in report.checks.items():
        lines.append(f"  {'PASS' if ok else 'FAIL'}  {name}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommands


def _read_germ(path: str):
    from .wirtinger import parse_germ
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read germ file {path}: {exc.strerror}") from exc
    return parse_germ(text)


def cmd_germ(args) -> ScenarioReport:
    from .wirtinger import serialize_germ
    g = _read_germ(args.file)
    rep = ScenarioReport("germ-parse")
    rep.given("file", args.file)
    rep.put("p", g.p)
    rep.put("q", g.q)
    rep.put("base", [[c.real, c.imag] for c in g.base])
    rep.put("holomorphic", g.is_holomorphic())
    rep.put("canonical", serialize_germ(g))
    return rep


def cmd_degree(args) -> ScenarioReport:
    from .degree import DegreeRequest, compute_degree
    g = _read_germ(args.file)
    res = compute_degree(DegreeRequest(g, args.radius, engine=args.engine, seed=args.seed))
    rep = ScenarioReport("degree")
    rep.given("file", args.file)
    rep.given("radius", args.radius)
    rep.given("engine", args.engine)
    rep.put("degree", res.degree)
    rep.extra = res.to_dict()
    return rep


def cmd_germ_index(args) -> ScenarioReport:
    from .rank2 import index_result
    g = _read_germ(args.file)
    res = index_result(g, args.radius, engine=args.engine, seed=args.seed)
    rep = ScenarioReport("germ-index")
    rep.given("file", args.file)
    rep.given("radius", args.radius)
    rep.put("index", res.index)
    rep.put("straight", res.prenormal.straight)
    rep.diagnostics = res.degree.to_dict()
    return rep


def cmd_cp2(args) -> ScenarioReport:
    from .rank2 import cp2_total_index
    res = cp2_total_index(args.radius, seed=args.seed, strict=False)
    rep = ScenarioReport("cp2")
    rep.given("radius", args.radius)
    for label, ind in res.indices.items():
        rep.put(f"index {label}", ind)
    rep.put("total", res.total)
    rep.checks = {"index p0 == -1": res.indices["p0"] == -1, "total == -3": res.total == -3,
                  **res.relations}
    rep.diagnostics = res.details
    return rep


def cmd_bundle(args) -> ScenarioReport:
    from . import bundlemaps as bm
    bmap = bm.pi_eps(args.k, args.eps)
    rep = ScenarioReport(f"bundle-{args.action}")
    rep.given("k", args.k)
    rep.given("eps", args.eps)
    if args.action == "locus":
        pts = bm.rank2_locus(bmap, seed=args.seed)
        rep.put("points", [{k: v for k, v in p.to_dict().items() if k != "diagnostics"} for p in pts])
        rep.diagnostics = {f"{p.chart}": p.diagnostics for p in pts}
    elif args.action == "sigma2":
        total = bm.sharp_sigma2(bmap, seed=args.seed)
        rep.put("sharp_sigma2", total)
        if args.k % 2 == 0 and args.eps > 0:
            n = args.k // 2
            rep.put("expected", 4 * n * n - 1, CLOSED_FORM)
            rep.checks = {"sharp_sigma2 == 4n^2 - 1": total == 4 * n * n - 1}
    elif args.action == "transition":
        tr = bm.transition_check(bmap, seed=args.seed)
        rep.put("residual", tr.residual)
        rep.checks = {"transition residual < tol": tr.passed}
        rep.diagnostics = tr.to_dict()
    else:
        texts = bm.export_germs(bmap)
        rep.put("germs", texts)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for chart, text in texts.items():
                (out / f"pi_eps_k{args.k}_{chart}.germ").write_text(text + "\n", encoding="utf-8")
            rep.put("written", sorted(str(p) for p in out.glob(f"pi_eps_k{args.k}_*.germ")))
    return rep


def cmd_gn(args) -> ScenarioReport:
    from .invariants import omega_gn
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if not 0 < args.eps < 0.25:
        raise UsageError("--eps must lie in (0, 1/4)")
    r = omega_gn(args.n, args.eps, formula=args.formula, seed=args.seed)
    n = args.n
    rep = ScenarioReport("gn")
    rep.given("n", n)
    rep.given("eps", args.eps)
    rep.given("formula", args.formula)
    # D and sigma are the closed-form topological inputs of the pipeline
    rep.put("D", r.D, CLOSED_FORM)
    rep.put("sigma", r.sigma, CLOSED_FORM)
    rep.put("sharp_sigma2", r.sharp_sigma2, r.sharp_sigma2_source)
    derived = COMPUTED if r.sharp_sigma2_source == COMPUTED else CLOSED_FORM
    rep.put("H", r.H, derived)
    rep.put("omega", list(r.omega.as_tuple()), derived)
    rep.put("stabilized", r.stabilized, derived)
    rep.put("stem", {"value": r.stem.value, "z8": r.stem.z8_part, "z3": r.stem.z3_part}, derived)
    rep.put("generator", r.generator, derived)
    rep.checks = {
        "omega == (4n-1, (n-1)^2)": r.omega.as_tuple() == (4 * n - 1, (n - 1) ** 2),
        "stem == 2n^2+1 mod 24": r.stem.value == (2 * n * n + 1) % 24,
        "generator iff 3 | n": r.generator == (n % 3 == 0),
    }
    return rep


def cmd_stem(args) -> ScenarioReport:
    from .invariants import is_generator, stem_class
    c = stem_class(args.H, args.mu)
    rep = ScenarioReport("stem")
    rep.given("H", args.H)
    rep.given("mu", args.mu)
    rep.put("value", c.value, CLOSED_FORM)
    rep.put("z8", c.z8_part, CLOSED_FORM)
    rep.put("z3", c.z3_part, CLOSED_FORM)
    rep.put("generator", is_generator(c), CLOSED_FORM)
    return rep


def cmd_smale(args) -> ScenarioReport:
    from .invariants import smale5_from_H, smale_from_DH, smale_from_filling, stabilize
    rep = ScenarioReport("smale")
    filling = args.chi is not None or args.sigma is not None
    framing = args.degree is not None or args.hdef is not None
    if filling == framing:
        raise UsageError("give either --chi and --sigma, or --degree and --hdef")
    if filling:
        if args.chi is None or args.sigma is None:
            raise UsageError("--chi and --sigma go together")
        rep.given("chi", args.chi)
        rep.given("sigma", args.sigma)
        s = smale_from_filling(args.chi, args.sigma)
    else:
        if args.degree is None or args.hdef is None:
            raise UsageError("--degree and --hdef go together")
        rep.given("D", args.degree)
        rep.given("H", args.hdef)
        s = smale_from_DH(args.degree, args.hdef)
        rep.checks = {"a + 2b == -H/2": stabilize(s) == smale5_from_H(args.hdef)}
    rep.put("omega", list(s.as_tuple()), CLOSED_FORM)
    rep.put("stabilized", stabilize(s), CLOSED_FORM)
    return rep


def cmd_verify_all(args) -> ScenarioReport:
    from .acceptance import CRITERIA, run_criterion
    keys = args.only or [k for k, _, _ in CRITERIA]
    rep = ScenarioReport("verify-all")
    rep.given("criteria", keys)
    results = []
    for key in keys:
        res = run_criterion(key, args.seed)
        print(res.line(), file=sys.stderr, flush=True)
        results.append(res)
        rep.checks[f"[{key}] {res.title}"] = res.passed
    rep.diagnostics = {r.key: r.to_dict() for r in results}
    return rep


# ---------------------------------------------------------------------------
# argument parsing


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    p.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS,
                   help="human-readable table instead of JSON")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="smalekit", parents=[common],
                                     description="Local degrees, rank-2 indices and Smale invariants.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    germ = add("germ", cmd_germ, "validate a germ file and print its canonical form")
    germ.add_argument("action", choices=["parse"])
    germ.add_argument("file")

    deg = add("degree", cmd_degree, "local degree of a germ with an isolated zero")
    deg.add_argument("file")
    deg.add_argument("--radius", type=float, default=0.5)
    deg.add_argument("--engine", choices=["preimage", "pl", "holo", "consensus"], default="consensus")

    gi = add("germ-index", cmd_germ_index, "index of the rank-2 point at the germ's base point")
    gi.add_argument("file")
    gi.add_argument("--radius", type=float, default=0.5)
    gi.add_argument("--engine", choices=["preimage", "pl", "consensus"], default="consensus")

    cp2 = add("cp2", cmd_cp2, "indices of the seven rank-2 points of the CP^2 map")
    cp2.add_argument("--radius", type=float, default=0.2)

    bundle = add("bundle", cmd_bundle, "the perturbed branched cover E(xi_1) -> E(xi_k)")
    bundle.add_argument("--k", type=int, required=True)
    bundle.add_argument("--eps", type=float, default=0.1)
    bundle.add_argument("action", choices=["locus", "sigma2", "transition", "export"])
    bundle.add_argument("--out", help="directory for exported germ files")

    gn = add("gn", cmd_gn, "Smale invariant and stem class of g_n")
    gn.add_argument("--n", type=int, required=True)
    gn.add_argument("--eps", type=float, default=0.1)
    gn.add_argument("--formula", action="store_true", help="use 4n^2-1 instead of computing the locus")

    stem = add("stem", cmd_stem, "stable 3-stem class -(H + 3 mu)/2 mod 24")
    stem.add_argument("--H", type=int, required=True)
    stem.add_argument("--mu", type=int, default=0)

    smale = add("smale", cmd_smale, "Smale invariant from filling data or from (D, H)")
    smale.add_argument("--chi", type=int)
    smale.add_argument("--sigma", type=int)
    smale.add_argument("--degree", type=int)
    smale.add_argument("--hdef", type=int)

    va = add("verify-all", cmd_verify_all, "run every acceptance criterion")
    va.add_argument("--only", nargs="+", metavar="KEY", help="subset of criterion keys")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed = getattr(args, "seed", 0)
    args.pretty = getattr(args, "pretty", False)
    try:
        report = args.func(args)
    except (UsageError, ParseError, ArityError) as exc:
        parser.print_usage(sys.stderr)
        print(f"smalekit: error: {exc}", file=sys.stderr)
        return 2
    except SmalekitError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    if args.pretty:
        print(render_pretty(report))
    else:
        print(json.dumps(report.to_dict(), default=_jsonable, indent=2))
    if args.command == "verify-all" and not report.passed:
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

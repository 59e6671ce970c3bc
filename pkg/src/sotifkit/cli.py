"""Command-line driver: validate, compose, gen, run, classify, threshold, catalog.

Exit codes: 0 success, 1 validation errors / failed checks, 2 usage error,
3 infeasible constraints, 4 io or corruption.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from . import catalog as catalog_mod
from . import ontology as ontology_mod
from . import scenario as scenario_mod
from .classify import TolerableWindow, classify_tc, find_threshold
from .constraints import apply_to_scenario, compose, unconstrained
from .errors import (
    DigestMismatch,
    DocumentSyntaxError,
    EmptyMatrix,
    EmptySamplingRange,
    InfeasibleConstraints,
    NotBracketed,
    NotFound,
    NotSimulatable,
    SotifError,
    ValidationFailed,
)
from .report import has_errors
from .simkernel import SimConfig, SpiReport, simulate
from .testgen import DEFAULT_SEED, TestCase, generate_grid, generate_reduced, load_matrix

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--catalog", default=default, help=f"catalog root (default ${catalog_mod.ENV_VAR} or the bundled corpus)")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else DEFAULT_SEED, help="seed for reduced matrices (default 0)")
    parser.add_argument("--workers", type=int, default=default, help="parallel simulation workers (default: CPU count)")
    parser.add_argument("--json", action="store_true", default=argparse.SUPPRESS if suppress else False, help="machine-readable output")


def build_parser():
    parser = argparse.ArgumentParser(prog="sotifkit", description="Scenario-based SOTIF triggering-condition toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _common(p, suppress=True)
        return p

    p = add("validate", "check an ontology or scenario document")
    p.add_argument("kind", choices=["ontology", "scenario"])
    p.add_argument("file")
    p.add_argument("--ontology", help="ontology file for scenario checks (default: catalog ontology)")

    p = add("compose", "merge triggering conditions into an effective constraint set")
    p.add_argument("--tc", action="append", required=True, metavar="ID")

    p = add("gen", "generate a test matrix")
    p.add_argument("--scenario", required=True)
    p.add_argument("--tc", action="append", default=[], metavar="ID")
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--pairwise", action="store_true")
    p.add_argument("--strength", type=int, default=2)
    p.add_argument("-o", "--output", required=True)

    p = add("run", "simulate every case of a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--traces", help="directory for per-case CSV traces")
    p.add_argument("-o", "--output", help="results file (default stdout)")
    p.add_argument("--dt", type=float, default=SimConfig.dt)
    p.add_argument("--horizon", type=float, default=SimConfig.horizon)

    p = add("classify", "compare triggering-condition results against nominal results")
    p.add_argument("--nominal", required=True)
    p.add_argument("--tc-results", required=True)
    p.add_argument("--windows")
    p.add_argument("--markdown", action="store_true", help="print the markdown rendering")
    p.add_argument("-o", "--output")

    p = add("threshold", "bisect the hazard boundary of one parameter")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--tc", action="append", default=[], metavar="ID")
    p.add_argument("--windows")
    p.add_argument("--set", action="append", default=[], metavar="PARAM=VALUE", help="hold another parameter at VALUE")

    p = add("catalog", "list, add or re-index catalog entries")
    csub = p.add_subparsers(dest="action", required=True)
    c = csub.add_parser("list")
    c.add_argument("--kind", choices=sorted(catalog_mod.KINDS))
    c.add_argument("--odd-tag")
    c.add_argument("--layer-kind", help="only scenarios containing this element kind")
    c = csub.add_parser("add")
    c.add_argument("kind", choices=sorted(catalog_mod.KINDS))
    c.add_argument("file")
    c.add_argument("--id", help="id for ontologies")
    csub.add_parser("rebuild")
    return parser


def _read(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _emit(args, payload, text):
    if args.json:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _catalog(args):
    return catalog_mod.Catalog(args.catalog) if args.catalog else catalog_mod.Catalog()


def _windows(path):
    if path is None:
        return TolerableWindow()
    try:
        return TolerableWindow.loads(_read(path))
    except ValueError as exc:
        raise CliError(f"bad windows file {path}: {exc}", EXIT_INVALID) from None


def cmd_validate(args):
    data = _read(args.file)
    if args.kind == "ontology":
        _, report = ontology_mod.validate_document(data)
    else:
        if args.ontology:
            onto = ontology_mod.load_ontology(_read(args.ontology))
        else:
            onto = _catalog(args).ontology()
        _, report = scenario_mod.validate_document(data, onto)
    failed = has_errors(report)
    text = "\n".join(str(i) for i in report) if report else ""
    if not failed:
        text = (text + "\n" if text else "") + "OK"
    _emit(args, {"ok": not failed, "issues": [i.to_dict() for i in report]}, text)
    return EXIT_INVALID if failed else EXIT_OK


def cmd_compose(args):
    cat = _catalog(args)
    ecs = compose(args.tc, cat.tc_lookup, cat.ontology())
    for w in ecs.warnings:
        print(f"warning: {w}", file=sys.stderr)
    sys.stdout.write(json.dumps(ecs.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _constrained(cat, scenario_id, tc_ids):
    onto = cat.ontology()
    s = cat.get(catalog_mod.SCENARIO, scenario_id)
    if tc_ids:
        ecs = compose(tc_ids, cat.tc_lookup, onto)
        return s, apply_to_scenario(ecs, s, onto)
    return s, unconstrained(s, onto)


def cmd_gen(args):
    cat = _catalog(args)
    _, cs = _constrained(cat, args.scenario, args.tc)
    if args.pairwise:
        matrix = generate_reduced(cs, args.levels, seed=args.seed, strength=args.strength)
    else:
        matrix = generate_grid(cs, args.levels)
    _write(args.output, matrix.dumps())
    _emit(args, {"cases": len(matrix), "output": args.output}, f"{len(matrix)} cases written to {args.output}")
    return EXIT_OK


def _simulate_case(job):
    case, s, cfg, record = job
    trace, report = simulate(case, s, s.function_under_test(), cfg, record=record)
    return case.case_index, (trace.to_csv() if trace is not None else None), report


def cmd_run(args):
    matrix = load_matrix(_read(args.matrix).decode("utf-8"))
    if not len(matrix):
        raise CliError("empty matrix", EXIT_INVALID)
    cat = _catalog(args)
    scenarios = {sid: cat.get(catalog_mod.SCENARIO, sid) for sid in sorted({c.scenario_id for c in matrix})}
    cfg = SimConfig(dt=args.dt, horizon=args.horizon)
    record = args.traces is not None
    jobs = [(c, scenarios[c.scenario_id], cfg, record) for c in matrix]
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_simulate_case, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_simulate_case(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    by_index = {c.case_index: c for c in matrix}
    if record:
        Path(args.traces).mkdir(parents=True, exist_ok=True)
    lines = []
    for index, csv_text, report in results:
        if record:
            _write(Path(args.traces) / f"case_{index:05d}.csv", csv_text)
        lines.append(json.dumps({**by_index[index].to_dict(), "spi": report.to_dict()}) + "\n")
    _write(args.output, "".join(lines))
    if args.output:
        _emit(args, {"cases": len(lines), "output": args.output}, f"{len(lines)} results written to {args.output}")
    return EXIT_OK


def load_results(text):
    runs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            runs.append((TestCase.from_dict(raw), SpiReport.from_dict(raw["spi"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise DocumentSyntaxError(f"malformed results line: {exc}", line=lineno) from None
    return runs


def cmd_classify(args):
    nominal = load_results(_read(args.nominal).decode("utf-8"))
    tc_runs = load_results(_read(args.tc_results).decode("utf-8"))
    result = classify_tc(nominal, tc_runs, _windows(args.windows))
    if args.output:
        _write(args.output, json.dumps(result.to_dict(), indent=2) + "\n")
    if args.markdown and not args.json:
        sys.stdout.write(result.to_markdown())
    else:
        sys.stdout.write(json.dumps(result.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_threshold(args):
    cat = _catalog(args)
    s, cs = _constrained(cat, args.scenario, args.tc)
    fixed = {p: d.transform(0.5 * (d.interval[0] + d.interval[1])) for p, d in cs.domains.items()}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects PARAM=VALUE, got {item!r}", EXIT_USAGE)
        try:
            fixed[key] = float(value)
        except ValueError:
            raise CliError(f"--set value for {key} is not a number", EXIT_USAGE) from None
    fixed.pop(args.param, None)
    result = find_threshold(args.param, (args.lo, args.hi), fixed, s, s.function_under_test(), _windows(args.windows), args.tol)
    if result.value is None:
        _emit(args, result.to_dict(), result.diagnostic)
        return EXIT_INVALID
    _emit(args, result.to_dict(), f"{args.param} threshold {result.value:.6g} (tol {args.tol:g}, {result.evaluations} simulations)")
    return EXIT_OK


def cmd_catalog(args):
    cat = _catalog(args)
    if args.action == "rebuild":
        entries = cat.rebuild()
    elif args.action == "add":
        try:
            entries = [cat.add(args.kind, _read(args.file), args.id)]
        except ValidationFailed as exc:
            for issue in exc.report:
                print(issue, file=sys.stderr)
            raise CliError(str(exc), EXIT_INVALID) from None
    else:
        entries = cat.list(args.kind, odd_tag=args.odd_tag, layer_kind=args.layer_kind)
    _emit(args, [e.to_dict() for e in entries], "\n".join(f"{e.kind:9} {e.id:28} {e.path}" for e in entries))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "compose": cmd_compose,
    "gen": cmd_gen,
    "run": cmd_run,
    "classify": cmd_classify,
    "threshold": cmd_threshold,
    "catalog": cmd_catalog,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (InfeasibleConstraints, EmptySamplingRange) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DigestMismatch as exc:
        print(f"corrupt: {exc}", file=sys.stderr)
        return EXIT_IO
    except NotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotBracketed, EmptyMatrix, NotSimulatable, DocumentSyntaxError, ValidationFailed) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SotifError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: ``generate`` (synthetic corpora), ``factorize`` (with
optional incremental state), ``verify`` (factorization conditions),
``query`` (evaluate a query file, optionally via rewriting), ``rewrite``
(print the rewritten query), ``tables`` (relational export plus
lossless/FD verification), and ``bench`` (metrics, per-query timings,
and figures).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib.resources import files
from pathlib import Path

from .bench import run_bench, write_report
from .factorize import (
    FactorizationError,
    factorize,
    load_state,
    save_state,
    verify_factorized,
)
from .generate import GenerationError, GeneratorConfig, generate_with_truth
from .rdf import RdfError, load_ntriples, render_term, save_ntriples
from .rewrite import rewrite_query
from .sparql import QueryError, evaluate, parse_query, serialize_query
from .ssn import enumerate_groups
from .tables import (
    TABLE_MODES,
    TableError,
    build_tables,
    build_universal,
    check_fds,
    export_tables,
    local_name,
    verify_lossless,
)
from .vocab import VocabularyError, default_vocabulary, load_vocabulary

_KNOWN_ERRORS = (
    RdfError,
    QueryError,
    VocabularyError,
    FactorizationError,
    TableError,
    GenerationError,
    OSError,
)


def _vocab(args):
    if args.vocab:
        return load_vocabulary(args.vocab)
    return default_vocabulary()


def _status(line: str) -> None:
    print(line)


def cmd_generate(args) -> int:
    config = GeneratorConfig(
        observations=args.observations,
        procedures=args.procedures,
        distinct_values=args.values,
        zipf_s=args.zipf,
        seed=args.seed,
        prefix=args.prefix,
    )
    g, truth = generate_with_truth(config, _vocab(args))
    save_ntriples(g, args.out)
    _status(f"wrote {len(g)} triples to {args.out}")
    if args.truth:
        data = {
            "observations": truth.observations,
            "group_keys": truth.group_keys,
            "measurement_keys": truth.measurement_keys,
            "original_triples": truth.original_triples,
            "factorized_triples": truth.factorized_triples,
            "groups": [
                {
                    "procedure": key.procedure.value,
                    "phenomenon": key.phenomenon.value,
                    "observed_property": key.observed_property.value,
                    "value": key.value.lexical,
                    "unit": key.unit.value,
                    "count": truth.group_counts[key],
                }
                for key in sorted(truth.group_counts, key=lambda k: k.sort_key())
            ],
        }
        with open(args.truth, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")
        _status(f"wrote ground truth to {args.truth}")
    return 0


def cmd_factorize(args) -> int:
    v = _vocab(args)
    g = load_ntriples(getattr(args, "in"))
    prior = load_state(args.prior) if args.prior else None
    result = factorize(g, v, prior=prior)
    save_ntriples(result.graph, args.out)
    _status(
        f"factorized {len(g)} -> {len(result.graph)} triples "
        f"({result.report.groups_minted} new descriptions, "
        f"{result.report.groups_reused} reused)"
    )
    if args.state:
        save_state(result.state, args.state, graph_path=args.out)
        _status(f"wrote state to {args.state}")
    if args.mapping:
        mapped_obs = result.index.mapped_observations()
        with open(args.mapping, "w", encoding="utf-8") as fh:
            fh.write("kind\toriginal\tsurrogate\n")
            for entity in sorted(result.mapping, key=render_term):
                kind = "observation" if entity in mapped_obs else "measurement"
                fh.write(
                    f"{kind}\t{render_term(entity)}\t"
                    f"{render_term(result.mapping[entity])}\n"
                )
        _status(f"wrote mapping to {args.mapping}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(result.report.to_dict(), fh, indent=2)
            fh.write("\n")
        _status(f"wrote report to {args.report}")
    return 0


def _print_bullets(report) -> None:
    for bullet in report.bullets:
        mark = "ok  " if bullet.passed else "FAIL"
        print(f"{mark} {bullet.name}")
        for detail in bullet.details:
            print(f"       {detail}")


def cmd_verify(args) -> int:
    v = _vocab(args)
    g = load_ntriples(args.original)
    state = load_state(args.state)
    g_fact = load_ntriples(args.factorized) if args.factorized else state.graph
    report = verify_factorized(g, g_fact, state.mapping, v)
    _print_bullets(report)
    return 0 if report.ok else 1


def cmd_query(args) -> int:
    v = _vocab(args)
    g = load_ntriples(args.graph)
    with open(args.query, "r", encoding="utf-8") as fh:
        q = parse_query(fh.read())
    if args.factorized:
        rewritten = rewrite_query(q, v)
        solutions = evaluate(rewritten.query, g).renamed(rewritten.rename_back())
    else:
        solutions = evaluate(q, g)
    text = solutions.to_tsv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        _status(f"wrote {len(solutions)} solutions to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_rewrite(args) -> int:
    v = _vocab(args)
    with open(args.query, "r", encoding="utf-8") as fh:
        q = parse_query(fh.read())
    result = rewrite_query(q, v)
    lines = [
        f"# renamed ?{orig} -> ?{fresh}"
        for orig, fresh in sorted(result.substitutions.items())
    ]
    text = "".join(line + "\n" for line in lines) + serialize_query(result.query)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        _status(f"wrote rewritten query to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_tables(args) -> int:
    v = _vocab(args)
    if args.mode in ("factorized", "fct"):
        if not args.factorized:
            raise TableError(f"mode {args.mode} reads a factorized graph: pass --factorized")
        source = load_ntriples(args.factorized)
    else:
        source = load_ntriples(args.graph)
    tables = build_tables(source, v, args.mode)
    tableset = args.tableset or args.mode
    written = export_tables(tables, args.out, tableset)
    _status(f"wrote {len(written)} files to {args.out}")
    if not args.verify:
        return 0
    ok = True
    fd_report = check_fds(tables)
    for check in fd_report.checks:
        hold = "holds" if check.holds else "VIOLATED"
        nf = "3NF" if check.third_normal_form else "not 3NF"
        print(f"fd   {check.fd} [{hold}, {nf}]")
    if args.mode == "universal":
        # the wide table keeps its transitive dependency by design
        ok = fd_report.all_hold
    else:
        ok = fd_report.all_hold and fd_report.all_3nf
        universal = build_universal(load_ntriples(args.graph), v)
        lossless = verify_lossless(universal, tables, args.mode, v)
        print(("ok   " if lossless.ok else "FAIL ") + lossless.summary())
        ok = ok and lossless.ok
    return 0 if ok else 1


def packaged_queries() -> dict[str, str]:
    """The query files shipped with the package (rewritten forms excluded)."""
    out = {}
    for entry in files("ssnfactor").joinpath("data/queries").iterdir():
        if entry.name.endswith(".rq") and not entry.name.endswith("_rewritten.rq"):
            out[entry.name[: -len(".rq")]] = entry.read_text(encoding="utf-8")
    return out


def _load_queries(path: str | None) -> dict[str, str]:
    if path is None:
        return packaged_queries()
    p = Path(path)
    if p.is_dir():
        out = {}
        for child in sorted(p.glob("*.rq")):
            out[child.stem] = child.read_text(encoding="utf-8")
        if not out:
            raise QueryError(f"no .rq files in {path}")
        return out
    return {p.stem: p.read_text(encoding="utf-8")}


def cmd_bench(args) -> int:
    v = _vocab(args)
    g = load_ntriples(args.graph)
    if args.factorized:
        g_fact = load_ntriples(args.factorized)
    else:
        g_fact = factorize(g, v).graph
    queries = _load_queries(args.queries)
    report = run_bench(
        g, g_fact, v, queries,
        reps=args.reps, timeout_s=args.timeout_s, include_cold=not args.no_cold,
    )
    written = write_report(report, args.out)
    if not args.no_figures:
        from .figures import render_report_figures

        index = enumerate_groups(g, v)
        counts: dict[str, int] = {}
        for key, entry in index.groups.items():
            label = f"{key.value.lexical} {local_name(key.unit)}"
            counts[label] = counts.get(label, 0) + len(entry.observations)
        written += render_report_figures(report, args.out, value_counts=counts)
    _status(report.metrics.summary())
    for timing in report.queries:
        flag = "ok" if timing.equivalent else "MISMATCH"
        print(
            f"{timing.name}: {flag}, {timing.original_rows} rows, "
            f"warm {timing.warm_original_s:.4f}s -> {timing.warm_factorized_s:.4f}s"
        )
    _status(f"wrote {len(written)} files to {args.out}")
    return 0 if all(t.equivalent for t in report.queries) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssnfactor",
        description="Factorize observation graphs, rewrite queries, export tables.",
    )
    parser.add_argument("--vocab", help="vocabulary JSON (defaults to the built-in roles)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic observation corpus")
    p.add_argument("--out", required=True, help="output N-Triples path")
    p.add_argument("--observations", type=int, default=1000)
    p.add_argument("--procedures", type=int, default=1)
    p.add_argument("--values", type=int, default=100, help="distinct value levels")
    p.add_argument("--zipf", type=float, default=0.0, help="skew (0 = round-robin)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default="http://ssn.example/")
    p.add_argument("--truth", help="also write the generation ground truth JSON")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("factorize", help="factorize an observation graph")
    p.add_argument("--in", required=True, help="input N-Triples path")
    p.add_argument("--out", required=True, help="output N-Triples path")
    p.add_argument("--prior", help="state JSON from an earlier run (incremental)")
    p.add_argument("--state", help="write the resulting state JSON")
    p.add_argument("--mapping", help="write entity-to-surrogate TSV")
    p.add_argument("--report", help="write the factorization report JSON")
    p.set_defaults(fn=cmd_factorize)

    p = sub.add_parser("verify", help="check factorization conditions")
    p.add_argument("--original", required=True, help="original N-Triples path")
    p.add_argument("--state", required=True, help="state JSON from factorize")
    p.add_argument("--factorized", help="factorized N-Triples (defaults to the state's graph)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("query", help="evaluate a query file against a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out", help="write solutions TSV here instead of stdout")
    p.add_argument(
        "--factorized",
        action="store_true",
        help="the graph is factorized: rewrite first, then restore headers",
    )
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("rewrite", help="rewrite a query for factorized graphs")
    p.add_argument("--query", required=True)
    p.add_argument("--out", help="write the rewritten query here instead of stdout")
    p.set_defaults(fn=cmd_rewrite)

    p = sub.add_parser("tables", help="export relational tables")
    p.add_argument("--graph", required=True, help="original N-Triples path")
    p.add_argument("--factorized", help="factorized N-Triples (for factorized/fct modes)")
    p.add_argument("--mode", required=True, choices=TABLE_MODES)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tableset", help="file prefix (defaults to the mode name)")
    p.add_argument(
        "--verify",
        action="store_true",
        help="check functional dependencies and lossless reconstruction",
    )
    p.set_defaults(fn=cmd_tables)

    p = sub.add_parser("bench", help="metrics, query timings, and figures")
    p.add_argument("--graph", required=True, help="original N-Triples path")
    p.add_argument("--factorized", help="factorized N-Triples (otherwise computed)")
    p.add_argument("--queries", help="query file or directory (defaults to the packaged set)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--timeout-s", type=float, default=None)
    p.add_argument("--no-cold", action="store_true", help="skip cold-parse timings")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Compression metrics and query timings over graph pairs.

Metrics compare an original graph with its factorized form: triple and
node counts, percentage saved, average triples per fully described
observation on each side, and the predicted factorized size
``4*n + 4*k + 3*m`` (n observations, k distinct observation
descriptions, m distinct measurement descriptions), which the measured
count must meet when the factorized graph was produced from exactly
this original.

Query timings run each query against the original graph and its
rewritten form against the factorized graph.  Warm numbers take the
best of ``reps`` repeated evaluations; cold numbers re-parse the graph
from its serialized text first and then time a single evaluation over
the fresh structures.  The timeout is cooperative: it is checked
between evaluations, a run that exceeds it stops further repetitions,
and the row is flagged.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from .rdf import Graph, graph_stats, parse_ntriples, serialize_ntriples
from .rewrite import rewrite_query
from .sparql import evaluate, parse_query
from .ssn import enumerate_groups
from .vocab import Vocabulary


@dataclass(frozen=True)
class MetricsReport:
    original_triples: int
    factorized_triples: int
    observation_count: int
    group_keys: int
    measurement_keys: int
    pct_savings: float
    avg_triples_per_observation_original: float
    avg_triples_per_observation_factorized: float
    original_nodes: int
    factorized_nodes: int
    original_avg_neighbors: float
    factorized_avg_neighbors: float
    expected_factorized_triples: int
    count_law_holds: bool

    def to_dict(self) -> dict:
        return {
            "original_triples": self.original_triples,
            "factorized_triples": self.factorized_triples,
            "observation_count": self.observation_count,
            "group_keys": self.group_keys,
            "measurement_keys": self.measurement_keys,
            "pct_savings": self.pct_savings,
            "avg_triples_per_observation_original": self.avg_triples_per_observation_original,
            "avg_triples_per_observation_factorized": self.avg_triples_per_observation_factorized,
            "original_nodes": self.original_nodes,
            "factorized_nodes": self.factorized_nodes,
            "original_avg_neighbors": self.original_avg_neighbors,
            "factorized_avg_neighbors": self.factorized_avg_neighbors,
            "expected_factorized_triples": self.expected_factorized_triples,
            "count_law_holds": self.count_law_holds,
        }

    def summary(self) -> str:
        return (
            f"{self.original_triples} -> {self.factorized_triples} triples "
            f"({self.pct_savings:.2f}% saved), "
            f"{self.avg_triples_per_observation_original:.2f} -> "
            f"{self.avg_triples_per_observation_factorized:.2f} triples/observation"
        )


def pct_savings(original: int, factorized: int) -> float:
    if original == 0:
        return 0.0
    return 100.0 * (original - factorized) / original


def compute_metrics(g: Graph, g_fact: Graph, v: Vocabulary) -> MetricsReport:
    index = enumerate_groups(g, v)
    n = index.observation_count
    k = len(index.groups)
    m = len({key.measurement_key for key in index.groups})
    expected = 4 * n + 4 * k + 3 * m
    stats_orig = graph_stats(g)
    stats_fact = graph_stats(g_fact)
    return MetricsReport(
        original_triples=len(g),
        factorized_triples=len(g_fact),
        observation_count=n,
        group_keys=k,
        measurement_keys=m,
        pct_savings=pct_savings(len(g), len(g_fact)),
        avg_triples_per_observation_original=len(g) / n if n else 0.0,
        avg_triples_per_observation_factorized=len(g_fact) / n if n else 0.0,
        original_nodes=stats_orig["nodes"],
        factorized_nodes=stats_fact["nodes"],
        original_avg_neighbors=stats_orig["avg_neighbors"],
        factorized_avg_neighbors=stats_fact["avg_neighbors"],
        expected_factorized_triples=expected,
        count_law_holds=len(g_fact) == expected,
    )


@dataclass(frozen=True)
class QueryTiming:
    name: str
    original_rows: int
    factorized_rows: int
    equivalent: bool
    warm_original_s: float
    warm_factorized_s: float
    cold_original_s: float | None = None
    cold_factorized_s: float | None = None
    timed_out: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "original_rows": self.original_rows,
            "factorized_rows": self.factorized_rows,
            "equivalent": self.equivalent,
            "warm_original_s": self.warm_original_s,
            "warm_factorized_s": self.warm_factorized_s,
            "cold_original_s": self.cold_original_s,
            "cold_factorized_s": self.cold_factorized_s,
            "timed_out": self.timed_out,
        }


def _time_once(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def _time_best(fn, reps: int, timeout_s: float | None) -> tuple[float, bool]:
    best = None
    for _ in range(max(1, reps)):
        elapsed = _time_once(fn)
        best = elapsed if best is None else min(best, elapsed)
        if timeout_s is not None and elapsed > timeout_s:
            return best, True
    return best, False


def bench_queries(
    g: Graph,
    g_fact: Graph,
    v: Vocabulary,
    queries: dict[str, str],
    reps: int = 5,
    timeout_s: float | None = None,
    include_cold: bool = True,
) -> list[QueryTiming]:
    """Time every query on both sides and compare their solutions."""
    original_text = serialize_ntriples(g) if include_cold else ""
    factorized_text = serialize_ntriples(g_fact) if include_cold else ""
    rows = []
    for name in sorted(queries):
        q = parse_query(queries[name])
        rewritten = rewrite_query(q, v)
        solutions = evaluate(q, g)
        factorized_solutions = evaluate(rewritten.query, g_fact).renamed(
            rewritten.rename_back()
        )
        equivalent = solutions.same_solutions(factorized_solutions)
        warm_orig, out1 = _time_best(lambda: evaluate(q, g), reps, timeout_s)
        warm_fact, out2 = _time_best(
            lambda: evaluate(rewritten.query, g_fact), reps, timeout_s
        )
        cold_orig = cold_fact = None
        if include_cold:
            g_cold = parse_ntriples(original_text)
            cold_orig = _time_once(lambda: evaluate(q, g_cold))
            g_fact_cold = parse_ntriples(factorized_text)
            cold_fact = _time_once(lambda: evaluate(rewritten.query, g_fact_cold))
        rows.append(
            QueryTiming(
                name=name,
                original_rows=len(solutions),
                factorized_rows=len(factorized_solutions),
                equivalent=equivalent,
                warm_original_s=warm_orig,
                warm_factorized_s=warm_fact,
                cold_original_s=cold_orig,
                cold_factorized_s=cold_fact,
                timed_out=out1 or out2,
            )
        )
    return rows


@dataclass(frozen=True)
class BenchReport:
    metrics: MetricsReport
    queries: tuple[QueryTiming, ...]

    def to_dict(self) -> dict:
        return {
            "metrics": self.metrics.to_dict(),
            "queries": [q.to_dict() for q in self.queries],
        }

    def queries_tsv(self) -> str:
        header = (
            "name\toriginal_rows\tfactorized_rows\tequivalent\t"
            "warm_original_s\twarm_factorized_s\tcold_original_s\t"
            "cold_factorized_s\ttimed_out"
        )

        def cell(x) -> str:
            if x is None:
                return ""
            if isinstance(x, bool):
                return "yes" if x else "no"
            if isinstance(x, float):
                return f"{x:.6f}"
            return str(x)

        lines = [header]
        for q in self.queries:
            lines.append(
                "\t".join(
                    cell(x)
                    for x in (
                        q.name,
                        q.original_rows,
                        q.factorized_rows,
                        q.equivalent,
                        q.warm_original_s,
                        q.warm_factorized_s,
                        q.cold_original_s,
                        q.cold_factorized_s,
                        q.timed_out,
                    )
                )
            )
        return "".join(line + "\n" for line in lines)


def run_bench(
    g: Graph,
    g_fact: Graph,
    v: Vocabulary,
    queries: dict[str, str],
    reps: int = 5,
    timeout_s: float | None = None,
    include_cold: bool = True,
) -> BenchReport:
    return BenchReport(
        metrics=compute_metrics(g, g_fact, v),
        queries=tuple(
            bench_queries(
                g, g_fact, v, queries,
                reps=reps, timeout_s=timeout_s, include_cold=include_cold,
            )
        ),
    )


def write_report(report: BenchReport, out_dir: str | Path) -> list[Path]:
    """Write metrics JSON and the per-query TSV; figures are rendered
    separately so headless use stays dependency-light."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.json"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    tsv_path = out_dir / "queries.tsv"
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write(report.queries_tsv())
    return [metrics_path, tsv_path]

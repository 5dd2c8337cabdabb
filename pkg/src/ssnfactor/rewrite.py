"""Query rewriting from original graphs onto their factorized form.

The factorizer relocates descriptive triples (types, procedures,
properties, values, units) from observation and measurement entities
onto shared surrogate entities, keeps ``result`` links on the original
entities, and bridges the two with ``observationOf`` links.  A query
written against the original graph is translated here so that it runs
against the factorized graph and returns the same solutions.

Each rewrite rule targets one pattern shape over a relocated predicate.
The matched pattern is kept verbatim — its subject variable now binds
the surrogate — and a link pattern joins the surrogate back to the
original entity through a fresh variable.  All other occurrences of the
substituted variable (other patterns, filters, SELECT, ORDER BY) are
renamed to the fresh variable, since elsewhere the query means the
original entity.  The returned substitution map lets callers rename
result headers back before comparing solutions.

Equivalence holds for queries over graphs whose observations all carry
complete descriptions (the shapes the factorizer maps).  Shapes that
are not translated faithfully — concrete subjects on relocated
predicates, variable predicates over described entities, and
measurement-description patterns with no ``result`` pattern anchoring
the measurement variable when that variable is itself observed — are
listed in the package README.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .rdf import Iri, TriplePattern, Variable
from .sparql import (
    AndExpr,
    Bgp,
    Comparison,
    FilterExpr,
    GraphPattern,
    NotExpr,
    OrExpr,
    Query,
    UnionPattern,
    pattern_variables,
    filter_variables,
)
from .vocab import Vocabulary

RULE_OBSERVATION_TYPE = "observation-type"
RULE_PROCEDURE = "procedure"
RULE_PROPERTY = "observed-property"
RULE_MEASUREMENT_TYPE = "measurement-type"
RULE_VALUE = "value"
RULE_UNIT = "unit"
RULE_RESULT = "result"

OBSERVATION_RULES = (RULE_OBSERVATION_TYPE, RULE_PROCEDURE, RULE_PROPERTY)
MEASUREMENT_RULES = (RULE_MEASUREMENT_TYPE, RULE_VALUE, RULE_UNIT)

ALL_RULES = OBSERVATION_RULES + MEASUREMENT_RULES + (RULE_RESULT,)


def match_rule(pattern: TriplePattern, v: Vocabulary) -> str | None:
    """Name of the rewrite rule that applies to ``pattern``, or None."""
    if not isinstance(pattern.subject, Variable):
        return None
    pred = pattern.predicate
    if isinstance(pred, Variable):
        return None
    if pred == v.type_predicate:
        if isinstance(pattern.object, Iri):
            if pattern.object == v.measure_data_class:
                return RULE_MEASUREMENT_TYPE
            if pattern.object in v.observation_classes():
                return RULE_OBSERVATION_TYPE
        return None
    if pred == v.procedure:
        return RULE_PROCEDURE
    if pred == v.observed_property:
        return RULE_PROPERTY
    if pred == v.value:
        return RULE_VALUE
    if pred == v.unit:
        return RULE_UNIT
    if pred == v.result and isinstance(pattern.object, Variable):
        return RULE_RESULT
    return None


@dataclass(frozen=True)
class RuleApplication:
    rule: str
    pattern: TriplePattern
    substituted: tuple[str, ...]


@dataclass(frozen=True)
class RewriteResult:
    query: Query
    substitutions: dict[str, str]  # original variable name -> fresh name
    applied: tuple[RuleApplication, ...]

    def rename_back(self) -> dict[str, str]:
        """Fresh name -> original name, for restoring result headers."""
        return {fresh: orig for orig, fresh in self.substitutions.items()}


class _Namer:
    def __init__(self, used: set[str]):
        self._used = set(used)

    def fresh(self, base: str) -> str:
        name = base
        i = 1
        while name in self._used:
            i += 1
            name = f"{base}{i}"
        self._used.add(name)
        return name


def _walk_bgps(gp: GraphPattern) -> list[Bgp]:
    if isinstance(gp, Bgp):
        return [gp]
    return _walk_bgps(gp.left) + _walk_bgps(gp.right)


def _rename_var(var: Variable, subs: dict[str, str]) -> Variable:
    return Variable(subs[var.name]) if var.name in subs else var


def _rename_pattern(p: TriplePattern, subs: dict[str, str]) -> TriplePattern:
    def sub(t):
        return _rename_var(t, subs) if isinstance(t, Variable) else t

    return TriplePattern(sub(p.subject), sub(p.predicate), sub(p.object))


def _rename_filter(expr: FilterExpr, subs: dict[str, str]) -> FilterExpr:
    if isinstance(expr, Comparison):
        def sub(t):
            return _rename_var(t, subs) if isinstance(t, Variable) else t

        return Comparison(expr.op, sub(expr.left), sub(expr.right))
    if isinstance(expr, AndExpr):
        return AndExpr(tuple(_rename_filter(e, subs) for e in expr.items))
    if isinstance(expr, OrExpr):
        return OrExpr(tuple(_rename_filter(e, subs) for e in expr.items))
    return NotExpr(_rename_filter(expr.item, subs))


def _all_variable_names(q: Query) -> set[str]:
    names = set(pattern_variables(q.pattern)) | set(q.select_vars)
    for bgp in _walk_bgps(q.pattern):
        for f in bgp.filters:
            names |= filter_variables(f)
    names |= {k.var for k in q.order_by}
    return names


def rewrite_query(q: Query, v: Vocabulary) -> RewriteResult:
    """Translate a query over an original graph to its factorized form."""
    if q.star:
        q = replace(
            q, select_vars=tuple(pattern_variables(q.pattern)), star=False
        )

    # First pass: find rule matches and decide the substitution map up
    # front, so fresh names are stable across every branch of the query.
    applications: list[RuleApplication] = []
    substituted: list[str] = []
    for bgp in _walk_bgps(q.pattern):
        for p in bgp.patterns:
            rule = match_rule(p, v)
            if rule is None:
                continue
            assert isinstance(p.subject, Variable)
            names = [p.subject.name]
            if rule == RULE_RESULT:
                assert isinstance(p.object, Variable)
                names.append(p.object.name)
            applications.append(RuleApplication(rule, p, tuple(names)))
            for name in names:
                if name not in substituted:
                    substituted.append(name)

    namer = _Namer(_all_variable_names(q))
    subs = {name: namer.fresh("X" + name) for name in substituted}

    def rebuild(gp: GraphPattern) -> GraphPattern:
        if isinstance(gp, UnionPattern):
            return UnionPattern(rebuild(gp.left), rebuild(gp.right))
        # Anchors: measurement variables already joined to an observation
        # through a result pattern reuse that observation's link pair.
        anchors: dict[str, str] = {}
        for p in gp.patterns:
            if (
                p.predicate == v.result
                and isinstance(p.subject, Variable)
                and isinstance(p.object, Variable)
            ):
                anchors.setdefault(p.object.name, p.subject.name)
        minted: dict[str, tuple[str, str]] = {}
        new_patterns: list[TriplePattern] = []
        for p in gp.patterns:
            rule = match_rule(p, v)
            if rule is None:
                new_patterns.append(_rename_pattern(p, subs))
                continue
            new_patterns.append(p)
            if rule in OBSERVATION_RULES:
                name = p.subject.name
                new_patterns.append(
                    TriplePattern(Variable(subs[name]), v.observation_of, Variable(name))
                )
            elif rule == RULE_RESULT:
                w, m = p.subject.name, p.object.name
                new_patterns.append(
                    TriplePattern(Variable(subs[w]), v.observation_of, Variable(w))
                )
                new_patterns.append(
                    TriplePattern(Variable(subs[w]), v.result, Variable(subs[m]))
                )
            else:
                m = p.subject.name
                if m in anchors:
                    w = anchors[m]
                    pair = (subs[w], w)
                else:
                    if m not in minted:
                        minted[m] = (namer.fresh("Xobs"), namer.fresh("obs"))
                    pair = minted[m]
                bridge, surrogate = pair
                new_patterns.append(
                    TriplePattern(
                        Variable(bridge), v.observation_of, Variable(surrogate)
                    )
                )
                new_patterns.append(
                    TriplePattern(Variable(bridge), v.result, Variable(subs[m]))
                )
        new_filters = tuple(_rename_filter(f, subs) for f in gp.filters)
        return Bgp(tuple(new_patterns), new_filters)

    rewritten = Query(
        select_vars=tuple(subs.get(name, name) for name in q.select_vars),
        pattern=rebuild(q.pattern),
        distinct=q.distinct,
        star=False,
        order_by=tuple(
            replace(k, var=subs.get(k.var, k.var)) for k in q.order_by
        ),
        limit=q.limit,
    )
    return RewriteResult(
        query=rewritten, substitutions=subs, applied=tuple(applications)
    )


def check_structure(original: Query, result: RewriteResult, v: Vocabulary) -> list[str]:
    """Structural laws every rewrite must satisfy; returns violations."""
    problems: list[str] = []
    subs = result.substitutions
    if original.star:
        original = replace(
            original,
            select_vars=tuple(pattern_variables(original.pattern)),
            star=False,
        )

    original_names = _all_variable_names(original)
    for orig, fresh in subs.items():
        if orig not in original_names:
            problems.append(f"substitution for unknown variable ?{orig}")
        if fresh in original_names:
            problems.append(f"fresh name ?{fresh} collides with a query variable")

    expected_select = tuple(subs.get(n, n) for n in original.select_vars)
    if result.query.select_vars != expected_select:
        problems.append("SELECT list was not renamed consistently")
    if (original.distinct, original.limit) != (
        result.query.distinct,
        result.query.limit,
    ):
        problems.append("DISTINCT/LIMIT modifiers changed")

    def compare(orig_gp: GraphPattern, new_gp: GraphPattern) -> None:
        if isinstance(orig_gp, UnionPattern):
            if not isinstance(new_gp, UnionPattern):
                problems.append("UNION shape not preserved")
                return
            compare(orig_gp.left, new_gp.left)
            compare(orig_gp.right, new_gp.right)
            return
        if not isinstance(new_gp, Bgp):
            problems.append("group shape not preserved")
            return
        new_set = set(new_gp.patterns)
        for p in orig_gp.patterns:
            rule = match_rule(p, v)
            if rule is None:
                if _rename_pattern(p, subs) not in new_set:
                    problems.append(f"missing renamed pattern for {p}")
                continue
            if p not in new_set:
                problems.append(f"rule {rule}: matched pattern {p} not kept")
                continue
            sub_name = subs[p.subject.name]
            if rule in OBSERVATION_RULES or rule == RULE_RESULT:
                link = TriplePattern(
                    Variable(sub_name), v.observation_of, Variable(p.subject.name)
                )
                if link not in new_set:
                    problems.append(f"rule {rule}: missing observation link for {p}")
            if rule == RULE_RESULT:
                m_link = TriplePattern(
                    Variable(sub_name), v.result, Variable(subs[p.object.name])
                )
                if m_link not in new_set:
                    problems.append(f"rule {rule}: missing result link for {p}")
            if rule in MEASUREMENT_RULES:
                m_fresh = subs[p.subject.name]
                found = any(
                    np.predicate == v.result
                    and isinstance(np.object, Variable)
                    and np.object.name == m_fresh
                    and isinstance(np.subject, Variable)
                    for np in new_gp.patterns
                )
                if not found:
                    problems.append(
                        f"rule {rule}: measurement variable ?{p.subject.name} "
                        "has no link pair"
                    )

    compare(original.pattern, result.query.pattern)
    return problems

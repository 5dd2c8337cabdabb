import random

import pytest

from oracles import brute_solutions, check_solution_set
from querygen import random_generic_query, random_graph
from ssnfactor.rdf import Blank, Graph, Iri, Literal, Triple, TriplePattern, Variable
from ssnfactor.sparql import (
    AndExpr,
    Bgp,
    Comparison,
    NotExpr,
    OrderKey,
    OrExpr,
    Query,
    QueryError,
    QueryParseError,
    SolutionSet,
    UnionPattern,
    UnsupportedFeatureError,
    eval_filter,
    evaluate,
    parse_query,
    serialize_query,
)

EX = "http://ex.example/"
S = "http://ssn.example/"
P = Iri(EX + "p")
Q = Iri(EX + "q")
A = Iri(EX + "a")
B = Iri(EX + "b")
C = Iri(EX + "c")

V = Variable

EXPECTED_FIXTURE_ROWS = {
    "q01": 2,
    "q02": 3,
    "q03": 2,
    "q04": 3,
    "q05": 6,
    "q06": 3,
    "q07": 2,
    "q08": 3,
    "q09": 6,
    "q10": 6,
    "q11": 6,
    "q12": 3,
}


# -- parsing -----------------------------------------------------------------


def test_parse_simple_bgp():
    q = parse_query(
        f"PREFIX s: <{S}>\n"
        "SELECT ?value ?uom WHERE {\n"
        "  ?obs s:procedure s:LGVI1 .\n"
        "  ?obs s:result ?m .\n"
        "  ?m s:value ?value ;\n"
        "     s:unit ?uom .\n"
        "}\n"
    )
    assert q == Query(
        select_vars=("value", "uom"),
        pattern=Bgp(
            (
                TriplePattern(V("obs"), Iri(S + "procedure"), Iri(S + "LGVI1")),
                TriplePattern(V("obs"), Iri(S + "result"), V("m")),
                TriplePattern(V("m"), Iri(S + "value"), V("value")),
                TriplePattern(V("m"), Iri(S + "unit"), V("uom")),
            )
        ),
    )


def test_parse_a_shorthand_and_object_lists():
    q = parse_query(
        f"PREFIX s: <{S}>\nSELECT ?x WHERE {{ ?x a s:TempObs, s:RainfallObs ; s:value ?v . }}"
    )
    assert q.pattern.patterns == (
        TriplePattern(V("x"), Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type"), Iri(S + "TempObs")),
        TriplePattern(V("x"), Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type"), Iri(S + "RainfallObs")),
        TriplePattern(V("x"), Iri(S + "value"), V("v")),
    )


def test_parse_trailing_semicolon_before_closing_brace():
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{EX}p> ?y ; }}")
    assert len(q.pattern.patterns) == 1


def test_parse_distinct_star_order_limit():
    q = parse_query(
        f"SELECT DISTINCT * WHERE {{ ?x <{EX}p> ?y . }} ORDER BY DESC(?y) ?x LIMIT 5"
    )
    assert q.distinct and q.star
    assert q.select_vars == ()
    assert q.header() == ("x", "y")
    assert q.order_by == (OrderKey("y", descending=True), OrderKey("x"))
    assert q.limit == 5


def test_parse_filter_precedence():
    q = parse_query(
        f"SELECT ?x WHERE {{ ?x <{EX}p> ?y . FILTER(!(?y = 1) && ?y < 5 || ?y > 7) }}"
    )
    (f,) = q.pattern.filters
    assert f == OrExpr(
        (
            AndExpr(
                (
                    NotExpr(Comparison("=", V("y"), Literal("1"))),
                    Comparison("<", V("y"), Literal("5")),
                )
            ),
            Comparison(">", V("y"), Literal("7")),
        )
    )


def test_parse_union_of_groups():
    q = parse_query(
        f"SELECT ?x WHERE {{ {{ ?x <{EX}p> ?y . }} UNION {{ ?x <{EX}q> ?y . }} UNION {{ ?x <{EX}r> ?y . }} }}"
    )
    assert isinstance(q.pattern, UnionPattern)
    assert isinstance(q.pattern.left, UnionPattern)
    assert isinstance(q.pattern.right, Bgp)


def test_parse_numbers_as_plain_literals():
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{EX}p> 21.0 . FILTER(?x != -3) }}")
    assert q.pattern.patterns[0].object == Literal("21.0")
    (f,) = q.pattern.filters
    assert f.right == Literal("-3")


def test_parse_comments_are_ignored():
    q = parse_query(
        "# heading comment\n"
        f"SELECT ?x # trailing\nWHERE {{ ?x <{EX}p> ?y . # mid\n}}"
    )
    assert q.select_vars == ("x",)


def test_parse_string_literal_objects():
    q = parse_query(f'SELECT ?x WHERE {{ ?x <{EX}p> "w\\"x\\n" . }}')
    assert q.pattern.patterns[0].object == Literal('w"x\n')


def test_parse_bgp_deduplicates_patterns():
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{EX}p> ?y . ?x <{EX}p> ?y . }}")
    assert len(q.pattern.patterns) == 1


def test_duplicate_pattern_different_variables_kept():
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{EX}p> ?y . ?x <{EX}p> ?z . }}")
    assert len(q.pattern.patterns) == 2


@pytest.mark.parametrize(
    "text",
    [
        "SELECT ?x WHERE { ?x <http://e/p> ?y . OPTIONAL { ?x <http://e/q> ?z } }",
        "SELECT ?x WHERE { ?x <http://e/p> ?y . } GROUP BY ?x",
        "SELECT REDUCED ?x WHERE { ?x <http://e/p> ?y . }",
        "ASK { ?x <http://e/p> ?y . }",
        "SELECT ?x WHERE { ?x <http://e/p> ?y . FILTER(regex(?y, \"a\")) }",
        "SELECT ?x WHERE { ?x <http://e/p> ?y . BIND(?y AS ?z) }",
        "SELECT ?x WHERE { ?x <http://e/p> ?y . } OFFSET 2",
        "SELECT (COUNT(?x) AS ?n) WHERE { ?x <http://e/p> ?y . }",
    ],
)
def test_unsupported_features_are_named(text):
    with pytest.raises(UnsupportedFeatureError):
        parse_query(text)


def test_mixing_union_and_loose_triples_is_unsupported():
    with pytest.raises(UnsupportedFeatureError):
        parse_query(
            "SELECT ?x WHERE { { ?x <http://e/p> ?y . } UNION { ?x <http://e/q> ?y . } ?x <http://e/r> ?z . }"
        )
    with pytest.raises(UnsupportedFeatureError):
        parse_query(
            "SELECT ?x WHERE { ?x <http://e/p> ?y . UNION { ?x <http://e/q> ?y . } }"
        )
    # a group opening after loose triples is a plain parse error
    with pytest.raises(QueryParseError):
        parse_query(
            "SELECT ?x WHERE { ?x <http://e/p> ?y . { ?x <http://e/q> ?y . } UNION { ?x <http://e/r> ?y . } }"
        )


def test_parse_error_carries_position():
    with pytest.raises(QueryParseError) as err:
        parse_query("SELECT ?x WHERE {\n  ?x <http://e/p> .\n}")
    assert err.value.line == 2
    assert err.value.column > 1


def test_unknown_prefix_is_an_error():
    with pytest.raises(QueryParseError):
        parse_query("SELECT ?x WHERE { ?x s:p ?y . }")


def test_selected_variable_must_occur_in_pattern():
    with pytest.raises(QueryError) as err:
        parse_query("SELECT ?nope WHERE { ?x <http://e/p> ?y . }")
    assert "?nope" in str(err.value)


def test_order_by_variable_must_be_selected():
    with pytest.raises(QueryError):
        parse_query("SELECT ?x WHERE { ?x <http://e/p> ?y . } ORDER BY ?y")


# -- solution sets -----------------------------------------------------------


def test_solution_set_same_solutions_ignores_header_order():
    a = SolutionSet(("x", "y"), ((A, B),))
    b = SolutionSet(("y", "x"), ((B, A),))
    assert a.same_solutions(b)
    c = SolutionSet(("x", "y"), ((A, C),))
    assert not a.same_solutions(c)
    d = SolutionSet(("x", "z"), ((A, B),))
    assert not a.same_solutions(d)


def test_solution_set_renamed():
    s = SolutionSet(("Xobs", "v"), ((A, B),))
    renamed = s.renamed({"Xobs": "obs"})
    assert renamed.header == ("obs", "v")
    assert renamed.rows == s.rows


def test_solution_set_tsv():
    s = SolutionSet(("x", "y"), ((A, None), (Literal("a\tb"), B)))
    assert s.to_tsv() == (
        "?x\t?y\n"
        f"<{EX}a>\t\n"
        f'"a\\tb"\t<{EX}b>\n'
    )


def test_solution_set_row_dicts():
    s = SolutionSet(("x", "y"), ((A, None),))
    assert s.row_dicts() == [{"x": A, "y": None}]


# -- filters -----------------------------------------------------------------


def test_filter_numeric_comparisons_use_decimal():
    b = {"v": Literal("2.0")}
    assert eval_filter(Comparison("=", V("v"), Literal("2")), b)
    assert eval_filter(Comparison("<=", V("v"), Literal("10")), b)
    assert not eval_filter(Comparison(">", V("v"), Literal("10")), b)
    assert eval_filter(Comparison("<", Literal("9.5"), Literal("10")), {})


def test_filter_term_equality_for_non_numeric():
    assert eval_filter(Comparison("=", A, A), {})
    assert not eval_filter(Comparison("=", A, B), {})
    assert eval_filter(Comparison("!=", A, Literal("x")), {})
    assert eval_filter(Comparison("=", Literal("x"), Literal("x")), {})


def test_filter_order_comparison_on_non_numeric_is_false():
    assert not eval_filter(Comparison("<", Literal("abc"), Literal("abd")), {})
    assert not eval_filter(Comparison("<", A, B), {})
    assert not eval_filter(Comparison(">=", Literal("x"), Literal("1")), {})


def test_filter_unbound_variable_is_false():
    expr = Comparison("=", V("missing"), V("missing"))
    assert not eval_filter(expr, {})


def test_filter_nan_literal_is_not_numeric():
    assert eval_filter(Comparison("=", Literal("NaN"), Literal("NaN")), {})
    assert not eval_filter(Comparison("<", Literal("NaN"), Literal("1")), {})
    assert not eval_filter(Comparison("=", Literal("NaN"), Literal("0")), {})


def test_filter_boolean_structure():
    t = Comparison("=", Literal("1"), Literal("1"))
    f = Comparison("=", Literal("1"), Literal("2"))
    assert eval_filter(AndExpr((t, t)), {})
    assert not eval_filter(AndExpr((t, f)), {})
    assert eval_filter(OrExpr((f, t)), {})
    assert not eval_filter(OrExpr((f, f)), {})
    assert eval_filter(NotExpr(f), {})


# -- evaluation --------------------------------------------------------------


@pytest.fixture
def chain_graph():
    g = Graph()
    g.add(Triple(A, P, B))
    g.add(Triple(B, P, C))
    g.add(Triple(A, Q, Literal("5")))
    g.add(Triple(B, Q, Literal("10")))
    g.add(Triple(C, Q, Literal("9.5")))
    return g


def test_evaluate_join(chain_graph):
    q = parse_query(f"SELECT ?x ?z WHERE {{ ?x <{EX}p> ?y . ?y <{EX}p> ?z . }}")
    got = evaluate(q, chain_graph)
    assert got.rows == ((A, C),)


def test_evaluate_dedupes_after_projection(chain_graph):
    q = parse_query(f"SELECT ?y WHERE {{ ?x <{EX}q> ?v . ?x <{EX}p> ?y . }}")
    # without set semantics (A,B) and (B,C) each appear once; project to ?y
    got = evaluate(q, chain_graph)
    assert got.rows == ((B,), (C,))


def test_evaluate_union_pads_unshared_variables(chain_graph):
    q = parse_query(
        f"SELECT ?x ?v WHERE {{ {{ ?x <{EX}p> ?x2 . }} UNION {{ ?m <{EX}q> ?v . }} }}"
    )
    rows = set(evaluate(q, chain_graph).rows)
    assert (A, None) in rows and (B, None) in rows
    assert (None, Literal("5")) in rows
    assert len(rows) == 5


def test_evaluate_canonical_order_is_numeric_for_literals(chain_graph):
    q = parse_query(f"SELECT ?v WHERE {{ ?x <{EX}q> ?v . }}")
    got = evaluate(q, chain_graph)
    assert got.rows == ((Literal("5"),), (Literal("9.5"),), (Literal("10"),))


def test_evaluate_order_by_desc_with_limit(chain_graph):
    q = parse_query(
        f"SELECT ?x ?v WHERE {{ ?x <{EX}q> ?v . }} ORDER BY DESC(?v) LIMIT 2"
    )
    got = evaluate(q, chain_graph)
    assert got.rows == ((B, Literal("10")), (C, Literal("9.5")))


def test_evaluate_limit_zero(chain_graph):
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{EX}p> ?y . }} LIMIT 0")
    assert evaluate(q, chain_graph).rows == ()


def test_evaluate_canonical_order_none_blank_iri_literal():
    g = Graph()
    g.add(Triple(Blank("z"), P, Literal("x")))
    g.add(Triple(A, P, B))
    q = parse_query(
        f"SELECT ?s ?t WHERE {{ {{ ?s <{EX}p> ?o . }} UNION {{ ?o2 <{EX}p> ?t . }} }}"
    )
    got = evaluate(q, g)
    # unbound first, then blanks, then IRIs, then literals in each column
    assert got.rows == (
        (None, B),
        (None, Literal("x")),
        (Blank("z"), None),
        (A, None),
    )


def test_evaluate_deterministic_across_insertion_orders(chain_graph):
    q = parse_query(f"SELECT ?x ?y WHERE {{ ?x <{EX}p> ?y . }}")
    reordered = Graph(sorted(chain_graph.triples(), key=lambda t: -len(t.subject.value)))
    assert evaluate(q, chain_graph).rows == evaluate(q, reordered).rows


def test_evaluate_filter_inside_union_branch(chain_graph):
    q = parse_query(
        f"SELECT ?x WHERE {{ {{ ?x <{EX}q> ?v . FILTER(?v > 6) }} UNION {{ ?x <{EX}p> <{EX}c> . }} }}"
    )
    rows = set(evaluate(q, chain_graph).rows)
    assert rows == {(B,), (C,)}


def test_evaluate_cartesian_and_shared_variable_patterns():
    g = Graph()
    g.add(Triple(A, P, A))
    g.add(Triple(A, P, B))
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{EX}p> ?x . }}")
    assert evaluate(q, g).rows == ((A,),)


def test_evaluate_matches_oracle_on_random_instances():
    rng = random.Random(20240816)
    for _ in range(150):
        g = random_graph(rng, rng.randint(0, 30))
        q = random_generic_query(rng)
        problems = check_solution_set(q, g, evaluate(q, g))
        assert not problems, problems


def test_fixture_queries_row_counts(weather, fixture_queries):
    for name, expected in EXPECTED_FIXTURE_ROWS.items():
        got = evaluate(parse_query(fixture_queries[name]), weather)
        assert len(got.rows) == expected, name


def test_fixture_q01_exact_solutions(weather, fixture_queries):
    got = evaluate(parse_query(fixture_queries["q01"]), weather)
    assert got.header == ("value", "uom")
    assert set(got.rows) == {
        (Literal("20.0"), Iri(S + "cm")),
        (Literal("24.8"), Iri(S + "degF")),
    }


def test_fixture_q06_ordered_prefix(weather, fixture_queries):
    got = evaluate(parse_query(fixture_queries["q06"]), weather)
    assert got.rows == (
        (Iri(S + "obs1"), Literal("2023-07-01T08:00:00Z")),
        (Iri(S + "obs2"), Literal("2023-07-01T09:00:00Z")),
        (Iri(S + "obs3"), Literal("2023-07-01T10:00:00Z")),
    )


def test_fixture_queries_against_oracle(weather, fixture_queries):
    for name in EXPECTED_FIXTURE_ROWS:
        q = parse_query(fixture_queries[name])
        problems = check_solution_set(q, weather, evaluate(q, weather))
        assert not problems, (name, problems)


# -- serialization -----------------------------------------------------------


def test_serialize_roundtrips_fixture_queries(fixture_queries):
    for name, text in fixture_queries.items():
        q = parse_query(text)
        assert parse_query(serialize_query(q)) == q, name


def test_serialize_roundtrips_modifiers():
    text = (
        f"SELECT DISTINCT ?x WHERE {{ {{ ?x <{EX}p> ?y . FILTER(?y > 2 && ?y < 9) }} "
        f"UNION {{ ?x <{EX}q> ?y . }} }} ORDER BY DESC(?x) LIMIT 4"
    )
    q = parse_query(text)
    out = serialize_query(q)
    assert "DISTINCT" in out and "UNION" in out and "FILTER" in out
    assert "ORDER BY DESC(?x)" in out and "LIMIT 4" in out
    assert parse_query(out) == q


def test_serialize_star_header_is_concrete():
    q = parse_query(f"SELECT * WHERE {{ ?x <{EX}p> ?y . }}")
    assert parse_query(serialize_query(q)).header() == ("x", "y")

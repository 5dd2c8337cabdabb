import io
import random

import pytest

from oracles import brute_match
from querygen import random_graph, random_pattern
from ssnfactor.rdf import (
    RDF_TYPE,
    Blank,
    Graph,
    Iri,
    Literal,
    NTriplesParseError,
    RdfError,
    Triple,
    TriplePattern,
    Variable,
    avg_neighbors,
    graph_stats,
    load_ntriples,
    parse_ntriples,
    render_term,
    render_triple,
    save_ntriples,
    serialize_ntriples,
    term_sort_key,
)

EX = "http://ex.example/"
ALICE = Iri(EX + "alice")
BOB = Iri(EX + "bob")
CARA = Iri(EX + "cara")
KNOWS = Iri(EX + "knows")
NAME = Iri(EX + "name")
TYPE = Iri(RDF_TYPE)
PERSON = Iri(EX + "Person")


@pytest.fixture
def people():
    g = Graph()
    g.add(Triple(ALICE, TYPE, PERSON))
    g.add(Triple(ALICE, NAME, Literal("Alice")))
    g.add(Triple(ALICE, KNOWS, BOB))
    g.add(Triple(BOB, TYPE, PERSON))
    g.add(Triple(BOB, NAME, Literal("Bob")))
    g.add(Triple(BOB, KNOWS, ALICE))
    g.add(Triple(BOB, KNOWS, CARA))
    return g


def test_set_semantics(people):
    assert len(people) == 7
    people.add(Triple(ALICE, KNOWS, BOB))
    assert len(people) == 7


def test_contains_and_iter(people):
    assert Triple(ALICE, KNOWS, BOB) in people
    assert Triple(CARA, KNOWS, ALICE) not in people
    assert set(people) == people.triples()


def test_graph_equality(people):
    other = Graph(sorted(people.triples(), key=lambda t: render_triple(t)))
    assert other == people
    other.add(Triple(CARA, TYPE, PERSON))
    assert other != people


def test_rejects_literal_subject():
    g = Graph()
    with pytest.raises(RdfError):
        g.add(Triple(Literal("x"), KNOWS, BOB))


def test_rejects_non_iri_predicate():
    g = Graph()
    with pytest.raises(RdfError):
        g.add(Triple(ALICE, Blank("p"), BOB))
    with pytest.raises(RdfError):
        g.add(Triple(ALICE, Literal("p"), BOB))


def test_nodes_include_literals(people):
    nodes = people.nodes()
    assert ALICE in nodes and CARA in nodes
    assert Literal("Alice") in nodes
    assert KNOWS not in nodes


def test_subjects_accessor(people):
    assert people.subjects() == {ALICE, BOB}
    assert people.subjects(predicate=KNOWS) == {ALICE, BOB}
    assert people.subjects(predicate=KNOWS, object=CARA) == {BOB}
    assert people.subjects(object=PERSON) == {ALICE, BOB}
    assert people.subjects(predicate=Iri(EX + "missing")) == set()


def test_objects_accessor(people):
    assert people.objects(BOB, KNOWS) == {ALICE, CARA}
    assert people.objects(subject=ALICE) == {PERSON, Literal("Alice"), BOB}
    assert people.objects(predicate=TYPE) == {PERSON}
    assert people.objects() == {PERSON, BOB, ALICE, CARA, Literal("Alice"), Literal("Bob")}


def test_predicates_accessor(people):
    assert people.predicates() == {TYPE, NAME, KNOWS}
    assert people.predicates(ALICE) == {TYPE, NAME, KNOWS}
    assert people.predicates(CARA) == set()


def test_molecule(people):
    assert people.molecule(BOB) == {
        Triple(BOB, TYPE, PERSON),
        Triple(BOB, NAME, Literal("Bob")),
        Triple(BOB, KNOWS, ALICE),
        Triple(BOB, KNOWS, CARA),
    }
    assert people.molecule(CARA) == set()


def test_match_triples_every_binding_combination(people):
    v = Variable
    combos = [
        TriplePattern(ALICE, KNOWS, BOB),
        TriplePattern(ALICE, KNOWS, v("o")),
        TriplePattern(ALICE, v("p"), BOB),
        TriplePattern(v("s"), KNOWS, BOB),
        TriplePattern(ALICE, v("p"), v("o")),
        TriplePattern(v("s"), KNOWS, v("o")),
        TriplePattern(v("s"), v("p"), BOB),
        TriplePattern(v("s"), v("p"), v("o")),
    ]
    triples = people.triples()
    for pattern in combos:
        got = set(people.match_triples(pattern))
        concrete = [
            (pattern.subject, lambda t: t.subject),
            (pattern.predicate, lambda t: t.predicate),
            (pattern.object, lambda t: t.object),
        ]
        expected = {
            t
            for t in triples
            if all(isinstance(slot, Variable) or slot == pick(t) for slot, pick in concrete)
        }
        assert got == expected


def test_match_returns_sorted_bindings(people):
    got = people.match(TriplePattern(Variable("s"), KNOWS, Variable("o")))
    assert got == [
        {"s": ALICE, "o": BOB},
        {"s": BOB, "o": ALICE},
        {"s": BOB, "o": CARA},
    ]


def test_match_repeated_variable():
    g = Graph()
    g.add(Triple(ALICE, KNOWS, ALICE))
    g.add(Triple(ALICE, KNOWS, BOB))
    got = g.match(TriplePattern(Variable("x"), KNOWS, Variable("x")))
    assert got == [{"x": ALICE}]


def test_match_concrete_pattern(people):
    assert people.match(TriplePattern(ALICE, KNOWS, BOB)) == [{}]
    assert people.match(TriplePattern(ALICE, KNOWS, CARA)) == []


def test_match_agrees_with_brute_force_oracle():
    rng = random.Random(991)
    for _ in range(150):
        g = random_graph(rng, rng.randint(0, 25))
        pattern = random_pattern(rng)
        got = {frozenset(b.items()) for b in g.match(pattern)}
        assert got == brute_match(list(g.triples()), pattern)


def test_term_sort_key_orders_blanks_iris_literals():
    terms = [Literal("a"), Iri(EX + "z"), Blank("n"), Iri(EX + "a"), Literal("A")]
    ordered = sorted(terms, key=term_sort_key)
    assert ordered == [Blank("n"), Iri(EX + "a"), Iri(EX + "z"), Literal("A"), Literal("a")]


def test_render_term_escapes():
    assert render_term(Literal('say "hi"\n\tdone\\')) == '"say \\"hi\\"\\n\\tdone\\\\"'
    assert render_term(Literal("bell\x01")) == '"bell\\u0001"'
    assert render_term(Iri(EX + "a")) == f"<{EX}a>"
    assert render_term(Blank("b1")) == "_:b1"
    assert render_term(Variable("v")) == "?v"


def test_render_typed_and_language_literals():
    assert (
        render_term(Literal("5", datatype="http://www.w3.org/2001/XMLSchema#int"))
        == '"5"^^<http://www.w3.org/2001/XMLSchema#int>'
    )
    assert render_term(Literal("hi", language="en-GB")) == '"hi"@en-GB'


def test_parse_simple_line():
    g = parse_ntriples(f"<{EX}a> <{EX}p> <{EX}b> .\n")
    assert g.triples() == {Triple(Iri(EX + "a"), Iri(EX + "p"), Iri(EX + "b"))}


def test_parse_skips_comments_and_blank_lines():
    text = (
        "# a comment\n"
        "\n"
        f"  <{EX}a> <{EX}p> \"x\" . # trailing comment\n"
    )
    g = parse_ntriples(text)
    assert len(g) == 1
    assert Triple(Iri(EX + "a"), Iri(EX + "p"), Literal("x")) in g


def test_parse_crlf_lines():
    text = f"<{EX}a> <{EX}p> <{EX}b> .\r\n<{EX}b> <{EX}p> <{EX}c> .\r\n"
    assert len(parse_ntriples(text)) == 2


def test_parse_typed_and_language_literals():
    text = (
        f'<{EX}a> <{EX}p> "5"^^<http://www.w3.org/2001/XMLSchema#int> .\n'
        f'<{EX}a> <{EX}q> "hej"@sv .\n'
    )
    g = parse_ntriples(text)
    assert Triple(Iri(EX + "a"), Iri(EX + "p"), Literal("5", datatype="http://www.w3.org/2001/XMLSchema#int")) in g
    assert Triple(Iri(EX + "a"), Iri(EX + "q"), Literal("hej", language="sv")) in g


def test_parse_string_escapes():
    text = f'<{EX}a> <{EX}p> "tab\\there \\"q\\" \\u0041\\U0001F600\\\\" .\n'
    g = parse_ntriples(text)
    (t,) = g.triples()
    assert t.object == Literal('tab\there "q" A\U0001f600\\')


def test_parse_blank_nodes_before_terminating_dot():
    g = parse_ntriples(f"_:a <{EX}p> _:b.9 .\n_:a <{EX}p> _:c.\n")
    assert Triple(Blank("a"), Iri(EX + "p"), Blank("b.9")) in g
    assert Triple(Blank("a"), Iri(EX + "p"), Blank("c")) in g


@pytest.mark.parametrize(
    "text,line,column",
    [
        (f"<{EX}a> <{EX}p> <{EX}b>\n", 1, 66),  # missing final dot
        (f"\n<{EX}a> \"p\" <{EX}b> .\n", 2, 23),  # literal predicate
        (f'"lit" <{EX}p> <{EX}b> .\n', 1, 1),  # literal subject
        ("<http://unterminated\n", 1, 21),
        (f'<{EX}a> <{EX}p> "open .\n', 1, 52),  # unterminated literal
        (f'<{EX}a> <{EX}p> "bad\\q" .\n', 1, 51),  # invalid escape
        (f'<{EX}a> <{EX}p> "trunc\\u00" .\n', 1, 53),  # non-hex after \u
        (f'<{EX}a> <{EX}p> "big\\U00110000" .\n', 1, 59),  # beyond U+10FFFF
        (f"<{EX}a> <{EX}p> <{EX}b> . junk\n", 1, 69),  # trailing content
        (f"<{EX}a> <{EX}p> @ .\n", 1, 45),  # no such object form
        (f"<{EX}sp ace> <{EX}p> <{EX}b> .\n", 1, 23),  # space inside IRI
    ],
)
def test_parse_error_positions(text, line, column):
    with pytest.raises(NTriplesParseError) as err:
        parse_ntriples(text)
    assert err.value.line == line
    assert err.value.column == column


def test_parse_accepts_bytes_and_streams():
    text = f"<{EX}a> <{EX}p> \"café\" .\n"
    from_str = parse_ntriples(text)
    from_bytes = parse_ntriples(text.encode("utf-8"))
    from_stream = parse_ntriples(io.StringIO(text))
    assert from_str == from_bytes == from_stream


def test_serialize_is_sorted_and_insertion_independent(people):
    text = serialize_ntriples(people)
    lines = text.splitlines()
    assert lines == sorted(lines)
    reordered = Graph(sorted(people.triples(), key=render_triple, reverse=True))
    assert serialize_ntriples(reordered) == text


def test_roundtrip_hand_picked():
    g = Graph()
    g.add(Triple(ALICE, NAME, Literal('weiße "Naïve"\nline\ttwo\\')))
    g.add(Triple(Blank("b1"), KNOWS, Blank("b2")))
    g.add(Triple(ALICE, NAME, Literal("5.5", datatype=EX + "decimal")))
    g.add(Triple(ALICE, NAME, Literal("hello", language="en")))
    g.add(Triple(ALICE, NAME, Literal("\x02control\x1f")))
    assert parse_ntriples(serialize_ntriples(g)) == g


def test_roundtrip_random_graphs():
    rng = random.Random(4242)
    extra = (
        Literal("café au lait"),
        Literal("line\nbreak"),
        Literal('"quoted"'),
        Literal("1.5e3", datatype=EX + "double"),
        Literal("ja", language="de"),
    )
    for _ in range(40):
        g = random_graph(rng, rng.randint(0, 30))
        for _ in range(rng.randint(0, 4)):
            g.add(Triple(rng.choice((ALICE, BOB, Blank("x"))), NAME, rng.choice(extra)))
        text = serialize_ntriples(g)
        back = parse_ntriples(text)
        assert back == g
        assert serialize_ntriples(back) == text


def test_avg_neighbors_hand_computed():
    g = Graph()
    g.add(Triple(ALICE, KNOWS, BOB))
    g.add(Triple(BOB, KNOWS, CARA))
    # alice-{bob}, bob-{alice, cara}, cara-{bob}
    assert avg_neighbors(g) == pytest.approx(4 / 3)
    assert avg_neighbors(Graph()) == 0.0


def test_graph_stats(people):
    stats = graph_stats(people)
    assert stats["triples"] == 7
    assert stats["nodes"] == len(people.nodes())
    assert stats["avg_neighbors"] == pytest.approx(avg_neighbors(people))


def test_save_and_load_files(tmp_path, people):
    path = tmp_path / "g.nt"
    save_ntriples(people, str(path))
    assert load_ntriples(str(path)) == people

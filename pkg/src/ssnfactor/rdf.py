"""RDF data model, N-Triples I/O, and triple-pattern matching.

A graph is a set of triples (subject, predicate, object) under set
semantics: adding a triple twice is a no-op.  Three nested-dict indexes
(SPO, POS, OSP) back constant-time lookups for every bound/unbound
combination of a triple pattern.

Terms are immutable; graphs are built once (single writer) and then
treated as read-only by every consumer.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDF_TYPE = RDF_NS + "type"


@dataclass(frozen=True)
class Iri:
    value: str

    def __repr__(self) -> str:
        return f"Iri({self.value!r})"


@dataclass(frozen=True)
class Blank:
    label: str

    def __repr__(self) -> str:
        return f"Blank({self.label!r})"


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str | None = None
    language: str | None = None

    def __repr__(self) -> str:
        suffix = ""
        if self.datatype:
            suffix = f", dt={self.datatype!r}"
        elif self.language:
            suffix = f", lang={self.language!r}"
        return f"Literal({self.lexical!r}{suffix})"


Term = Union[Iri, Blank, Literal]


@dataclass(frozen=True)
class Variable:
    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


PatternTerm = Union[Iri, Blank, Literal, Variable]


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Iri
    object: Term


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def variables(self) -> list[str]:
        """Variable names in subject, predicate, object order, deduplicated."""
        seen: list[str] = []
        for t in (self.subject, self.predicate, self.object):
            if isinstance(t, Variable) and t.name not in seen:
                seen.append(t.name)
        return seen


class RdfError(ValueError):
    pass


class NTriplesParseError(RdfError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# Term rendering (N-Triples syntax)
# ---------------------------------------------------------------------------

_ESCAPES = {
    "\\": "\\\\",
    '"': '\\"',
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
    "\b": "\\b",
    "\f": "\\f",
}


def _escape_literal(s: str) -> str:
    out = []
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def render_term(t: Term | Variable) -> str:
    """Render a term in N-Triples syntax (variables render as ?name)."""
    if isinstance(t, Iri):
        return f"<{t.value}>"
    if isinstance(t, Blank):
        return f"_:{t.label}"
    if isinstance(t, Literal):
        body = f'"{_escape_literal(t.lexical)}"'
        if t.datatype:
            return f"{body}^^<{t.datatype}>"
        if t.language:
            return f"{body}@{t.language}"
        return body
    if isinstance(t, Variable):
        return f"?{t.name}"
    raise RdfError(f"not a term: {t!r}")


def render_triple(t: Triple) -> str:
    return f"{render_term(t.subject)} {render_term(t.predicate)} {render_term(t.object)} ."


def term_sort_key(t: Term) -> tuple:
    """Total order over terms: blanks, then IRIs, then literals, by rendering."""
    if isinstance(t, Blank):
        return (0, t.label)
    if isinstance(t, Iri):
        return (1, t.value)
    return (2, t.lexical, t.datatype or "", t.language or "")


def triple_sort_key(t: Triple) -> tuple:
    return (term_sort_key(t.subject), term_sort_key(t.predicate), term_sort_key(t.object))


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


class Graph:
    """A set of RDF triples with SPO/POS/OSP indexes."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: set[Triple] = set()
        self._spo: dict[Term, dict[Iri, set[Term]]] = {}
        self._pos: dict[Iri, dict[Term, set[Term]]] = {}
        self._osp: dict[Term, dict[Term, set[Iri]]] = {}
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> None:
        if isinstance(t.subject, Literal):
            raise RdfError(f"literal subject not allowed: {render_triple(t)}")
        if not isinstance(t.predicate, Iri):
            raise RdfError(f"predicate must be an IRI: {render_triple(t)}")
        if t in self._triples:
            return
        self._triples.add(t)
        self._spo.setdefault(t.subject, {}).setdefault(t.predicate, set()).add(t.object)
        self._pos.setdefault(t.predicate, {}).setdefault(t.object, set()).add(t.subject)
        self._osp.setdefault(t.object, {}).setdefault(t.subject, set()).add(t.predicate)

    def add_triple(self, s: Term, p: Iri, o: Term) -> None:
        self.add(Triple(s, p, o))

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self._triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples == other._triples

    def triples(self) -> frozenset[Triple]:
        return frozenset(self._triples)

    def nodes(self) -> set[Term]:
        """All subjects and objects (literals included)."""
        out: set[Term] = set(self._spo)
        out.update(self._osp)
        return out

    def subjects(self, predicate: Iri | None = None, object: Term | None = None) -> set[Term]:
        if predicate is None and object is None:
            return set(self._spo)
        if predicate is not None and object is not None:
            return set(self._pos.get(predicate, {}).get(object, ()))
        if predicate is not None:
            out: set[Term] = set()
            for subs in self._pos.get(predicate, {}).values():
                out.update(subs)
            return out
        return set(self._osp.get(object, {}))

    def objects(self, subject: Term | None = None, predicate: Iri | None = None) -> set[Term]:
        if subject is not None and predicate is not None:
            return set(self._spo.get(subject, {}).get(predicate, ()))
        if predicate is not None:
            return set(self._pos.get(predicate, {}))
        if subject is not None:
            out: set[Term] = set()
            for objs in self._spo.get(subject, {}).values():
                out.update(objs)
            return out
        return set(self._osp)

    def predicates(self, subject: Term | None = None) -> set[Iri]:
        if subject is None:
            return set(self._pos)
        return set(self._spo.get(subject, {}))

    # -- pattern matching ---------------------------------------------------

    def match_triples(self, pattern: TriplePattern) -> Iterator[Triple]:
        """Triples matching the pattern, ignoring repeated-variable constraints."""
        s = pattern.subject if not isinstance(pattern.subject, Variable) else None
        p = pattern.predicate if not isinstance(pattern.predicate, Variable) else None
        o = pattern.object if not isinstance(pattern.object, Variable) else None
        if s is not None and p is not None and o is not None:
            t = Triple(s, p, o)  # type: ignore[arg-type]
            if t in self._triples:
                yield t
            return
        if s is not None and p is not None:
            for obj in self._spo.get(s, {}).get(p, ()):  # type: ignore[arg-type]
                yield Triple(s, p, obj)  # type: ignore[arg-type]
            return
        if p is not None and o is not None:
            for sub in self._pos.get(p, {}).get(o, ()):  # type: ignore[arg-type]
                yield Triple(sub, p, o)  # type: ignore[arg-type]
            return
        if s is not None and o is not None:
            for pred in self._osp.get(o, {}).get(s, ()):
                yield Triple(s, pred, o)  # type: ignore[arg-type]
            return
        if s is not None:
            for pred, objs in self._spo.get(s, {}).items():
                for obj in objs:
                    yield Triple(s, pred, obj)  # type: ignore[arg-type]
            return
        if p is not None:
            for obj, subs in self._pos.get(p, {}).items():
                for sub in subs:
                    yield Triple(sub, p, obj)  # type: ignore[arg-type]
            return
        if o is not None:
            for sub, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield Triple(sub, pred, o)
            return
        yield from self._triples

    def match(self, pattern: TriplePattern) -> list[dict[str, Term]]:
        """Variable bindings for the pattern, in a deterministic order.

        Repeated variables must bind the same term in every position.
        """
        names = pattern.variables()
        out: list[dict[str, Term]] = []
        seen: set[tuple] = set()
        for t in self.match_triples(pattern):
            binding: dict[str, Term] = {}
            ok = True
            for pos_term, value in (
                (pattern.subject, t.subject),
                (pattern.predicate, t.predicate),
                (pattern.object, t.object),
            ):
                if isinstance(pos_term, Variable):
                    if pos_term.name in binding and binding[pos_term.name] != value:
                        ok = False
                        break
                    binding[pos_term.name] = value
            if not ok:
                continue
            key = tuple(term_sort_key(binding[n]) for n in names)
            if key in seen:
                continue
            seen.add(key)
            out.append(binding)
        out.sort(key=lambda b: tuple(term_sort_key(b[n]) for n in names))
        return out

    def molecule(self, subject: Term) -> set[Triple]:
        """All triples sharing the given subject."""
        out: set[Triple] = set()
        for pred, objs in self._spo.get(subject, {}).items():
            for obj in objs:
                out.add(Triple(subject, pred, obj))
        return out


def avg_neighbors(g: Graph) -> float:
    """Mean, over all nodes, of the number of distinct adjacent nodes.

    Adjacency is undirected over the edge set; an empty graph yields 0.0.
    """
    adjacency: dict[Term, set[Term]] = {}
    for t in g:
        adjacency.setdefault(t.subject, set()).add(t.object)
        adjacency.setdefault(t.object, set()).add(t.subject)
    if not adjacency:
        return 0.0
    return sum(len(v) for v in adjacency.values()) / len(adjacency)


def graph_stats(g: Graph) -> dict:
    """Summary statistics: triple count, node count, mean neighbor count."""
    return {
        "triples": len(g),
        "nodes": len(g.nodes()),
        "avg_neighbors": avg_neighbors(g),
    }


# ---------------------------------------------------------------------------
# N-Triples parsing
# ---------------------------------------------------------------------------


class _LineScanner:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def error(self, message: str) -> NTriplesParseError:
        return NTriplesParseError(message, self.lineno, self.pos + 1)

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def skip_ws(self) -> None:
        while not self.eof() and self.text[self.pos] in " \t":
            self.pos += 1

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}, found {self.peek()!r}")
        self.pos += 1

    def _unescape(self, allow_string_escapes: bool) -> str:
        # called after the backslash has been consumed
        ch = self.take()
        if ch in "uU":
            width = 4 if ch == "u" else 8
            hexs = self.text[self.pos : self.pos + width]
            if len(hexs) != width:
                raise self.error(f"truncated \\{ch} escape")
            try:
                point = int(hexs, 16)
            except ValueError:
                raise self.error(f"bad hex in \\{ch} escape: {hexs!r}") from None
            self.pos += width
            if point > 0x10FFFF:
                raise self.error(f"\\{ch} escape beyond U+10FFFF: {hexs!r}")
            return chr(point)
        if allow_string_escapes:
            simple = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
                      '"': '"', "'": "'", "\\": "\\"}
            if ch in simple:
                return simple[ch]
        raise self.error(f"invalid escape \\{ch}")

    def read_iri(self) -> Iri:
        self.expect("<")
        out = []
        while True:
            if self.eof():
                raise self.error("unterminated IRI")
            ch = self.take()
            if ch == ">":
                break
            if ch == "\\":
                out.append(self._unescape(allow_string_escapes=False))
                continue
            if ch in '<"{}|^`' or ord(ch) <= 0x20:
                raise self.error(f"character {ch!r} not allowed in IRI")
            out.append(ch)
        return Iri("".join(out))

    def read_blank(self) -> Blank:
        self.expect("_")
        self.expect(":")
        out = []
        while not self.eof() and (self.peek().isalnum() or self.peek() in "_-."):
            out.append(self.take())
        label = "".join(out).rstrip(".")
        self.pos -= len("".join(out)) - len(label)
        if not label:
            raise self.error("empty blank node label")
        return Blank(label)

    def read_literal(self) -> Literal:
        self.expect('"')
        out = []
        while True:
            if self.eof():
                raise self.error("unterminated string literal")
            ch = self.take()
            if ch == '"':
                break
            if ch == "\\":
                out.append(self._unescape(allow_string_escapes=True))
                continue
            out.append(ch)
        lexical = "".join(out)
        if self.peek() == "^":
            self.expect("^")
            self.expect("^")
            dt = self.read_iri()
            return Literal(lexical, datatype=dt.value)
        if self.peek() == "@":
            self.take()
            tag = []
            while not self.eof() and (self.peek().isalnum() or self.peek() == "-"):
                tag.append(self.take())
            if not tag:
                raise self.error("empty language tag")
            return Literal(lexical, language="".join(tag))
        return Literal(lexical)

    def read_subject(self) -> Term:
        ch = self.peek()
        if ch == "<":
            return self.read_iri()
        if ch == "_":
            return self.read_blank()
        raise self.error(f"expected IRI or blank node subject, found {ch!r}")

    def read_object(self) -> Term:
        ch = self.peek()
        if ch == "<":
            return self.read_iri()
        if ch == "_":
            return self.read_blank()
        if ch == '"':
            return self.read_literal()
        raise self.error(f"expected IRI, blank node, or literal object, found {ch!r}")


def parse_ntriples(source: str | bytes | io.TextIOBase) -> Graph:
    """Parse N-Triples from a string, UTF-8 byte string, or text stream."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    g = Graph()
    for lineno, line in enumerate(text.splitlines(), start=1):
        sc = _LineScanner(line, lineno)
        sc.skip_ws()
        if sc.eof() or sc.peek() == "#":
            continue
        subject = sc.read_subject()
        sc.skip_ws()
        if sc.peek() != "<":
            raise sc.error("expected IRI predicate")
        predicate = sc.read_iri()
        sc.skip_ws()
        obj = sc.read_object()
        sc.skip_ws()
        sc.expect(".")
        sc.skip_ws()
        if not sc.eof() and sc.peek() != "#":
            raise sc.error("trailing content after '.'")
        g.add(Triple(subject, predicate, obj))
    return g


def load_ntriples(path: str) -> Graph:
    with open(path, "rb") as fh:
        return parse_ntriples(fh.read())


def serialize_ntriples(g: Graph) -> str:
    """Serialize in canonical order: lexicographic on rendered (s, p, o)."""
    lines = sorted(render_triple(t) for t in g)
    return "".join(line + "\n" for line in lines)


def save_ntriples(g: Graph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_ntriples(g))

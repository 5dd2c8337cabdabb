"""SPARQL subset: parser, evaluator, and serializer.

Supported: SELECT (star or explicit variables), basic graph patterns
joined by AND (within one group), FILTER with comparisons (=, !=, <,
<=, >, >=) and boolean connectives (&&, ||, !), UNION of groups,
DISTINCT, ORDER BY, LIMIT, PREFIX declarations, and the ``a`` shorthand
for rdf:type.  Everything else (OPTIONAL, aggregates, property paths,
BIND, subqueries, ...) raises :class:`UnsupportedFeatureError` naming
the construct.

Documented subset semantics:

* Results are sets: duplicate solutions collapse, DISTINCT or not.
* Bare numeric tokens in queries (``20.0``) parse as plain literals
  with that lexical form, matching the plain-literal graph convention.
* FILTER comparisons go numeric when both sides parse as decimals;
  otherwise ``=``/``!=`` fall back to term equality and order
  comparisons are type errors, which make the comparison false.
* The solution pipeline is: join, filter, project, deduplicate, order,
  limit.  ORDER BY therefore only sees projected variables, sorts
  unbound first, then blanks, IRIs, and literals (numeric literals
  numerically), and breaks remaining ties lexicographically over the
  whole projected row, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterator, Union as TypingUnion

from .rdf import (
    RDF_TYPE,
    Blank,
    Graph,
    Iri,
    Literal,
    Term,
    TriplePattern,
    Variable,
    render_term,
)


class QueryError(ValueError):
    pass


class QueryParseError(QueryError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnsupportedFeatureError(QueryError):
    def __init__(self, feature: str):
        super().__init__(f"unsupported query feature: {feature}")
        self.feature = feature


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    op: str  # one of = != < <= > >=
    left: TypingUnion[Variable, Term]
    right: TypingUnion[Variable, Term]


@dataclass(frozen=True)
class AndExpr:
    items: tuple["FilterExpr", ...]


@dataclass(frozen=True)
class OrExpr:
    items: tuple["FilterExpr", ...]


@dataclass(frozen=True)
class NotExpr:
    item: "FilterExpr"


FilterExpr = TypingUnion[Comparison, AndExpr, OrExpr, NotExpr]


@dataclass(frozen=True)
class Bgp:
    patterns: tuple[TriplePattern, ...]
    filters: tuple[FilterExpr, ...] = ()

    def __post_init__(self):
        deduped: list[TriplePattern] = []
        for p in self.patterns:
            if p not in deduped:
                deduped.append(p)
        object.__setattr__(self, "patterns", tuple(deduped))


@dataclass(frozen=True)
class UnionPattern:
    left: "GraphPattern"
    right: "GraphPattern"


GraphPattern = TypingUnion[Bgp, UnionPattern]


@dataclass(frozen=True)
class OrderKey:
    var: str
    descending: bool = False


@dataclass(frozen=True)
class Query:
    select_vars: tuple[str, ...]
    pattern: GraphPattern
    distinct: bool = False
    star: bool = False
    order_by: tuple[OrderKey, ...] = ()
    limit: int | None = None

    def header(self) -> tuple[str, ...]:
        if self.star:
            return tuple(pattern_variables(self.pattern))
        return self.select_vars


def pattern_variables(gp: GraphPattern) -> list[str]:
    """Variable names in first-occurrence order."""
    out: list[str] = []

    def walk(node: GraphPattern) -> None:
        if isinstance(node, Bgp):
            for p in node.patterns:
                for name in p.variables():
                    if name not in out:
                        out.append(name)
        else:
            walk(node.left)
            walk(node.right)

    walk(gp)
    return out


def filter_variables(expr: FilterExpr) -> set[str]:
    if isinstance(expr, Comparison):
        return {t.name for t in (expr.left, expr.right) if isinstance(t, Variable)}
    if isinstance(expr, (AndExpr, OrExpr)):
        out: set[str] = set()
        for item in expr.items:
            out |= filter_variables(item)
        return out
    return filter_variables(expr.item)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_PUNCT2 = ("&&", "||", "!=", "<=", ">=")
_PUNCT1 = "{}().,;*=<>!"

_UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "GROUP", "HAVING", "ASK", "CONSTRUCT", "DESCRIBE", "BIND",
    "VALUES", "MINUS", "SERVICE", "EXISTS", "NOT", "REDUCED", "OFFSET",
    "FROM", "NAMED", "INSERT", "DELETE", "LOAD", "BASE", "COUNT", "SUM",
    "AVG", "MIN", "MAX", "SAMPLE", "GRAPH", "REGEX", "BOUND", "STR",
    "LANG", "DATATYPE", "SAMETERM", "ISIRI", "ISLITERAL", "ISBLANK",
}


@dataclass
class _Token:
    kind: str  # IRI, PNAME, VAR, LITERAL, NUMBER, WORD, PUNCT, EOF
    value: object
    line: int
    col: int


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _err(self, msg: str) -> QueryParseError:
        return QueryParseError(msg, self.line, self.col)

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def _skip_ws_and_comments(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            else:
                return

    def _looks_like_iri(self) -> bool:
        # '<' starts an IRI when a '>' follows with no whitespace in between
        i = self.pos + 1
        while i < len(self.text):
            ch = self.text[i]
            if ch == ">":
                return True
            if ch in " \t\r\n":
                return False
            i += 1
        return False

    def tokens(self) -> Iterator[_Token]:
        while True:
            self._skip_ws_and_comments()
            line, col = self.line, self.col
            if self.pos >= len(self.text):
                yield _Token("EOF", "", line, col)
                return
            ch = self.text[self.pos]
            if ch == "<" and self._looks_like_iri():
                yield _Token("IRI", self._read_iri(), line, col)
            elif ch in "?$":
                yield _Token("VAR", self._read_var(), line, col)
            elif ch == '"':
                yield _Token("LITERAL", self._read_literal(), line, col)
            elif ch.isdigit() or (
                ch in "+-" and self._peek(1).isdigit()
            ) or (ch == "." and self._peek(1).isdigit()):
                yield _Token("NUMBER", self._read_number(), line, col)
            else:
                two = self.text[self.pos : self.pos + 2]
                if two in _PUNCT2:
                    self._advance(2)
                    yield _Token("PUNCT", two, line, col)
                elif ch in _PUNCT1:
                    self._advance()
                    yield _Token("PUNCT", ch, line, col)
                elif ch.isalpha() or ch == "_":
                    yield self._read_word(line, col)
                else:
                    raise self._err(f"unexpected character {ch!r}")

    def _read_iri(self) -> Iri:
        self._advance()  # <
        out = []
        while True:
            if self.pos >= len(self.text):
                raise self._err("unterminated IRI")
            ch = self.text[self.pos]
            self._advance()
            if ch == ">":
                return Iri("".join(out))
            out.append(ch)

    def _read_var(self) -> Variable:
        self._advance()  # ? or $
        out = []
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            out.append(self.text[self.pos])
            self._advance()
        if not out:
            raise self._err("empty variable name")
        return Variable("".join(out))

    def _read_literal(self) -> Literal:
        self._advance()  # "
        out = []
        while True:
            if self.pos >= len(self.text):
                raise self._err("unterminated string literal")
            ch = self.text[self.pos]
            self._advance()
            if ch == '"':
                break
            if ch == "\\":
                esc = self.text[self.pos] if self.pos < len(self.text) else ""
                self._advance()
                simple = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
                          '"': '"', "'": "'", "\\": "\\"}
                if esc in simple:
                    out.append(simple[esc])
                elif esc == "u":
                    hexs = self.text[self.pos : self.pos + 4]
                    self._advance(4)
                    out.append(chr(int(hexs, 16)))
                else:
                    raise self._err(f"invalid escape \\{esc}")
                continue
            out.append(ch)
        lexical = "".join(out)
        if self.text[self.pos : self.pos + 2] == "^^":
            self._advance(2)
            if self._peek() != "<":
                raise self._err("expected datatype IRI after ^^")
            return Literal(lexical, datatype=self._read_iri().value)
        if self._peek() == "@":
            self._advance()
            tag = []
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "-"
            ):
                tag.append(self.text[self.pos])
                self._advance()
            return Literal(lexical, language="".join(tag))
        return Literal(lexical)

    def _read_number(self) -> str:
        out = []
        if self._peek() in "+-":
            out.append(self._peek())
            self._advance()
        while self._peek().isdigit():
            out.append(self._peek())
            self._advance()
        if self._peek() == "." and self._peek(1).isdigit():
            out.append(".")
            self._advance()
            while self._peek().isdigit():
                out.append(self._peek())
                self._advance()
        if self._peek() in "eE":
            out.append(self._peek())
            self._advance()
            if self._peek() in "+-":
                out.append(self._peek())
                self._advance()
            while self._peek().isdigit():
                out.append(self._peek())
                self._advance()
        return "".join(out)

    def _read_word(self, line: int, col: int) -> _Token:
        out = []
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_-"
        ):
            out.append(self.text[self.pos])
            self._advance()
        word = "".join(out)
        if self._peek() == ":":  # prefixed name
            self._advance()
            local = []
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] in "_-."
            ):
                local.append(self.text[self.pos])
                self._advance()
            return _Token("PNAME", (word, "".join(local)), line, col)
        return _Token("WORD", word, line, col)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self._stream = _Tokenizer(text).tokens()
        self._buffer: list[_Token] = []
        self.prefixes: dict[str, str] = {}

    def _peek(self, offset: int = 0) -> _Token:
        while len(self._buffer) <= offset:
            self._buffer.append(next(self._stream))
        return self._buffer[offset]

    def _next(self) -> _Token:
        tok = self._peek()
        self._buffer.pop(0)
        return tok

    def _err(self, tok: _Token, msg: str) -> QueryParseError:
        return QueryParseError(msg, tok.line, tok.col)

    def _is_word(self, tok: _Token, word: str) -> bool:
        return tok.kind == "WORD" and isinstance(tok.value, str) and tok.value.upper() == word

    def _expect_word(self, word: str) -> None:
        tok = self._next()
        if not self._is_word(tok, word):
            raise self._err(tok, f"expected {word}")

    def _expect_punct(self, value: str) -> None:
        tok = self._next()
        if tok.kind != "PUNCT" or tok.value != value:
            raise self._err(tok, f"expected {value!r}")

    def _check_unsupported(self, tok: _Token) -> None:
        if tok.kind == "WORD" and isinstance(tok.value, str):
            if tok.value.upper() in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedFeatureError(tok.value.upper())

    def parse(self) -> Query:
        self._parse_prologue()
        tok = self._peek()
        self._check_unsupported(tok)
        self._expect_word("SELECT")
        distinct = False
        if self._is_word(self._peek(), "DISTINCT"):
            self._next()
            distinct = True
        elif self._is_word(self._peek(), "REDUCED"):
            raise UnsupportedFeatureError("REDUCED")
        star = False
        select_vars: list[str] = []
        if self._peek().kind == "PUNCT" and self._peek().value == "*":
            self._next()
            star = True
        else:
            while self._peek().kind == "VAR":
                var = self._next().value
                assert isinstance(var, Variable)
                if var.name not in select_vars:
                    select_vars.append(var.name)
            if self._peek().kind == "PUNCT" and self._peek().value == "(":
                raise UnsupportedFeatureError("expressions in SELECT")
            if not select_vars:
                raise self._err(self._peek(), "SELECT needs variables or *")
        if self._is_word(self._peek(), "WHERE"):
            self._next()
        pattern = self._parse_group()
        order_by, limit = self._parse_modifiers()
        tok = self._peek()
        if tok.kind != "EOF":
            self._check_unsupported(tok)
            raise self._err(tok, f"unexpected trailing content {tok.value!r}")
        q = Query(
            select_vars=tuple(select_vars),
            pattern=pattern,
            distinct=distinct,
            star=star,
            order_by=order_by,
            limit=limit,
        )
        _validate(q)
        return q

    def _parse_prologue(self) -> None:
        while True:
            tok = self._peek()
            if self._is_word(tok, "PREFIX"):
                self._next()
                name_tok = self._next()
                if name_tok.kind != "PNAME" or name_tok.value[1] != "":
                    raise self._err(name_tok, "expected prefix name ending in ':'")
                iri_tok = self._next()
                if iri_tok.kind != "IRI":
                    raise self._err(iri_tok, "expected IRI after prefix name")
                self.prefixes[name_tok.value[0]] = iri_tok.value.value
            elif self._is_word(tok, "BASE"):
                raise UnsupportedFeatureError("BASE")
            else:
                return

    def _resolve(self, tok: _Token) -> Iri:
        prefix, local = tok.value
        if prefix == "a" and local == "":
            # handled by caller for predicate position; elsewhere it is an error
            raise self._err(tok, "'a' is only valid as a predicate")
        if prefix not in self.prefixes:
            raise self._err(tok, f"unknown prefix {prefix!r}")
        return Iri(self.prefixes[prefix] + local)

    def _parse_term(self, position: str) -> Iri | Literal | Variable:
        tok = self._next()
        if tok.kind == "VAR":
            return tok.value  # Variable
        if tok.kind == "IRI":
            return tok.value  # Iri
        if tok.kind == "PNAME":
            return self._resolve(tok)
        if tok.kind == "LITERAL":
            if position == "subject":
                raise self._err(tok, "literal subjects are not allowed")
            return tok.value
        if tok.kind == "NUMBER":
            if position == "subject":
                raise self._err(tok, "literal subjects are not allowed")
            return Literal(str(tok.value))
        if tok.kind == "WORD" and tok.value == "a" and position == "predicate":
            return Iri(RDF_TYPE)
        self._check_unsupported(tok)
        raise self._err(tok, f"expected a term, found {tok.value!r}")

    def _parse_group(self) -> GraphPattern:
        self._expect_punct("{")
        if self._peek().kind == "PUNCT" and self._peek().value == "{":
            # union of groups
            branches = [self._parse_group()]
            while self._is_word(self._peek(), "UNION"):
                self._next()
                branches.append(self._parse_group())
            tok = self._peek()
            if not (tok.kind == "PUNCT" and tok.value == "}"):
                self._check_unsupported(tok)
                raise UnsupportedFeatureError(
                    "mixing grouped patterns with triple patterns in one group"
                )
            self._next()
            if len(branches) == 1:
                return branches[0]
            out: GraphPattern = branches[0]
            for b in branches[1:]:
                out = UnionPattern(out, b)
            return out
        patterns: list[TriplePattern] = []
        filters: list[FilterExpr] = []
        while True:
            tok = self._peek()
            if tok.kind == "PUNCT" and tok.value == "}":
                self._next()
                return Bgp(tuple(patterns), tuple(filters))
            if tok.kind == "EOF":
                raise self._err(tok, "unterminated group (missing '}')")
            if self._is_word(tok, "FILTER"):
                self._next()
                filters.append(self._parse_filter())
                continue
            if self._is_word(tok, "UNION"):
                raise UnsupportedFeatureError(
                    "UNION between a triple block and a group"
                )
            if tok.kind == "WORD":
                self._check_unsupported(tok)
            subject = self._parse_term("subject")
            self._parse_predicate_object_list(subject, patterns)
            if self._peek().kind == "PUNCT" and self._peek().value == ".":
                self._next()

    def _parse_predicate_object_list(
        self, subject, patterns: list[TriplePattern]
    ) -> None:
        while True:
            pred_tok = self._peek()
            predicate = self._parse_term("predicate")
            if isinstance(predicate, (Literal,)):
                raise self._err(pred_tok, "literal predicates are not allowed")
            while True:
                obj = self._parse_term("object")
                patterns.append(TriplePattern(subject, predicate, obj))
                if self._peek().kind == "PUNCT" and self._peek().value == ",":
                    self._next()
                    continue
                break
            if self._peek().kind == "PUNCT" and self._peek().value == ";":
                self._next()
                # allow trailing ';' before '.' or '}'
                nxt = self._peek()
                if nxt.kind == "PUNCT" and nxt.value in (".", "}"):
                    return
                continue
            return

    # -- filters ------------------------------------------------------------

    def _parse_filter(self) -> FilterExpr:
        self._expect_punct("(")
        expr = self._parse_or()
        self._expect_punct(")")
        return expr

    def _parse_or(self) -> FilterExpr:
        items = [self._parse_and()]
        while self._peek().kind == "PUNCT" and self._peek().value == "||":
            self._next()
            items.append(self._parse_and())
        return items[0] if len(items) == 1 else OrExpr(tuple(items))

    def _parse_and(self) -> FilterExpr:
        items = [self._parse_unary()]
        while self._peek().kind == "PUNCT" and self._peek().value == "&&":
            self._next()
            items.append(self._parse_unary())
        return items[0] if len(items) == 1 else AndExpr(tuple(items))

    def _parse_unary(self) -> FilterExpr:
        tok = self._peek()
        if tok.kind == "PUNCT" and tok.value == "!":
            self._next()
            return NotExpr(self._parse_unary())
        if tok.kind == "PUNCT" and tok.value == "(":
            self._next()
            expr = self._parse_or()
            self._expect_punct(")")
            return expr
        if tok.kind == "WORD":
            nxt = self._peek(1)
            if nxt.kind == "PUNCT" and nxt.value == "(":
                self._check_unsupported(tok)
                raise UnsupportedFeatureError(f"filter function {tok.value}()")
        return self._parse_comparison()

    def _parse_comparison(self) -> Comparison:
        left = self._parse_operand()
        tok = self._next()
        if tok.kind != "PUNCT" or tok.value not in ("=", "!=", "<", "<=", ">", ">="):
            raise self._err(tok, f"expected a comparison operator, found {tok.value!r}")
        right = self._parse_operand()
        return Comparison(str(tok.value), left, right)

    def _parse_operand(self) -> TypingUnion[Variable, Term]:
        tok = self._peek()
        if tok.kind == "WORD":
            nxt = self._peek(1)
            if nxt.kind == "PUNCT" and nxt.value == "(":
                self._check_unsupported(tok)
                raise UnsupportedFeatureError(f"filter function {tok.value}()")
        term = self._parse_term("object")
        return term

    # -- solution modifiers --------------------------------------------------

    def _parse_modifiers(self) -> tuple[tuple[OrderKey, ...], int | None]:
        order_by: list[OrderKey] = []
        limit: int | None = None
        if self._is_word(self._peek(), "ORDER"):
            self._next()
            self._expect_word("BY")
            while True:
                tok = self._peek()
                if tok.kind == "VAR":
                    self._next()
                    order_by.append(OrderKey(tok.value.name))
                elif self._is_word(tok, "ASC") or self._is_word(tok, "DESC"):
                    self._next()
                    desc = tok.value.upper() == "DESC"
                    self._expect_punct("(")
                    var_tok = self._next()
                    if var_tok.kind != "VAR":
                        raise self._err(var_tok, "expected a variable in ASC()/DESC()")
                    self._expect_punct(")")
                    order_by.append(OrderKey(var_tok.value.name, descending=desc))
                else:
                    break
            if not order_by:
                raise self._err(self._peek(), "ORDER BY needs at least one variable")
        if self._is_word(self._peek(), "LIMIT"):
            self._next()
            tok = self._next()
            if tok.kind != "NUMBER" or not str(tok.value).isdigit():
                raise self._err(tok, "LIMIT needs a non-negative integer")
            limit = int(str(tok.value))
        return tuple(order_by), limit


def _validate(q: Query) -> None:
    in_pattern = set(pattern_variables(q.pattern))
    if not q.star:
        missing = [v for v in q.select_vars if v not in in_pattern]
        if missing:
            raise QueryError(
                f"selected variable(s) not in pattern: {', '.join('?' + m for m in missing)}"
            )
    header = set(q.header())
    for key in q.order_by:
        if key.var not in header:
            raise QueryError(
                f"ORDER BY variable ?{key.var} must be selected"
            )


def parse_query(text: str) -> Query:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolutionSet:
    """Deduplicated solutions over a fixed header, in deterministic order."""

    header: tuple[str, ...]
    rows: tuple[tuple[Term | None, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def row_dicts(self) -> list[dict[str, Term | None]]:
        return [dict(zip(self.header, row)) for row in self.rows]

    def as_row_set(self) -> frozenset[frozenset]:
        return frozenset(
            frozenset(zip(self.header, row)) for row in self.rows
        )

    def same_solutions(self, other: "SolutionSet") -> bool:
        """Equality as sets of named bindings (header order irrelevant)."""
        return set(self.header) == set(other.header) and self.as_row_set() == other.as_row_set()

    def renamed(self, renames: dict[str, str]) -> "SolutionSet":
        return SolutionSet(
            header=tuple(renames.get(h, h) for h in self.header),
            rows=self.rows,
        )

    def to_tsv(self) -> str:
        lines = ["\t".join("?" + h for h in self.header)]
        for row in self.rows:
            lines.append(
                "\t".join("" if t is None else render_term(t) for t in row)
            )
        return "".join(line + "\n" for line in lines)


def _to_decimal(t: Term | None) -> Decimal | None:
    if isinstance(t, Literal):
        try:
            d = Decimal(t.lexical)
        except InvalidOperation:
            return None
        # NaN literals are not orderable; treat them as plain strings
        return None if d.is_nan() else d
    return None


def _eval_comparison(c: Comparison, binding: dict[str, Term]) -> bool:
    def resolve(x):
        if isinstance(x, Variable):
            return binding.get(x.name)
        return x

    left, right = resolve(c.left), resolve(c.right)
    if left is None or right is None:
        return False
    ln, rn = _to_decimal(left), _to_decimal(right)
    if ln is not None and rn is not None:
        if c.op == "=":
            return ln == rn
        if c.op == "!=":
            return ln != rn
        if c.op == "<":
            return ln < rn
        if c.op == "<=":
            return ln <= rn
        if c.op == ">":
            return ln > rn
        return ln >= rn
    if c.op == "=":
        return left == right
    if c.op == "!=":
        return left != right
    return False  # type error on an order comparison


def eval_filter(expr: FilterExpr, binding: dict[str, Term]) -> bool:
    if isinstance(expr, Comparison):
        return _eval_comparison(expr, binding)
    if isinstance(expr, AndExpr):
        return all(eval_filter(e, binding) for e in expr.items)
    if isinstance(expr, OrExpr):
        return any(eval_filter(e, binding) for e in expr.items)
    return not eval_filter(expr.item, binding)


def _substitute(p: TriplePattern, binding: dict[str, Term]) -> TriplePattern:
    def sub(t):
        if isinstance(t, Variable) and t.name in binding:
            return binding[t.name]
        return t

    return TriplePattern(sub(p.subject), sub(p.predicate), sub(p.object))


def _pattern_bindings(g: Graph, p: TriplePattern) -> Iterator[dict[str, Term]]:
    for t in g.match_triples(p):
        binding: dict[str, Term] = {}
        ok = True
        for pos_term, value in (
            (p.subject, t.subject),
            (p.predicate, t.predicate),
            (p.object, t.object),
        ):
            if isinstance(pos_term, Variable):
                if pos_term.name in binding and binding[pos_term.name] != value:
                    ok = False
                    break
                binding[pos_term.name] = value
        if ok:
            yield binding


def _order_patterns(patterns: tuple[TriplePattern, ...]) -> list[TriplePattern]:
    """Greedy join order: most-bound pattern first, stable on ties."""
    remaining = list(enumerate(patterns))
    bound: set[str] = set()
    out: list[TriplePattern] = []
    while remaining:
        def score(item):
            idx, p = item
            concrete = sum(
                1
                for t in (p.subject, p.predicate, p.object)
                if not isinstance(t, Variable) or t.name in bound
            )
            return (-concrete, idx)

        remaining.sort(key=score)
        idx, best = remaining.pop(0)
        out.append(best)
        bound.update(best.variables())
    return out


def _eval_bgp(g: Graph, bgp: Bgp) -> list[dict[str, Term]]:
    solutions: list[dict[str, Term]] = [{}]
    for pattern in _order_patterns(bgp.patterns):
        next_solutions: list[dict[str, Term]] = []
        for binding in solutions:
            concrete = _substitute(pattern, binding)
            for extension in _pattern_bindings(g, concrete):
                merged = dict(binding)
                merged.update(extension)
                next_solutions.append(merged)
        solutions = next_solutions
        if not solutions:
            break
    if bgp.filters:
        solutions = [
            b for b in solutions if all(eval_filter(f, b) for f in bgp.filters)
        ]
    return solutions


def _eval_pattern(g: Graph, gp: GraphPattern) -> list[dict[str, Term]]:
    if isinstance(gp, Bgp):
        return _eval_bgp(g, gp)
    return _eval_pattern(g, gp.left) + _eval_pattern(g, gp.right)


def _term_order_key(t: Term | None) -> tuple:
    if t is None:
        return (0, 0, Decimal(0), "")
    if isinstance(t, Blank):
        return (1, 0, Decimal(0), t.label)
    if isinstance(t, Iri):
        return (2, 0, Decimal(0), t.value)
    num = _to_decimal(t)
    if num is not None:
        return (3, 0, num, render_term(t))
    return (3, 1, Decimal(0), render_term(t))


def evaluate(q: Query, g: Graph) -> SolutionSet:
    """Evaluate under set semantics; see the module docstring for ordering."""
    header = q.header()
    solutions = _eval_pattern(g, q.pattern)
    rows = {tuple(b.get(name) for name in header) for b in solutions}

    def row_tiebreak(row: tuple[Term | None, ...]) -> tuple:
        return tuple(_term_order_key(t) for t in row)

    ordered = sorted(rows, key=row_tiebreak)
    if q.order_by:
        index = {name: i for i, name in enumerate(header)}
        for key in reversed(q.order_by):
            ordered.sort(
                key=lambda row: _term_order_key(row[index[key.var]]),
                reverse=key.descending,
            )
    if q.limit is not None:
        ordered = ordered[: q.limit]
    return SolutionSet(header=header, rows=tuple(ordered))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _render_filter(expr: FilterExpr, top: bool = True) -> str:
    if isinstance(expr, Comparison):
        return f"{render_term(expr.left)} {expr.op} {render_term(expr.right)}"
    if isinstance(expr, AndExpr):
        body = " && ".join(_render_filter(e, top=False) for e in expr.items)
        return body if top else f"({body})"
    if isinstance(expr, OrExpr):
        body = " || ".join(_render_filter(e, top=False) for e in expr.items)
        return body if top else f"({body})"
    return f"!({_render_filter(expr.item)})"


def _render_pattern(gp: GraphPattern, indent: str) -> list[str]:
    if isinstance(gp, Bgp):
        lines = []
        for p in gp.patterns:
            lines.append(
                f"{indent}{render_term(p.subject)} {render_term(p.predicate)} "
                f"{render_term(p.object)} ."
            )
        for f in gp.filters:
            lines.append(f"{indent}FILTER({_render_filter(f)})")
        return lines
    # union: flatten left-nested unions into a chain
    branches: list[GraphPattern] = []

    def collect(node: GraphPattern) -> None:
        if isinstance(node, UnionPattern):
            collect(node.left)
            collect(node.right)
        else:
            branches.append(node)

    collect(gp)
    lines = []
    for i, branch in enumerate(branches):
        opener = f"{indent}{{" if i == 0 else f"{indent}UNION {{"
        lines.append(opener)
        lines.extend(_render_pattern(branch, indent + "  "))
        lines.append(f"{indent}}}")
    return lines


def serialize_query(q: Query) -> str:
    head = "SELECT "
    if q.distinct:
        head += "DISTINCT "
    head += "*" if q.star else " ".join("?" + v for v in q.select_vars)
    lines = [head, "WHERE {"]
    lines.extend(_render_pattern(q.pattern, "  "))
    lines.append("}")
    if q.order_by:
        conds = " ".join(
            (f"DESC(?{k.var})" if k.descending else f"ASC(?{k.var})")
            for k in q.order_by
        )
        lines.append(f"ORDER BY {conds}")
    if q.limit is not None:
        lines.append(f"LIMIT {q.limit}")
    return "".join(line + "\n" for line in lines)

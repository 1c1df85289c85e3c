"""In-memory RDF multigraph and N-Triples ingestion.

The graph is a directed multigraph: vertices are RDF terms, every triple
contributes one labeled edge, and distinct predicates between the same
vertex pair are all kept.  Identical triples collapse to a single edge.
Terms compare by kind plus byte-exact lexical form; there is no
value-space canonicalization anywhere in the engine.

Vertices are interned to dense integer ids at load time and all other
modules work on ids.  A graph is immutable once built and safe to share
across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

IRI = "iri"
LITERAL = "literal"
BLANK = "blank"

NUMERIC_DATATYPES = frozenset(
    "http://www.w3.org/2001/XMLSchema#" + local
    for local in (
        "integer", "decimal", "double", "float", "long", "int", "short",
        "byte", "nonNegativeInteger", "nonPositiveInteger", "negativeInteger",
        "positiveInteger", "unsignedLong", "unsignedInt", "unsignedShort",
        "unsignedByte",
    )
)


class NTriplesSyntaxError(Exception):
    """Malformed N-Triples input; carries the 1-based line number."""

    def __init__(self, message, line):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


@dataclass(frozen=True)
class Term:
    """One RDF term.

    kind is one of IRI, LITERAL, BLANK.  For IRIs the lexical form is the
    IRI without angle brackets; for blank nodes the label without the
    leading "_:"; for literals the full quoted token including any
    datatype or language suffix, kept byte-for-byte as written.
    """

    kind: str
    lexical: str

    def ntriples(self):
        if self.kind == IRI:
            return "<" + self.lexical + ">"
        if self.kind == BLANK:
            return "_:" + self.lexical
        return self.lexical

    def sort_key(self):
        return self.ntriples()

    def __repr__(self):
        return "Term(%s)" % self.ntriples()


@dataclass(frozen=True)
class Triple:
    s: Term
    p: str
    o: Term


def iri(value):
    return Term(IRI, value)


def literal(value, datatype=None, lang=None):
    """Build a literal term from an unescaped value string."""
    lex = '"' + _escape(value) + '"'
    if datatype is not None:
        lex += "^^<" + datatype + ">"
    elif lang is not None:
        lex += "@" + lang
    return Term(LITERAL, lex)


def blank(label):
    return Term(BLANK, label)


_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
            '"': '"', "'": "'", "\\": "\\"}
_REVERSE_ESCAPES = {"\t": "\\t", "\b": "\\b", "\n": "\\n", "\r": "\\r",
                    "\f": "\\f", '"': '\\"', "\\": "\\\\"}


def _escape(value):
    return "".join(_REVERSE_ESCAPES.get(c, c) for c in value)


def decode_escapes(raw):
    """Decode N-Triples string escapes; raises ValueError on bad ones."""
    out = []
    i = 0
    while i < len(raw):
        c = raw[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= len(raw):
            raise ValueError("dangling backslash")
        e = raw[i + 1]
        if e in _ESCAPES:
            out.append(_ESCAPES[e])
            i += 2
        elif e == "u" or e == "U":
            width = 4 if e == "u" else 8
            hexpart = raw[i + 2:i + 2 + width]
            if len(hexpart) != width:
                raise ValueError("truncated \\%s escape" % e)
            try:
                out.append(chr(int(hexpart, 16)))
            except ValueError:
                raise ValueError("bad \\%s escape" % e) from None
            i += 2 + width
        else:
            raise ValueError("unknown escape \\%s" % e)
    return "".join(out)


def literal_parts(term):
    """Split a literal into (value, datatype, lang); value is unescaped."""
    lex = term.lexical
    if not lex.startswith('"'):
        raise ValueError("not a literal: %r" % lex)
    i = 1
    while i < len(lex):
        if lex[i] == "\\":
            i += 2
            continue
        if lex[i] == '"':
            break
        i += 1
    raw = lex[1:i]
    rest = lex[i + 1:]
    value = decode_escapes(raw)
    if rest.startswith("^^<") and rest.endswith(">"):
        return value, rest[3:-1], None
    if rest.startswith("@"):
        return value, None, rest[1:]
    return value, None, None


def numeric_value(term):
    """Numeric value of a literal with a numeric datatype, else None."""
    if term.kind != LITERAL:
        return None
    value, datatype, _ = literal_parts(term)
    if datatype not in NUMERIC_DATATYPES:
        return None
    try:
        if "." in value or "e" in value or "E" in value:
            return float(value)
        return int(value)
    except ValueError:
        return None


class RdfGraph:
    """Directed multigraph of interned terms.

    edges maps an ordered vertex-id pair to the set of predicate labels on
    it; adjacency sets cover both directions.  Do not mutate after load.
    """

    def __init__(self):
        self._terms = []
        self._index = {}
        self.edges = {}
        self.out_nbrs = {}
        self.in_nbrs = {}

    @classmethod
    def from_triples(cls, triples):
        g = cls()
        for t in triples:
            g._add(t.s, t.p, t.o)
        return g

    def _intern(self, term):
        tid = self._index.get(term)
        if tid is None:
            tid = len(self._terms)
            self._index[term] = tid
            self._terms.append(term)
            self.out_nbrs[tid] = set()
            self.in_nbrs[tid] = set()
        return tid

    def _add(self, s, p, o):
        u = self._intern(s)
        v = self._intern(o)
        self.edges.setdefault((u, v), set()).add(p)
        self.out_nbrs[u].add(v)
        self.in_nbrs[v].add(u)

    @property
    def n_vertices(self):
        return len(self._terms)

    @property
    def n_edges(self):
        return sum(len(labels) for labels in self.edges.values())

    def term(self, tid):
        return self._terms[tid]

    def term_id(self, term):
        return self._index.get(term)

    def vertex_ids(self):
        return range(len(self._terms))

    def iter_edges(self):
        for (u, v), labels in self.edges.items():
            for p in labels:
                yield u, v, p

    def labels_between(self, u, v):
        return self.edges.get((u, v), frozenset())

    def to_ntriples(self):
        lines = sorted(
            "%s <%s> %s ." % (self._terms[u].ntriples(), p,
                              self._terms[v].ntriples())
            for u, v, p in self.iter_edges()
        )
        return "\n".join(lines) + ("\n" if lines else "")


def _skip_ws(line, i):
    while i < len(line) and line[i] in " \t":
        i += 1
    return i


def _parse_iri(line, i, line_no):
    # cursor sits on '<'
    j = line.find(">", i + 1)
    if j < 0:
        raise NTriplesSyntaxError("unterminated IRI", line_no)
    body = line[i + 1:j]
    if any(c in body for c in ' "{}|^`') or any(ord(c) <= 0x20 for c in body):
        raise NTriplesSyntaxError("bad character in IRI", line_no)
    return body, j + 1


def _parse_literal(line, i, line_no):
    # cursor sits on the opening quote
    j = i + 1
    while j < len(line):
        if line[j] == "\\":
            j += 2
            continue
        if line[j] == '"':
            break
        j += 1
    if j >= len(line):
        raise NTriplesSyntaxError("unterminated literal", line_no)
    try:
        decode_escapes(line[i + 1:j])
    except ValueError as exc:
        raise NTriplesSyntaxError(str(exc), line_no) from None
    end = j + 1
    if line.startswith("^^", end):
        if end + 2 >= len(line) or line[end + 2] != "<":
            raise NTriplesSyntaxError("datatype must be an IRI", line_no)
        _, end = _parse_iri(line, end + 2, line_no)
    elif line.startswith("@", end):
        k = end + 1
        while k < len(line) and (line[k].isalnum() or line[k] == "-"):
            k += 1
        if k == end + 1:
            raise NTriplesSyntaxError("empty language tag", line_no)
        end = k
    return Term(LITERAL, line[i:end]), end


def _parse_blank(line, i, line_no):
    if not line.startswith("_:", i):
        raise NTriplesSyntaxError("expected blank node", line_no)
    j = i + 2
    while j < len(line) and (line[j].isalnum() or line[j] in "_-."):
        j += 1
    # a trailing dot belongs to the line terminator, not the label
    while j > i + 2 and line[j - 1] == ".":
        j -= 1
    if j == i + 2:
        raise NTriplesSyntaxError("empty blank node label", line_no)
    return Term(BLANK, line[i + 2:j]), j


def parse_term(line, i, line_no=0):
    """Parse one term starting at offset i; returns (Term, next offset)."""
    if i >= len(line):
        raise NTriplesSyntaxError("expected a term", line_no)
    c = line[i]
    if c == "<":
        body, j = _parse_iri(line, i, line_no)
        return Term(IRI, body), j
    if c == '"':
        return _parse_literal(line, i, line_no)
    if c == "_":
        return _parse_blank(line, i, line_no)
    raise NTriplesSyntaxError("expected IRI, literal or blank node", line_no)


def term_from_text(text):
    """Parse a lone term from its N-Triples form (used by partition maps)."""
    term, end = parse_term(text, 0, 0)
    if end != len(text):
        raise NTriplesSyntaxError("trailing characters after term", 0)
    return term


def parse_ntriples(source):
    """Parse line-oriented N-Triples into an RdfGraph.

    Accepts bytes, str, or a binary/text file object.  Duplicate triples
    are collapsed.  Errors carry the offending 1-based line number.
    """
    if isinstance(source, bytes):
        raw_lines = source.split(b"\n")
    elif isinstance(source, str):
        raw_lines = source.split("\n")
    elif isinstance(source, io.TextIOBase):
        raw_lines = source.read().split("\n")
    else:
        raw_lines = source.read().split(b"\n")

    g = RdfGraph()
    for line_no, raw in enumerate(raw_lines, start=1):
        if isinstance(raw, bytes):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise NTriplesSyntaxError("invalid UTF-8", line_no) from None
        else:
            line = raw
        line = line.rstrip("\r")
        i = _skip_ws(line, 0)
        if i >= len(line) or line[i] == "#":
            continue
        s, i = parse_term(line, i, line_no)
        if s.kind == LITERAL:
            raise NTriplesSyntaxError("literal subject", line_no)
        i = _skip_ws(line, i)
        if i >= len(line) or line[i] != "<":
            raise NTriplesSyntaxError("predicate must be an IRI", line_no)
        p, i = _parse_iri(line, i, line_no)
        i = _skip_ws(line, i)
        o, i = parse_term(line, i, line_no)
        i = _skip_ws(line, i)
        if i >= len(line) or line[i] != ".":
            raise NTriplesSyntaxError("missing terminating '.'", line_no)
        i = _skip_ws(line, i + 1)
        if i < len(line) and line[i] != "#":
            raise NTriplesSyntaxError("trailing characters", line_no)
        g._add(s, p, o)
    return g

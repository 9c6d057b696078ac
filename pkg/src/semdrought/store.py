"""Embedded triple store.

Set-semantics storage with pattern matching, conjunctive (natural-join)
queries, forward-chaining saturation over positive Datalog rules, and a
deterministic line-oriented N-Triples subset for persistence.
"""

import re
from dataclasses import dataclass

from .errors import SemDroughtError
from .model import (
    RDF_NS,
    BlankNode,
    Datatype,
    Iri,
    Literal,
    Namespaces,
    Term,
    Triple,
)

_VARIABLE_NAME = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")


class StoreError(SemDroughtError):
    code = "StoreError"


class ParseError(StoreError):
    code = "ParseError"

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if not _VARIABLE_NAME.fullmatch(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")


PatternTerm = Term | Variable


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def variables(self) -> set[str]:
        return {t.name for t in (self.subject, self.predicate, self.object)
                if isinstance(t, Variable)}


@dataclass(frozen=True)
class InferenceRule:
    body: tuple[TriplePattern, ...]
    head: TriplePattern

    def __post_init__(self):
        if not self.body:
            raise ValueError("rule body must contain at least one pattern")
        bound = set()
        for pattern in self.body:
            bound |= pattern.variables()
        free = self.head.variables() - bound
        if free:
            raise ValueError(f"head variables not bound in body: {sorted(free)}")


Binding = dict[str, Term]


def _substitute(pattern: TriplePattern, binding: Binding) -> TriplePattern:
    def sub(t: PatternTerm) -> PatternTerm:
        if isinstance(t, Variable) and t.name in binding:
            return binding[t.name]
        return t
    return TriplePattern(sub(pattern.subject), sub(pattern.predicate), sub(pattern.object))


def _unify(pattern: TriplePattern, triple: Triple) -> Binding | None:
    binding: Binding = {}
    for slot, value in ((pattern.subject, triple.subject),
                        (pattern.predicate, triple.predicate),
                        (pattern.object, triple.object)):
        if isinstance(slot, Variable):
            seen = binding.get(slot.name)
            if seen is None:
                binding[slot.name] = value
            elif seen != value:
                return None
        elif slot != value:
            return None
    return binding


class TripleStore:
    """In-memory triple set with positional indexes and inferred-triple marks."""

    def __init__(self):
        self._triples: set[Triple] = set()
        self._inferred: set[Triple] = set()
        self._by_subject: dict[Term, set[Triple]] = {}
        self._by_predicate: dict[Term, set[Triple]] = {}
        self._by_object: dict[Term, set[Triple]] = {}

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def __iter__(self):
        return iter(self._triples)

    def is_inferred(self, triple: Triple) -> bool:
        return triple in self._inferred

    def insert(self, triple: Triple, inferred: bool = False) -> bool:
        """Add one triple; True iff it was not already present."""
        if triple in self._triples:
            return False
        self._triples.add(triple)
        if inferred:
            self._inferred.add(triple)
        self._by_subject.setdefault(triple.subject, set()).add(triple)
        self._by_predicate.setdefault(triple.predicate, set()).add(triple)
        self._by_object.setdefault(triple.object, set()).add(triple)
        return True

    def _candidates(self, pattern: TriplePattern) -> set[Triple]:
        pools = []
        if not isinstance(pattern.subject, Variable):
            pools.append(self._by_subject.get(pattern.subject, set()))
        if not isinstance(pattern.predicate, Variable):
            pools.append(self._by_predicate.get(pattern.predicate, set()))
        if not isinstance(pattern.object, Variable):
            pools.append(self._by_object.get(pattern.object, set()))
        if not pools:
            return self._triples
        return min(pools, key=len)

    def match_pattern(self, pattern: TriplePattern) -> list[Binding]:
        """One binding per unifying triple; ground patterns yield [{}] if present."""
        out: list[Binding] = []
        seen: set[tuple] = set()
        for triple in self._candidates(pattern):
            binding = _unify(pattern, triple)
            if binding is None:
                continue
            key = tuple(sorted((k, _term_text(v)) for k, v in binding.items()))
            if key not in seen:
                seen.add(key)
                out.append(binding)
        out.sort(key=lambda b: tuple(sorted((k, _term_text(v)) for k, v in b.items())))
        return out

    def query_bgp(self, patterns: list[TriplePattern]) -> list[Binding]:
        """Natural join of the per-pattern solutions on shared variables."""
        if not patterns:
            raise ValueError("query needs at least one pattern")
        solutions: list[Binding] = [{}]
        for pattern in patterns:
            next_solutions: list[Binding] = []
            for binding in solutions:
                for extension in self.match_pattern(_substitute(pattern, binding)):
                    merged = dict(binding)
                    merged.update(extension)
                    next_solutions.append(merged)
            solutions = next_solutions
            if not solutions:
                break
        unique: dict[tuple, Binding] = {}
        for binding in solutions:
            key = tuple(sorted((k, _term_text(v)) for k, v in binding.items()))
            unique[key] = binding
        return [unique[key] for key in sorted(unique)]

    def saturate(self, rules: list[InferenceRule]) -> int:
        """Forward-chain to the least fixpoint; returns distinct new triples."""
        derived = 0
        changed = True
        while changed:
            changed = False
            for rule in rules:
                pending: list[Triple] = []
                for binding in self.query_bgp(list(rule.body)):
                    head = _substitute(rule.head, binding)
                    pending.append(Triple(head.subject, head.predicate, head.object))
                for triple in pending:
                    if self.insert(triple, inferred=True):
                        derived += 1
                        changed = True
        return derived

    # -- persistence --------------------------------------------------------

    def serialize(self) -> str:
        """One triple per line, lexicographically sorted; inferred marks dropped."""
        lines = sorted(_serialize_triple(t) for t in self._triples)
        return "".join(line + "\n" for line in lines)

    @classmethod
    def load(cls, text: str) -> "TripleStore":
        store = cls()
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            store.insert(_parse_line(line, number))
        return store


def _escape(lexical: str) -> str:
    return (lexical.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))


def _unescape(lexical: str) -> str:
    return (lexical.replace("\\t", "\t").replace("\\r", "\r").replace("\\n", "\n")
            .replace('\\"', '"').replace("\\\\", "\\"))


def _term_text(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    return f'"{_escape(term.lexical)}"^^<{term.datatype.iri}>'


def _serialize_triple(triple: Triple) -> str:
    return (f"{_term_text(triple.subject)} {_term_text(triple.predicate)} "
            f"{_term_text(triple.object)} .")


_LINE = re.compile(
    r"^(?P<s><[^>\s]+>|_:[A-Za-z][A-Za-z0-9_]*)\s+"
    r"(?P<p><[^>\s]+>)\s+"
    r'(?P<o><[^>\s]+>|_:[A-Za-z][A-Za-z0-9_]*|"(?:[^"\\]|\\.)*"\^\^<[^>\s]+>)\s+\.\s*$'
)

_DATATYPES = {d.iri: d for d in Datatype}


def _parse_term(text: str, number: int) -> Term:
    if text.startswith("<"):
        try:
            return Iri(text[1:-1])
        except ValueError as exc:
            raise ParseError(number, str(exc))
    if text.startswith("_:"):
        return BlankNode(text[2:])
    lexical, _, datatype = text.rpartition("^^")
    dt = _DATATYPES.get(datatype[1:-1])
    if dt is None:
        raise ParseError(number, f"unsupported datatype {datatype}")
    try:
        return Literal(_unescape(lexical[1:-1]), dt)
    except ValueError as exc:
        raise ParseError(number, str(exc))


def _parse_line(line: str, number: int) -> Triple:
    match = _LINE.match(line)
    if match is None:
        raise ParseError(number, f"not a triple line: {line!r}")
    return Triple(
        _parse_term(match.group("s"), number),
        _parse_term(match.group("p"), number),
        _parse_term(match.group("o"), number),
    )


def builtin_rules(ns: Namespaces) -> list[InferenceRule]:
    """Structural inference: transitivity and propagation over the class and
    property hierarchies. Influence facts deliberately get no rule."""
    rdf_type = Iri(RDF_NS + "type")
    sub_class = ns.iri("ex:subClassOf")
    sub_prop = ns.iri("ex:subPropertyOf")
    a, b, c = Variable("a"), Variable("b"), Variable("c")
    x, p, q, o = Variable("x"), Variable("p"), Variable("q"), Variable("o")
    return [
        InferenceRule(
            body=(TriplePattern(a, sub_class, b), TriplePattern(b, sub_class, c)),
            head=TriplePattern(a, sub_class, c),
        ),
        InferenceRule(
            body=(TriplePattern(a, sub_prop, b), TriplePattern(b, sub_prop, c)),
            head=TriplePattern(a, sub_prop, c),
        ),
        InferenceRule(
            body=(TriplePattern(a, sub_class, b), TriplePattern(x, rdf_type, a)),
            head=TriplePattern(x, rdf_type, b),
        ),
        InferenceRule(
            body=(TriplePattern(p, sub_prop, q), TriplePattern(x, p, o)),
            head=TriplePattern(x, q, o),
        ),
    ]

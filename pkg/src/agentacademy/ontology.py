"""Ontology registry and term translation between named vocabularies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .rules import Fact
from .sl import OntologyQuery, TermMapping

__all__ = [
    "Ontology", "TermMap", "OntologyService",
    "OntologyError", "DuplicateOntology", "UnknownOntology", "NoMapRegistered", "UnmappedTerm",
]


class OntologyError(LookupError):
    pass


class DuplicateOntology(OntologyError):
    pass


class UnknownOntology(OntologyError):
    pass


class NoMapRegistered(OntologyError):
    pass


class UnmappedTerm(OntologyError):
    pass


@dataclass(frozen=True)
class Ontology:
    name: str
    terms: frozenset[str]

    def __init__(self, name: str, terms: Iterable[str]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "terms", frozenset(terms))
        if not self.terms:
            raise ValueError(f"ontology {name} has no terms")


@dataclass(frozen=True)
class TermMap:
    from_ontology: str
    to_ontology: str
    pairs: Mapping[str, str] = field(hash=False)

    def __post_init__(self):
        if len(set(self.pairs.values())) != len(self.pairs):
            raise ValueError(f"term map {self.from_ontology}->{self.to_ontology} is not a bijection")

    def inverse(self) -> "TermMap":
        return TermMap(self.to_ontology, self.from_ontology, {v: k for k, v in self.pairs.items()})


class OntologyService:
    def __init__(self):
        self.ontologies: dict[str, Ontology] = {}
        self._maps: dict[tuple[str, str], TermMap] = {}

    def register(self, ontology: Ontology) -> None:
        if ontology.name in self.ontologies:
            raise DuplicateOntology(ontology.name)
        self.ontologies[ontology.name] = ontology

    def lookup(self, name: str) -> Ontology:
        try:
            return self.ontologies[name]
        except KeyError:
            raise UnknownOntology(name) from None

    def add_map(self, term_map: TermMap) -> None:
        src = self.lookup(term_map.from_ontology)
        dst = self.lookup(term_map.to_ontology)
        for a, b in term_map.pairs.items():
            if a not in src.terms:
                raise UnmappedTerm(f"{a!r} is not a term of {src.name}")
            if b not in dst.terms:
                raise UnmappedTerm(f"{b!r} is not a term of {dst.name}")
        self._maps[(src.name, dst.name)] = term_map
        self._maps[(dst.name, src.name)] = term_map.inverse()

    def _map(self, src: str, dst: str) -> TermMap:
        self.lookup(src)
        self.lookup(dst)
        if src == dst:
            terms = self.ontologies[src].terms
            return TermMap(src, dst, {t: t for t in terms})
        try:
            return self._maps[(src, dst)]
        except KeyError:
            raise NoMapRegistered(f"{src} -> {dst}") from None

    def translate_term(self, term: str, src: str, dst: str) -> str:
        pairs = self._map(src, dst).pairs
        try:
            return pairs[term]
        except KeyError:
            raise UnmappedTerm(f"{term!r} has no mapping {src} -> {dst}") from None

    def map_term(self, query: OntologyQuery) -> TermMapping:
        to = self.translate_term(query.term, query.message_ontology, query.my_ontology)
        return TermMapping(query.term, to)

    def translate_facts(self, facts: Sequence[Fact], src: str, dst: str) -> list[Fact]:
        """Translate attribute names; values pass through. All or nothing."""
        pairs = self._map(src, dst).pairs
        missing = [f.attribute for f in facts if f.attribute not in pairs]
        if missing:
            raise UnmappedTerm(f"{missing[0]!r} has no mapping {src} -> {dst}")
        return [Fact(pairs[f.attribute], f.value) for f in facts]

"""Forward-chaining production rules over single-valued (attribute, value) facts.

Rule text follows the defrule shape::

    (defrule <name> (and (<attr> <value>)+) => (store <key> <value>)+)

A bare single pattern may stand in for the ``(and ...)`` form.

Conflict resolution: more conditions fire first, ties go to definition
order, each rule fires at most once per run, and the first store to a key
wins.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .sl import Atom, SList, SlSyntaxError, parse_sl

__all__ = [
    "Fact", "StoreAction", "Rule", "RuleBase", "WorkingMemory",
    "RuleError", "NotADefrule", "MissingArrow", "EmptyConditions", "EmptyActions",
    "DuplicateConditionAttribute", "DuplicateRuleName",
    "parse_defrule", "normalize_symbol", "assert_fact", "retract_fact", "run",
]


class RuleError(ValueError):
    pass


class NotADefrule(RuleError):
    pass


class MissingArrow(RuleError):
    pass


class EmptyConditions(RuleError):
    pass


class EmptyActions(RuleError):
    pass


class DuplicateConditionAttribute(RuleError):
    pass


class DuplicateRuleName(RuleError):
    pass


@dataclass(frozen=True, slots=True)
class Fact:
    attribute: str
    value: str

    def __post_init__(self):
        if not self.attribute or not self.value:
            raise ValueError("fact attribute and value must be nonempty")


@dataclass(frozen=True, slots=True)
class StoreAction:
    key: str
    value: str

    def __post_init__(self):
        if not self.key or not self.value:
            raise ValueError("store key and value must be nonempty")


@dataclass(frozen=True)
class Rule:
    name: str
    conditions: tuple[Fact, ...]
    actions: tuple[StoreAction, ...]

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.conditions:
            raise EmptyConditions(f"rule {self.name} has no conditions")
        if not self.actions:
            raise EmptyActions(f"rule {self.name} has no actions")
        attrs = [c.attribute for c in self.conditions]
        if len(set(attrs)) != len(attrs):
            raise DuplicateConditionAttribute(f"rule {self.name} tests an attribute twice")

    def matches(self, facts: Mapping[str, str]) -> bool:
        return all(facts.get(c.attribute) == c.value for c in self.conditions)

    def to_defrule(self) -> str:
        conds = " ".join(f"({c.attribute} {c.value})" for c in self.conditions)
        acts = " ".join(f"(store {a.key} {a.value})" for a in self.actions)
        return f"(defrule {self.name} (and {conds}) => {acts})"


class RuleBase:
    """Ordered rules with unique names; keeps the firing agenda precomputed."""

    def __init__(self, rules: Iterable[Rule] = ()):
        self.rules: tuple[Rule, ...] = tuple(rules)
        seen = set()
        for r in self.rules:
            if r.name in seen:
                raise DuplicateRuleName(r.name)
            seen.add(r.name)
        order = sorted(range(len(self.rules)), key=lambda i: (-len(self.rules[i].conditions), i))
        self.agenda: tuple[Rule, ...] = tuple(self.rules[i] for i in order)

    @classmethod
    def from_text(cls, sources: Iterable[str]) -> "RuleBase":
        return cls(parse_defrule(s) for s in sources)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def __eq__(self, other):
        return isinstance(other, RuleBase) and self.rules == other.rules

    def __repr__(self):
        return f"RuleBase({len(self.rules)} rules)"


def normalize_symbol(text: str) -> str:
    """NFKC fold, so that e.g. a subscripted NO₂NO₃ reads as NO2NO3."""
    return unicodedata.normalize("NFKC", text)


def _symbol(node, what: str) -> str:
    if not isinstance(node, Atom):
        raise NotADefrule(f"{what} must be a symbol, got {node!r}")
    return normalize_symbol(node.text)


def _pattern(node) -> Fact:
    if not isinstance(node, SList) or len(node) != 2:
        raise NotADefrule(f"pattern must be (<attr> <value>), got {node!r}")
    return Fact(_symbol(node[0], "pattern attribute"), _symbol(node[1], "pattern value"))


def _action(node) -> StoreAction:
    if not isinstance(node, SList) or len(node) != 3 or node.head != "store":
        raise NotADefrule(f"action must be (store <key> <value>), got {node!r}")
    return StoreAction(_symbol(node[1], "store key"), _symbol(node[2], "store value"))


def parse_defrule(source: str) -> Rule:
    try:
        node = parse_sl(source)
    except SlSyntaxError as exc:
        raise NotADefrule(str(exc)) from exc
    if not isinstance(node, SList) or node.head != "defrule" or len(node) < 2:
        raise NotADefrule(f"not a defrule: {source!r}")
    name = _symbol(node[1], "rule name")
    body = node.items[2:]
    arrows = [i for i, item in enumerate(body) if isinstance(item, Atom) and item.text == "=>"]
    if not arrows:
        raise MissingArrow(f"rule {name} has no '=>'")
    arrow = arrows[0]
    lhs, rhs = body[:arrow], body[arrow + 1:]
    if not lhs:
        raise EmptyConditions(f"rule {name} has no conditions")
    if len(lhs) != 1:
        raise NotADefrule(f"rule {name}: condition side must be one (and ...) or a single pattern")
    cond = lhs[0]
    if isinstance(cond, SList) and cond.head == "and":
        patterns = [_pattern(p) for p in cond.items[1:]]
    else:
        patterns = [_pattern(cond)]
    if not patterns:
        raise EmptyConditions(f"rule {name} has an empty (and)")
    if not rhs:
        raise EmptyActions(f"rule {name} has no actions")
    return Rule(name, tuple(patterns), tuple(_action(a) for a in rhs))


@dataclass
class WorkingMemory:
    facts: dict[str, str] = field(default_factory=dict)
    store: dict[str, str] = field(default_factory=dict)
    # names of the rules fired by the last run, in firing order
    fired: tuple[str, ...] = ()

    def copy(self) -> "WorkingMemory":
        return WorkingMemory(dict(self.facts), dict(self.store), self.fired)


def assert_fact(mem: WorkingMemory, fact: Fact) -> WorkingMemory:
    out = mem.copy()
    out.facts[fact.attribute] = fact.value
    return out


def retract_fact(mem: WorkingMemory, attribute: str) -> WorkingMemory:
    out = mem.copy()
    out.facts.pop(attribute, None)
    return out


def run(mem: WorkingMemory, rules: RuleBase | Iterable[Rule]) -> WorkingMemory:
    """Fire every matching rule once, most specific first; returns a new memory."""
    if not isinstance(rules, RuleBase):
        rules = RuleBase(rules)
    facts = mem.facts
    store = dict(mem.store)
    fired = []
    for rule in rules.agenda:
        if rule.matches(facts):
            fired.append(rule.name)
            for action in rule.actions:
                store.setdefault(action.key, action.value)
    return WorkingMemory(dict(facts), store, tuple(fired))

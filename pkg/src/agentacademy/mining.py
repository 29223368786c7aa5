"""ID3 decision-tree induction over categorical data and its compilation to defrules."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from itertools import product
from typing import Iterable, Mapping, Sequence, Union

from .rules import Fact, Rule, StoreAction
from .sl import Atom, SList, SlNode, parse_sl, print_sl

__all__ = [
    "AlarmType", "TrainingExample", "Dataset", "Leaf", "Node", "DecisionTree", "Discretizer",
    "MiningError", "EmptyDataset", "UnknownAttribute", "UnknownVariable", "MissingAttribute",
    "discretize", "entropy", "information_gain", "induce_tree", "tree_to_rules", "classify",
    "majority", "format_tree", "tree_to_sl", "tree_from_sl", "tree_attributes", "leaf_count",
    "grid", "ALARM_KEY", "DEFAULT_FACT", "GAIN_TOLERANCE", "CATEGORIES",
]

ALARM_KEY = "ALARM_TYPE"
DEFAULT_FACT = Fact("DEFAULT", "true")
# gains closer than this are treated as tied
GAIN_TOLERANCE = 1e-9
CATEGORIES = ("low", "normal", "high")


class AlarmType(IntEnum):
    NONE = 0
    INFO = 1
    WARNING = 2
    HAZARD = 3


class MiningError(ValueError):
    pass


class EmptyDataset(MiningError):
    pass


class UnknownAttribute(MiningError):
    pass


class UnknownVariable(MiningError):
    pass


class MissingAttribute(MiningError):
    pass


@dataclass(frozen=True)
class TrainingExample:
    attributes: Mapping[str, str]
    label: int


@dataclass(frozen=True)
class Dataset:
    schema: tuple[tuple[str, tuple[str, ...]], ...]
    examples: tuple[TrainingExample, ...] = ()

    def __post_init__(self):
        schema = tuple((a, tuple(dom)) for a, dom in self.schema)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "examples", tuple(self.examples))
        names = [a for a, _ in schema]
        if len(set(names)) != len(names):
            raise ValueError("duplicate attribute in schema")
        domains = dict(schema)
        for ex in self.examples:
            for a, dom in domains.items():
                if ex.attributes.get(a) not in dom:
                    raise ValueError(f"example {dict(ex.attributes)} does not conform to {a} domain {dom}")
            if ex.label not in AlarmType._value2member_map_:
                raise ValueError(f"label out of range: {ex.label}")

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.schema)

    def domain(self, attribute: str) -> tuple[str, ...]:
        for a, dom in self.schema:
            if a == attribute:
                return dom
        raise UnknownAttribute(attribute)

    def labels(self) -> list[int]:
        return [ex.label for ex in self.examples]

    def __len__(self):
        return len(self.examples)


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Node:
    attribute: str
    branches: dict = field(hash=False)


DecisionTree = Union[Leaf, Node]


@dataclass(frozen=True)
class Discretizer:
    """Per-variable (t_low, t_high) cut points in physical units."""

    thresholds: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        for var, (lo, hi) in self.thresholds.items():
            if not lo < hi:
                raise ValueError(f"{var}: t_low must be below t_high")

    def __call__(self, variable: str, reading: float) -> str:
        return discretize(self, variable, reading)


def discretize(d: Discretizer, variable: str, reading: float) -> str:
    try:
        lo, hi = d.thresholds[variable]
    except KeyError:
        raise UnknownVariable(variable) from None
    if reading < lo:
        return "low"
    if reading <= hi:
        return "normal"
    return "high"


def entropy(labels: Iterable[int]) -> float:
    counts = Counter(labels)
    n = sum(counts.values())
    if n == 0:
        raise EmptyDataset("entropy of an empty label multiset")
    h = 0.0
    for c in counts.values():
        p = c / n
        h -= p * math.log2(p)
    return h


def _gain(examples: Sequence[TrainingExample], attribute: str) -> float:
    n = len(examples)
    parts: dict[str, list[int]] = {}
    for ex in examples:
        parts.setdefault(ex.attributes[attribute], []).append(ex.label)
    remainder = sum(len(p) / n * entropy(p) for p in parts.values())
    return entropy(ex.label for ex in examples) - remainder


def information_gain(ds: Dataset, attribute: str) -> float:
    if attribute not in ds.attributes:
        raise UnknownAttribute(attribute)
    if not ds.examples:
        raise EmptyDataset("information gain of an empty dataset")
    return _gain(ds.examples, attribute)


def majority(labels: Iterable[int]) -> int:
    """Most frequent label; ties go to the higher (more severe) code."""
    counts = Counter(labels)
    if not counts:
        raise EmptyDataset("majority of an empty label multiset")
    return max(counts, key=lambda lab: (counts[lab], lab))


def induce_tree(ds: Dataset) -> DecisionTree:
    if not ds.examples:
        raise EmptyDataset("cannot induce a tree from an empty dataset")
    domains = dict(ds.schema)
    return _id3(list(ds.examples), sorted(domains), domains)


def _id3(examples, attributes, domains) -> DecisionTree:
    labels = [ex.label for ex in examples]
    if len(set(labels)) == 1:
        return Leaf(labels[0])
    fallback = majority(labels)
    if not attributes:
        return Leaf(fallback)
    gains = {a: _gain(examples, a) for a in attributes}
    best_gain = max(gains.values())
    if best_gain <= GAIN_TOLERANCE:
        return Leaf(fallback)
    # attributes is sorted, so the first within tolerance is the lexicographic tie-break
    best = next(a for a in attributes if gains[a] >= best_gain - GAIN_TOLERANCE)
    rest = [a for a in attributes if a != best]
    branches = {}
    for category in domains[best]:
        subset = [ex for ex in examples if ex.attributes[best] == category]
        branches[category] = _id3(subset, rest, domains) if subset else Leaf(fallback)
    return Node(best, branches)


def tree_to_rules(tree: DecisionTree, key: str = ALARM_KEY) -> list[Rule]:
    """One rule per root-to-leaf path, named rule_1, rule_2, ... depth first."""
    rules: list[Rule] = []

    def walk(t, path):
        if isinstance(t, Leaf):
            conds = path or [DEFAULT_FACT]
            rules.append(Rule(f"rule_{len(rules) + 1}", tuple(conds), (StoreAction(key, str(int(t.label))),)))
            return
        for category, child in t.branches.items():
            walk(child, path + [Fact(t.attribute, category)])

    walk(tree, [])
    return rules


def classify(tree: DecisionTree, x: Mapping[str, str]) -> int:
    t = tree
    while isinstance(t, Node):
        try:
            t = t.branches[x[t.attribute]]
        except KeyError:
            raise MissingAttribute(t.attribute) from None
    return t.label


def tree_attributes(tree: DecisionTree) -> set[str]:
    if isinstance(tree, Leaf):
        return set()
    out = {tree.attribute}
    for child in tree.branches.values():
        out |= tree_attributes(child)
    return out


def leaf_count(tree: DecisionTree) -> int:
    if isinstance(tree, Leaf):
        return 1
    return sum(leaf_count(c) for c in tree.branches.values())


def grid(schema: Sequence[tuple[str, Sequence[str]]]) -> list[dict[str, str]]:
    """Every complete assignment over the schema, in domain order."""
    names = [a for a, _ in schema]
    return [dict(zip(names, combo)) for combo in product(*(dom for _, dom in schema))]


def format_tree(tree: DecisionTree, indent: str = "  ") -> str:
    lines: list[str] = []

    def walk(t, depth):
        pad = indent * depth
        if isinstance(t, Leaf):
            lines.append(f"{pad}-> {ALARM_KEY} {int(t.label)}")
            return
        for category, child in t.branches.items():
            if isinstance(child, Leaf):
                lines.append(f"{pad}{t.attribute} = {category} -> {ALARM_KEY} {int(child.label)}")
            else:
                lines.append(f"{pad}{t.attribute} = {category}")
                walk(child, depth + 1)

    walk(tree, 0)
    return "\n".join(lines)


def tree_to_sl(tree: DecisionTree) -> SlNode:
    """``(leaf 3)`` or ``(node ozone (low <tree>) (normal <tree>) ...)``."""
    if isinstance(tree, Leaf):
        return SList((Atom("leaf"), Atom(str(int(tree.label)))))
    return SList((
        Atom("node"), Atom(tree.attribute),
        *(SList((Atom(cat), tree_to_sl(child))) for cat, child in tree.branches.items()),
    ))


def tree_from_sl(node: SlNode | str) -> DecisionTree:
    if isinstance(node, str):
        node = parse_sl(node)
    if not isinstance(node, SList) or node.head not in ("leaf", "node"):
        raise ValueError(f"expected (leaf ...) or (node ...), got {print_sl(node)}")
    if node.head == "leaf":
        if len(node) != 2 or not isinstance(node[1], Atom):
            raise ValueError(f"malformed leaf: {print_sl(node)}")
        label = int(node[1].text)
        AlarmType(label)
        return Leaf(label)
    if len(node) < 3 or not isinstance(node[1], Atom):
        raise ValueError(f"malformed node: {print_sl(node)}")
    branches = {}
    for br in node.items[2:]:
        if not isinstance(br, SList) or len(br) != 2 or not isinstance(br[0], Atom):
            raise ValueError(f"malformed branch: {print_sl(br)}")
        branches[br[0].text] = tree_from_sl(br[1])
    return Node(node[1].text, branches)

"""Shared hypothesis strategies."""

from hypothesis import strategies as st

from agentacademy.mining import CATEGORIES, Leaf, Node
from agentacademy.sl import Atom, Keyword, SList, Str

_DELIMS = set(' ()"')
bare_char = st.characters(blacklist_categories=("Cs",)).filter(lambda c: c not in _DELIMS and not c.isspace())
bare_text = st.text(bare_char, min_size=1, max_size=8)

atoms = bare_text.filter(lambda t: not t.startswith(":")).map(Atom)
keywords = bare_text.map(Keyword)
strs = st.text(st.characters(blacklist_categories=("Cs",)), max_size=10).map(Str)
leaves = st.one_of(atoms, keywords, strs)


def depth(node) -> int:
    if isinstance(node, SList):
        return 1 + max((depth(c) for c in node.items), default=0)
    return 0


def sl_nodes(max_depth: int = 8, max_fanout: int = 6):
    def extend(children):
        return st.lists(children, max_size=max_fanout).map(SList)
    return st.recursive(leaves, extend, max_leaves=60).filter(lambda n: depth(n) <= max_depth)


symbols = st.text(st.sampled_from("abcdefghijklmnopqrstuvwxyzABCXYZ0123456789_-"), min_size=1, max_size=8)


@st.composite
def trees(draw, attributes=("a", "b", "c", "d"), max_depth: int = 4):
    """Random well-formed decision trees over ternary attributes."""

    def build(available, depth):
        if depth == 0 or not available or draw(st.booleans()) and depth < max_depth:
            return Leaf(draw(st.integers(0, 3)))
        attr = draw(st.sampled_from(sorted(available)))
        rest = available - {attr}
        return Node(attr, {c: build(rest, depth - 1) for c in CATEGORIES})

    return build(set(attributes), max_depth)

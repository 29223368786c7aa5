"""SL-subset content language: s-expression codec and the training-protocol frames.

Every message exchanged between agents carries one canonical-printed
s-expression. The grammar is small:

* ``(`` and ``)`` delimit lists,
* ``"..."`` is a string, with ``\\"`` and ``\\\\`` escapes,
* ``:name`` is a keyword,
* anything else up to the next delimiter is an atom.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Iterable, Union

__all__ = [
    "Atom", "Str", "Keyword", "SList", "SlNode",
    "SlSyntaxError", "UnbalancedParens", "UnterminatedString", "EmptyInput", "TrailingGarbage",
    "parse_sl", "print_sl", "canonical", "BACKEND",
    "FrameError", "UnknownFrame", "MalformedFrame",
    "AgentDescriptor", "AgentsToBeTrained", "LoadClass", "AddRule",
    "OntologyQuery", "TermMapping", "RequestRules", "Frame",
    "encode_frame", "decode_frame", "keyword_pairs",
]

_ATOM_RE = re.compile(r'[^\s()"]+')
_TOKEN_RE = re.compile(r'\s*(?:(\()|(\))|("(?:[^"\\]|\\.)*")|([^\s()"]+)|(")|\Z)', re.S)
_UNESCAPE_RE = re.compile(r"\\(.)", re.S)


def _is_bare_text(text: str) -> bool:
    return _ATOM_RE.fullmatch(text) is not None


def _is_atom_text(text: str) -> bool:
    return bool(text) and text[0] != ":" and _is_bare_text(text)


@dataclass(frozen=True, slots=True)
class Atom:
    text: str

    def __post_init__(self):
        if not _is_atom_text(self.text):
            raise ValueError(f"invalid atom text: {self.text!r}")


@dataclass(frozen=True, slots=True)
class Str:
    text: str


@dataclass(frozen=True, slots=True)
class Keyword:
    name: str

    def __post_init__(self):
        if not _is_bare_text(self.name):
            raise ValueError(f"invalid keyword name: {self.name!r}")


@dataclass(frozen=True, slots=True)
class SList:
    items: tuple

    def __init__(self, items: Iterable["SlNode"] = ()):
        object.__setattr__(self, "items", tuple(items))

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    @property
    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Atom):
            return self.items[0].text
        return None


SlNode = Union[Atom, Str, Keyword, SList]


class SlSyntaxError(ValueError):
    """Raised by :func:`parse_sl`.

    ``offset`` is the 1-based UTF-8 byte position of the offending token;
    errors detected at end of input point one past the last byte.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnbalancedParens(SlSyntaxError):
    pass


class UnterminatedString(SlSyntaxError):
    pass


class EmptyInput(SlSyntaxError):
    pass


class TrailingGarbage(SlSyntaxError):
    pass


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode("utf-8")) + 1


_new = object.__new__
_setattr = object.__setattr__


def _mk(cls, slot, value):
    # skips __post_init__ validation; callers guarantee the invariants
    node = _new(cls)
    _setattr(node, slot, value)
    return node


def _py_parse_sl(text: str) -> SlNode:
    stack: list[list] = []
    root = None
    pos = 0
    n = len(text)
    match = _TOKEN_RE.match
    while True:
        m = match(text, pos)
        kind = m.lastindex
        pos = m.end()
        if kind is None:
            if stack:
                raise UnbalancedParens("unclosed list", _byte_offset(text, n))
            if root is None:
                raise EmptyInput("empty input", _byte_offset(text, n))
            return root
        start = m.start(kind)
        if root is not None:
            if kind == 2:
                raise UnbalancedParens("unexpected ')'", _byte_offset(text, start))
            raise TrailingGarbage("trailing content", _byte_offset(text, start))
        if kind == 1:
            stack.append([])
            continue
        if kind == 2:
            if not stack:
                raise UnbalancedParens("unexpected ')'", _byte_offset(text, start))
            node = _mk(SList, "items", tuple(stack.pop()))
        elif kind == 4:
            tok = m.group(4)
            if tok[0] == ":":
                if len(tok) == 1:
                    raise SlSyntaxError("empty keyword", _byte_offset(text, start))
                node = _mk(Keyword, "name", tok[1:])
            else:
                node = _mk(Atom, "text", tok)
        elif kind == 3:
            body = m.group(3)[1:-1]
            node = _mk(Str, "text", _UNESCAPE_RE.sub(r"\1", body) if "\\" in body else body)
        else:
            raise UnterminatedString("unterminated string", _byte_offset(text, start))
        if stack:
            stack[-1].append(node)
        else:
            root = node


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _py_print_sl(node: SlNode) -> str:
    t = type(node)
    if t is Atom:
        return node.text
    if t is SList:
        return "(" + " ".join([_py_print_sl(child) for child in node.items]) + ")"
    if t is Str:
        return _quote(node.text)
    if t is Keyword:
        return ":" + node.name
    raise TypeError(f"not an SL node: {node!r}")


def parse_sl(text: str) -> SlNode:
    """Parse exactly one s-expression; trailing whitespace is allowed."""
    return _parse(text)


def print_sl(node: SlNode) -> str:
    """Canonical form: single spaces between siblings, no newlines."""
    return _print(node)


_parse = _py_parse_sl
_print = _py_print_sl

# Compiled codec when available; AGENTACADEMY_PURE=1 forces the fallback.
BACKEND = "python"
try:
    if os.environ.get("AGENTACADEMY_PURE"):
        raise ImportError("pure backend requested")
    from . import _slcore
except ImportError:
    _slcore = None
else:
    _slcore.bind(Atom, Str, Keyword, SList, UnbalancedParens, UnterminatedString,
                 EmptyInput, TrailingGarbage, SlSyntaxError)
    _parse, _print = _slcore.parse_sl, _slcore.print_sl
    _is_atom_text, _is_bare_text = _slcore.is_atom_text, _slcore.is_bare_text
    BACKEND = "cython"


def canonical(text: str) -> str:
    """Whitespace-canonical form of SL text."""
    return print_sl(parse_sl(text))


# -- frames ------------------------------------------------------------------


class FrameError(ValueError):
    pass


class UnknownFrame(FrameError):
    def __init__(self, head):
        super().__init__(f"unknown frame head: {head!r}")
        self.head = head


class MalformedFrame(FrameError):
    def __init__(self, path: str, reason: str = "malformed"):
        super().__init__(f"{path}: {reason}")
        self.path = path


def _symbol(text: str, what: str) -> str:
    if not isinstance(text, str) or not text or any(c.isspace() for c in text):
        raise ValueError(f"{what} must be a nonempty symbol without whitespace: {text!r}")
    return text


@dataclass(frozen=True)
class AgentDescriptor:
    name: str
    agent_type: str

    def __post_init__(self):
        _symbol(self.name, "agent name")
        _symbol(self.agent_type, "agent type")


@dataclass(frozen=True)
class AgentsToBeTrained:
    agents: tuple[AgentDescriptor, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))


@dataclass(frozen=True)
class LoadClass:
    behaviors: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "behaviors", tuple(self.behaviors))
        for b in self.behaviors:
            _symbol(b, "class name")


@dataclass(frozen=True)
class AddRule:
    rules: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        for r in self.rules:
            if not r.startswith("(defrule"):
                raise ValueError(f"rule text must begin with '(defrule': {r!r}")


@dataclass(frozen=True)
class OntologyQuery:
    message_ontology: str
    my_ontology: str
    term: str

    def __post_init__(self):
        _symbol(self.message_ontology, "ontology name")
        _symbol(self.my_ontology, "ontology name")
        if not self.term:
            raise ValueError("term must be nonempty")


@dataclass(frozen=True)
class TermMapping:
    from_term: str
    to_term: str


@dataclass(frozen=True)
class RequestRules:
    """A predictor asking the training module for a fresh rule set."""

    agent: str
    location: str

    def __post_init__(self):
        _symbol(self.agent, "agent name")
        _symbol(self.location, "location")


Frame = Union[AgentsToBeTrained, LoadClass, AddRule, OntologyQuery, TermMapping, RequestRules]


def _text_node(text: str) -> SlNode:
    return Atom(text) if _is_atom_text(text) else Str(text)


def _set(items) -> SList:
    return SList((Atom("set"), *items))


def encode_frame(frame: Frame) -> SList:
    if isinstance(frame, AgentsToBeTrained):
        agents = [
            SList((Atom("agent"), Keyword("name"), Atom(a.name), Keyword("type"), Atom(a.agent_type)))
            for a in frame.agents
        ]
        return SList((Atom("agentsToBeTrained"), SList((Atom("agents"), _set(agents)))))
    if isinstance(frame, LoadClass):
        behaviors = [SList((Atom("behavior"), Keyword("classname"), Atom(b))) for b in frame.behaviors]
        return SList((Atom("loadClass"), SList((Atom("behaviors"), _set(behaviors)))))
    if isinstance(frame, AddRule):
        rules = [SList((Atom("jessRule"), Keyword("rule"), Str(r))) for r in frame.rules]
        return SList((Atom("addRule"), SList((Atom("jessRules"), _set(rules)))))
    if isinstance(frame, OntologyQuery):
        return SList((
            Atom("ontologyQuery"),
            SList((
                Atom("map"),
                Keyword("MessageOntology"), Atom(frame.message_ontology),
                Keyword("MyOntology"), Atom(frame.my_ontology),
                Keyword("term"), _text_node(frame.term),
            )),
        ))
    if isinstance(frame, TermMapping):
        return SList((
            Atom("Mapping"),
            SList((Atom("From"), Keyword("term"), Str(frame.from_term))),
            SList((Atom("To"), Keyword("term"), Str(frame.to_term))),
        ))
    if isinstance(frame, RequestRules):
        return SList((
            Atom("requestRules"), Keyword("agent"), Atom(frame.agent), Keyword("location"), Atom(frame.location),
        ))
    raise TypeError(f"not a frame: {frame!r}")


def keyword_pairs(items, path: str) -> dict[str, SlNode]:
    """Read ``:key value`` pairs into a dict; duplicate or dangling keys are malformed."""
    out: dict[str, SlNode] = {}
    if len(items) % 2:
        raise MalformedFrame(path, "odd number of keyword/value items")
    for i in range(0, len(items), 2):
        key, value = items[i], items[i + 1]
        if not isinstance(key, Keyword):
            raise MalformedFrame(f"{path}[{i}]", "expected keyword")
        if key.name in out:
            raise MalformedFrame(f"{path}/:{key.name}", "duplicate keyword")
        out[key.name] = value
    return out


def _text(node, path: str) -> str:
    if isinstance(node, (Atom, Str)):
        return node.text
    raise MalformedFrame(path, "expected atom or string")


def _field(pairs: dict, name: str, path: str) -> str:
    if name not in pairs:
        raise MalformedFrame(f"{path}/:{name}", "missing field")
    return _text(pairs[name], f"{path}/:{name}")


def _expect_list(node, head: str, path: str) -> SList:
    if not isinstance(node, SList) or node.head != head:
        raise MalformedFrame(path, f"expected ({head} ...)")
    return node


def _set_members(node, wrapper: str, path: str) -> tuple:
    outer = _expect_list(node, wrapper, path)
    if len(outer) != 2:
        raise MalformedFrame(path, f"({wrapper} ...) takes one set")
    inner = _expect_list(outer[1], "set", f"{path}/set")
    return inner.items[1:]


def _member(node, head: str, path: str) -> dict:
    lst = _expect_list(node, head, path)
    try:
        return keyword_pairs(lst.items[1:], path)
    except MalformedFrame:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise MalformedFrame(path, str(exc)) from exc


def _guard(path: str, build):
    # constructor invariants surface as MalformedFrame on the decode side
    try:
        return build()
    except ValueError as exc:
        if isinstance(exc, FrameError):
            raise
        raise MalformedFrame(path, str(exc)) from exc


def decode_frame(node: SlNode) -> Frame:
    if not isinstance(node, SList) or node.head is None:
        raise UnknownFrame(None)
    head = node.head
    if head == "agentsToBeTrained":
        if len(node) != 2:
            raise MalformedFrame(head, "expected one (agents ...) child")
        agents = []
        for i, member in enumerate(_set_members(node[1], "agents", f"{head}/agents")):
            path = f"{head}/agents/set[{i}]"
            pairs = _member(member, "agent", path)
            agents.append(_guard(path, lambda: AgentDescriptor(
                _field(pairs, "name", path), _field(pairs, "type", path))))
        return AgentsToBeTrained(tuple(agents))
    if head == "loadClass":
        if len(node) != 2:
            raise MalformedFrame(head, "expected one (behaviors ...) child")
        names = []
        for i, member in enumerate(_set_members(node[1], "behaviors", f"{head}/behaviors")):
            path = f"{head}/behaviors/set[{i}]"
            names.append(_field(_member(member, "behavior", path), "classname", path))
        return _guard(head, lambda: LoadClass(tuple(names)))
    if head == "addRule":
        if len(node) != 2:
            raise MalformedFrame(head, "expected one (jessRules ...) child")
        rules = []
        for i, member in enumerate(_set_members(node[1], "jessRules", f"{head}/jessRules")):
            path = f"{head}/jessRules/set[{i}]"
            rules.append(_field(_member(member, "jessRule", path), "rule", path))
        return _guard(head, lambda: AddRule(tuple(rules)))
    if head == "ontologyQuery":
        if len(node) != 2:
            raise MalformedFrame(head, "expected one (map ...) child")
        path = f"{head}/map"
        pairs = _member(node[1], "map", path)
        return _guard(path, lambda: OntologyQuery(
            _field(pairs, "MessageOntology", path),
            _field(pairs, "MyOntology", path),
            _field(pairs, "term", path),
        ))
    if head == "Mapping":
        if len(node) != 3:
            raise MalformedFrame(head, "expected (From ...) and (To ...)")
        src = _member(node[1], "From", f"{head}/From")
        dst = _member(node[2], "To", f"{head}/To")
        return TermMapping(_field(src, "term", f"{head}/From"), _field(dst, "term", f"{head}/To"))
    if head == "requestRules":
        pairs = keyword_pairs(node.items[1:], head)
        return _guard(head, lambda: RequestRules(_field(pairs, "agent", head), _field(pairs, "location", head)))
    raise UnknownFrame(head)

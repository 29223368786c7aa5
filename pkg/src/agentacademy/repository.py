"""Agent Use Repository: an append-only SL log of observations and feedback.

The log is UTF-8 text, one canonical s-expression per line. The first line
is a header carrying the format version and the attribute schema::

    (aur :version 1 :schema ((NO2NO3 low normal high) (ozone low normal high) ...))
    (obs :id 1 :tick 0 :location valencia :raw (...) :cat (...) :pred 0 :label none :labelsrc none)
    (fb :id 1 :tick 0 :source institutional :who authority :verdict incorrect :suggested 3)

Raw sensor traffic goes to a sibling ``<log>.sensed`` file so the
observation log stays compact.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .mining import Dataset, TrainingExample
from .sl import Atom, Keyword, SList, Str, keyword_pairs, parse_sl, print_sl

__all__ = [
    "Source", "Label", "ObservationRecord", "FeedbackRecord", "Relabeled", "Repository",
    "RepositoryError", "UnknownEvent", "DuplicateFeedback", "StorageFailure", "LogFormatError",
    "LOG_VERSION",
]

LOG_VERSION = 1


class Source(str, Enum):
    INDIVIDUAL = "individual"
    INSTITUTIONAL = "institutional"


class RepositoryError(Exception):
    pass


class UnknownEvent(RepositoryError, KeyError):
    pass


class DuplicateFeedback(RepositoryError):
    pass


class StorageFailure(RepositoryError, OSError):
    pass


class LogFormatError(RepositoryError, ValueError):
    pass


@dataclass(frozen=True)
class Label:
    value: int
    source: Source


@dataclass(frozen=True)
class ObservationRecord:
    tick: int
    location: str
    raw: Mapping[str, float]
    categories: Mapping[str, str]
    predicted: int
    label: Label | None = None
    event_id: int = 0


@dataclass(frozen=True)
class FeedbackRecord:
    """``suggested`` is None for a Correct verdict, else the label the giver proposes."""

    event_id: int
    source: Source
    who: str
    suggested: int | None
    tick: int

    @property
    def correct(self) -> bool:
        return self.suggested is None


@dataclass(frozen=True)
class Relabeled:
    value: int


@dataclass
class _Pending:
    tallies: dict[int, int] = field(default_factory=dict)
    voters: set[str] = field(default_factory=set)


def _pairs_node(mapping: Mapping, fmt=str) -> SList:
    items = []
    for key in sorted(mapping):
        items.append(Atom(key))
        items.append(Atom(fmt(mapping[key])))
    return SList(items)


def _obs_node(rec: ObservationRecord, pending: _Pending | None = None) -> SList:
    items = [
        Atom("obs"),
        Keyword("id"), Atom(str(rec.event_id)),
        Keyword("tick"), Atom(str(rec.tick)),
        Keyword("location"), Atom(rec.location),
        Keyword("raw"), _pairs_node(rec.raw, repr),
        Keyword("cat"), _pairs_node(rec.categories),
        Keyword("pred"), Atom(str(rec.predicted)),
        Keyword("label"), Atom("none" if rec.label is None else str(rec.label.value)),
        Keyword("labelsrc"), Atom("none" if rec.label is None else rec.label.source.value),
    ]
    if pending is not None and (pending.tallies or pending.voters):
        items += [
            Keyword("tally"), SList(SList((Atom(str(k)), Atom(str(v)))) for k, v in sorted(pending.tallies.items())),
            Keyword("voters"), SList(Atom(v) for v in sorted(pending.voters)),
        ]
    return SList(items)


def _fb_node(fb: FeedbackRecord) -> SList:
    items = [
        Atom("fb"),
        Keyword("id"), Atom(str(fb.event_id)),
        Keyword("tick"), Atom(str(fb.tick)),
        Keyword("source"), Atom(fb.source.value),
        Keyword("who"), Atom(fb.who),
        Keyword("verdict"), Atom("correct" if fb.correct else "incorrect"),
    ]
    if not fb.correct:
        items += [Keyword("suggested"), Atom(str(fb.suggested))]
    return SList(items)


def _header_node(schema) -> SList:
    return SList((
        Atom("aur"), Keyword("version"), Atom(str(LOG_VERSION)),
        Keyword("schema"), SList(SList((Atom(a), *(Atom(c) for c in dom))) for a, dom in schema),
    ))


def _atom(pairs, key, lineno) -> str:
    node = pairs.get(key)
    if not isinstance(node, (Atom, Str)):
        raise LogFormatError(f"line {lineno}: missing or malformed :{key}")
    return node.text


def _read_pairs(pairs, key, lineno) -> list[tuple[str, str]]:
    node = pairs.get(key)
    if not isinstance(node, SList) or len(node) % 2:
        raise LogFormatError(f"line {lineno}: malformed :{key}")
    texts = [_atom({"x": n}, "x", lineno) for n in node.items]
    return list(zip(texts[::2], texts[1::2]))


class Repository:
    """Append-only observation/feedback store with a replayable in-memory index.

    Individual feedback only relabels an event once ``threshold`` concordant
    verdicts have arrived; institutional feedback relabels immediately and is
    never overridden by individuals.
    """

    def __init__(self, path: str | os.PathLike, schema: Sequence[tuple[str, Sequence[str]]] | None = None,
                 threshold: int = 5):
        if threshold < 1:
            raise ValueError("threshold must be at least 1")
        self.path = Path(path)
        self.threshold = threshold
        self.index: dict[int, ObservationRecord] = {}
        self.pending: dict[int, _Pending] = {}
        self._next_id = 1
        self._lock = threading.RLock()
        self._sensed = None
        if self.path.exists() and self.path.stat().st_size > 0:
            self._replay(schema)
        else:
            if schema is None:
                raise ValueError("a schema is required to create a new repository")
            self.schema = tuple((a, tuple(dom)) for a, dom in schema)
            self._write_fresh([print_sl(_header_node(self.schema))])
        try:
            self._fh = open(self.path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    # -- persistence ---------------------------------------------------------

    def _write_fresh(self, lines: Iterable[str]) -> None:
        tmp = self.path.with_name(self.path.name + ".tmp")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(tmp, "w", encoding="utf-8") as fh:
                for line in lines:
                    fh.write(line + "\n")
            os.replace(tmp, self.path)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def _append(self, node: SList) -> None:
        try:
            self._fh.write(print_sl(node) + "\n")
            self._fh.flush()
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def _replay(self, schema) -> None:
        with open(self.path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        header = parse_sl(lines[0])
        if not isinstance(header, SList) or header.head != "aur":
            raise LogFormatError("line 1: missing (aur ...) header")
        hp = keyword_pairs(header.items[1:], "aur")
        version = _atom(hp, "version", 1)
        if version != str(LOG_VERSION):
            raise LogFormatError(f"unsupported log version {version}")
        stored = tuple(
            (n[0].text, tuple(c.text for c in n.items[1:])) for n in hp["schema"].items
        )
        if schema is not None and tuple((a, tuple(d)) for a, d in schema) != stored:
            raise LogFormatError("schema differs from the one recorded in the log")
        self.schema = stored
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            node = parse_sl(line)
            if not isinstance(node, SList):
                raise LogFormatError(f"line {lineno}: not a record")
            pairs = keyword_pairs(node.items[1:], node.head or "?")
            if node.head == "obs":
                self._apply_obs(pairs, lineno)
            elif node.head == "fb":
                suggested = _atom(pairs, "suggested", lineno) if "suggested" in pairs else None
                fb = FeedbackRecord(
                    event_id=int(_atom(pairs, "id", lineno)),
                    source=Source(_atom(pairs, "source", lineno)),
                    who=_atom(pairs, "who", lineno),
                    suggested=None if suggested is None else int(suggested),
                    tick=int(_atom(pairs, "tick", lineno)),
                )
                self._apply_feedback(fb)
            else:
                raise LogFormatError(f"line {lineno}: unknown record {node.head!r}")

    def _apply_obs(self, pairs, lineno) -> None:
        label_text = _atom(pairs, "label", lineno)
        label = None
        if label_text != "none":
            label = Label(int(label_text), Source(_atom(pairs, "labelsrc", lineno)))
        rec = ObservationRecord(
            tick=int(_atom(pairs, "tick", lineno)),
            location=_atom(pairs, "location", lineno),
            raw={k: float(v) for k, v in _read_pairs(pairs, "raw", lineno)},
            categories=dict(_read_pairs(pairs, "cat", lineno)),
            predicted=int(_atom(pairs, "pred", lineno)),
            label=label,
            event_id=int(_atom(pairs, "id", lineno)),
        )
        if rec.event_id < self._next_id:
            raise LogFormatError(f"line {lineno}: event ids must strictly increase")
        self.index[rec.event_id] = rec
        self._next_id = rec.event_id + 1
        if "tally" in pairs:
            pend = self.pending.setdefault(rec.event_id, _Pending())
            for entry in pairs["tally"].items:
                pend.tallies[int(entry[0].text)] = int(entry[1].text)
            pend.voters.update(v.text for v in pairs["voters"].items)

    def close(self) -> None:
        self._fh.close()
        if self._sensed is not None:
            self._sensed.close()
            self._sensed = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- operations ----------------------------------------------------------

    def record_observation(self, rec: ObservationRecord) -> int:
        with self._lock:
            rec = replace(rec, event_id=self._next_id)
            self._append(_obs_node(rec))
            self.index[rec.event_id] = rec
            self._next_id += 1
            return rec.event_id

    def record_feedback(self, fb: FeedbackRecord) -> Relabeled | None:
        with self._lock:
            if fb.event_id not in self.index:
                raise UnknownEvent(fb.event_id)
            pend = self.pending.get(fb.event_id)
            if pend is not None and fb.who in pend.voters:
                raise DuplicateFeedback(f"{fb.who} already judged event {fb.event_id}")
            self._append(_fb_node(fb))
            return self._apply_feedback(fb)

    def _apply_feedback(self, fb: FeedbackRecord) -> Relabeled | None:
        rec = self.index[fb.event_id]
        pend = self.pending.setdefault(fb.event_id, _Pending())
        pend.voters.add(fb.who)
        value = rec.predicted if fb.correct else fb.suggested
        if fb.source is Source.INSTITUTIONAL:
            self.index[fb.event_id] = replace(rec, label=Label(value, Source.INSTITUTIONAL))
            return Relabeled(value)
        count = pend.tallies.get(value, 0) + 1
        pend.tallies[value] = count
        if count == self.threshold and not (rec.label and rec.label.source is Source.INSTITUTIONAL):
            self.index[fb.event_id] = replace(rec, label=Label(value, Source.INDIVIDUAL))
            return Relabeled(value)
        return None

    def query_examples(self, location: str) -> Dataset:
        """Snapshot of labeled observations at one location as a training set."""
        with self._lock:
            examples = [
                TrainingExample(dict(rec.categories), rec.label.value)
                for rec in self.index.values()
                if rec.location == location and rec.label is not None
            ]
        return Dataset(self.schema, examples)

    def compact(self) -> Path:
        """Rewrite the log with labels and pending tallies folded into each observation."""
        with self._lock:
            self._fh.close()
            lines = [print_sl(_header_node(self.schema))]
            lines += [print_sl(_obs_node(rec, self.pending.get(eid))) for eid, rec in self.index.items()]
            self._write_fresh(lines)
            self._fh = open(self.path, "a", encoding="utf-8")
            return self.path

    def record_sensed(self, tick: int, station: str, location: str, raw: Mapping[str, float]) -> None:
        """Append one station's raw readings to the sensed-data file."""
        with self._lock:
            try:
                if self._sensed is None:
                    self._sensed = open(self.sensed_path, "a", encoding="utf-8")
                values = " ".join(f"{k} {raw[k]!r}" for k in sorted(raw))
                self._sensed.write(f"(sense :tick {tick} :station {station} :location {location} :raw ({values}))\n")
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc

    def flush(self) -> None:
        if self._sensed is not None:
            self._sensed.flush()

    # -- inspection ----------------------------------------------------------

    @property
    def sensed_path(self) -> Path:
        return self.path.with_name(self.path.name + ".sensed")

    def state(self):
        """Everything replay must reproduce: observations, tallies and who has voted."""
        with self._lock:
            return (
                dict(self.index),
                {eid: (dict(p.tallies), frozenset(p.voters)) for eid, p in self.pending.items()},
            )

    def get(self, event_id: int) -> ObservationRecord:
        try:
            return self.index[event_id]
        except KeyError:
            raise UnknownEvent(event_id) from None

    def __len__(self):
        return len(self.index)

    def summary(self) -> dict:
        by_location: dict[str, list[int]] = {}
        for rec in self.index.values():
            counts = by_location.setdefault(rec.location, [0, 0])
            counts[0] += 1
            counts[1] += rec.label is not None
        return {
            "observations": len(self.index),
            "labeled": sum(c[1] for c in by_location.values()),
            "institutional": sum(1 for r in self.index.values() if r.label and r.label.source is Source.INSTITUTIONAL),
            "individual": sum(1 for r in self.index.values() if r.label and r.label.source is Source.INDIVIDUAL),
            "by_location": {loc: tuple(c) for loc, c in sorted(by_location.items())},
        }

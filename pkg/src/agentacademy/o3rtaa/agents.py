"""Scenario roles, loaded into agents by class name through the behavior registry."""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from ..mining import ALARM_KEY, DEFAULT_FACT, Discretizer, classify
from ..ontology import OntologyError, OntologyService
from ..repository import FeedbackRecord, ObservationRecord, Repository, Source
from ..rules import RuleBase, WorkingMemory, run
from ..runtime import ATM, TRAINING_ONTOLOGY, Agent, Behavior
from ..sl import (
    Atom, FrameError, Keyword, RequestRules, SList, decode_frame, encode_frame, keyword_pairs,
)
from .config import Channel, ScenarioConfig, UserProfile
from .environment import SensorReading

__all__ = [
    "Significant", "Discarded", "DeliveryDecision", "DataAcquisition",
    "DiagnosisBehavior", "PredictorBehavior", "DistributorBehavior", "UserBehavior",
    "FeedbackBehavior", "OntologyBehavior", "distribute", "simulate_verdict",
    "readings_node", "predict_alarm",
]


@dataclass(frozen=True)
class Significant:
    station: str
    location: str
    variable: str
    category: str


@dataclass(frozen=True)
class Discarded:
    reason: str  # "Faulty" or "Redundant"


@dataclass(frozen=True)
class DeliveryDecision:
    user_id: str
    channel: str
    delay_until: int | None = None  # None means send now

    @property
    def send_now(self) -> bool:
        return self.delay_until is None


class DataAcquisition:
    """Single writer in front of the repository."""

    def __init__(self, repository: Repository):
        self.repository = repository
        self._lock = threading.Lock()

    def record_observation(self, rec: ObservationRecord) -> int:
        with self._lock:
            return self.repository.record_observation(rec)

    def record_feedback(self, fb: FeedbackRecord):
        with self._lock:
            return self.repository.record_feedback(fb)

    def record_sensed(self, tick, station, location, raw) -> None:
        with self._lock:
            self.repository.record_sensed(tick, station, location, raw)


def _pairs(mapping: Mapping, fmt=str) -> SList:
    items = []
    for k in sorted(mapping):
        items += [Atom(k), Atom(fmt(mapping[k]))]
    return SList(items)


def _read_pairs(node: SList) -> dict[str, str]:
    texts = [n.text for n in node.items]
    return dict(zip(texts[::2], texts[1::2]))


def readings_node(tick: int, readings: Iterable[SensorReading]) -> SList:
    return SList((
        Atom("readings"), Keyword("tick"), Atom(str(tick)),
        SList(SList((Atom(r.station), Atom(r.location), Atom(r.variable), Atom(repr(r.value)))) for r in readings),
    ))


# -- diagnosis ---------------------------------------------------------------


class DiagnosisBehavior(Behavior):
    """Screens raw readings: drops faulty and redundant ones, forwards changes."""

    name = "DiagnosisBehavior"

    def __init__(self, config: ScenarioConfig, acquisition: DataAcquisition | None = None,
                 predictor_for: Callable[[str], str] = lambda loc: f"predictor_{loc}"):
        self.bounds = {v: spec.bounds for v, spec in config.variables.items()}
        self.variables = tuple(sorted(config.variables))
        self.discretizer: Discretizer = config.discretizer
        self.acquisition = acquisition
        self.predictor_for = predictor_for
        self.forwarded: dict[tuple[str, str], str] = {}
        self.current: dict[tuple[str, str], tuple[float, str]] = {}
        self.counts = {"Faulty": 0, "Redundant": 0, "Significant": 0, "forwarded": 0}

    def diagnose(self, reading: SensorReading) -> Significant | Discarded:
        lo, hi = self.bounds[reading.variable]
        if not lo <= reading.value <= hi:
            self.counts["Faulty"] += 1
            return Discarded("Faulty")
        category = self.discretizer(reading.variable, reading.value)
        key = (reading.station, reading.variable)
        self.current[key] = (reading.value, category)
        if self.forwarded.get(key) == category:
            self.counts["Redundant"] += 1
            return Discarded("Redundant")
        self.counts["Significant"] += 1
        return Significant(reading.station, reading.location, reading.variable, category)

    def screen(self, agent: Agent, tick: int, readings: Sequence[SensorReading]) -> int:
        """Diagnose a tick's readings and forward one observation per changed station."""
        by_station: dict[str, list[SensorReading]] = {}
        for r in readings:
            by_station.setdefault(r.station, []).append(r)
        sent = 0
        for station, rs in by_station.items():
            location = rs[0].location
            valid = {}
            for r in rs:
                verdict = self.diagnose(r)
                if not (isinstance(verdict, Discarded) and verdict.reason == "Faulty"):
                    valid[r.variable] = r.value
            if self.acquisition is not None and valid:
                self.acquisition.record_sensed(tick, station, location, valid)
            if not all((station, v) in self.current for v in self.variables):
                continue
            if all(self.forwarded.get((station, v)) == self.current[(station, v)][1] for v in self.variables):
                continue
            raw = {v: self.current[(station, v)][0] for v in self.variables}
            cat = {v: self.current[(station, v)][1] for v in self.variables}
            for v in self.variables:
                self.forwarded[(station, v)] = cat[v]
            node = SList((
                Atom("observation"), Keyword("tick"), Atom(str(tick)), Keyword("station"), Atom(station),
                Keyword("location"), Atom(location), Keyword("raw"), _pairs(raw, repr), Keyword("cat"), _pairs(cat),
            ))
            agent.send(self.predictor_for(location), "inform", node)
            self.counts["forwarded"] += 1
            sent += 1
        return sent

    def handle(self, agent, env, node):
        if not (isinstance(node, SList) and node.head == "readings"):
            return False
        tick = int(node[2].text)
        readings = [
            SensorReading(tick, r[0].text, r[1].text, r[2].text, float(r[3].text)) for r in node[3].items
        ]
        self.screen(agent, tick, readings)
        return True


# -- prediction --------------------------------------------------------------


def predict_alarm(rulebase: RuleBase, categories: Mapping[str, str]) -> int:
    facts = dict(categories)
    facts[DEFAULT_FACT.attribute] = DEFAULT_FACT.value
    store = run(WorkingMemory(facts), rulebase).store
    try:
        return int(store.get(ALARM_KEY, 0))
    except ValueError:
        return 0


class PredictorBehavior(Behavior):
    """Runs the agent's rulebase on forwarded observations and asks for retraining.

    A retrain is requested after every ``window`` predictions whose labeled
    error rate exceeds ``epsilon``, and unconditionally every ``retrain_every``
    observations.
    """

    name = "PredictorBehavior"

    def __init__(self, location: str, acquisition: DataAcquisition, config: ScenarioConfig,
                 distributor: str = "distributor", on_event: Callable[[int, str], None] | None = None,
                 ontology: OntologyService | None = None):
        self.location = location
        self.acquisition = acquisition
        self.distributor = distributor
        self.window = config.window
        self.epsilon = config.epsilon
        self.retrain_every = config.retrain_every
        self.on_event = on_event
        self.ontology = ontology
        self.window_events: list[int] = []
        self.since_retrain = 0
        self.awaiting_rules = False
        self.retrain_requests = 0
        # epoch k runs under rulebases[k]; epoch_events[k] lists its event ids
        self.rulebases: list[RuleBase] = []
        self.epoch_events: list[list[int]] = []
        self.epoch_ticks: list[int] = []

    def setup(self, agent):
        self._open_epoch(agent)

    def _open_epoch(self, agent):
        self.rulebases.append(agent.rulebase)
        self.epoch_events.append([])
        self.epoch_ticks.append(agent.platform.tick)

    @property
    def epoch(self) -> int:
        return len(self.rulebases) - 1

    def rules_installed(self, agent):
        self.awaiting_rules = False
        self._open_epoch(agent)

    def predict(self, agent: Agent, tick: int, raw: Mapping[str, float], categories: Mapping[str, str]) -> tuple[int, int]:
        alarm = predict_alarm(agent.rulebase, categories)
        event_id = self.acquisition.record_observation(
            ObservationRecord(tick, self.location, dict(raw), dict(categories), alarm)
        )
        self.epoch_events[-1].append(event_id)
        if self.on_event is not None:
            self.on_event(event_id, agent.name)
        if alarm > 0:
            agent.send(self.distributor, "inform", SList((
                Atom("alarm"), Keyword("event"), Atom(str(event_id)), Keyword("type"), Atom(str(alarm)),
                Keyword("location"), Atom(self.location), Keyword("tick"), Atom(str(tick)),
            )))
        self._maybe_retrain(agent, event_id)
        return event_id, alarm

    def _maybe_retrain(self, agent: Agent, event_id: int) -> None:
        self.since_retrain += 1
        self.window_events.append(event_id)
        want = False
        if len(self.window_events) >= self.window:
            repo = self.acquisition.repository
            labeled = [repo.index[e] for e in self.window_events if repo.index[e].label is not None]
            if labeled:
                errors = sum(1 for r in labeled if r.label.value != r.predicted)
                want = errors / len(labeled) > self.epsilon
            self.window_events = []
        if self.since_retrain >= self.retrain_every:
            want = True
        if want and not self.awaiting_rules:
            self.awaiting_rules = True
            self.since_retrain = 0
            self.retrain_requests += 1
            agent.send(ATM, "request", encode_frame(RequestRules(agent.name, self.location)), TRAINING_ONTOLOGY)

    def handle(self, agent, env, node):
        if not isinstance(node, SList):
            return False
        if env.performative == "failure" and env.sender == ATM:
            self.awaiting_rules = False
            return True
        if env.performative == "inform" and node.head == "done":
            return True
        if node.head != "observation":
            return False
        pairs = keyword_pairs(node.items[1:], "observation")
        raw = {k: float(v) for k, v in _read_pairs(pairs["raw"]).items()}
        cat = _read_pairs(pairs["cat"])
        if env.ontology != agent.ontology and self.ontology is not None:
            # only attribute names are translated; values pass through
            src, dst = env.ontology, agent.ontology
            cat = {self.ontology.translate_term(k, src, dst): v for k, v in cat.items()}
            raw = {self.ontology.translate_term(k, src, dst): v for k, v in raw.items()}
        self.predict(agent, int(pairs["tick"].text), raw, cat)
        return True


# -- distribution ------------------------------------------------------------


def _next_start(channel: Channel, tick: int, day_length: int) -> int:
    delta = (channel.start - tick % day_length) % day_length
    return tick + (delta or day_length)


def distribute(alarm: int, location: str, users: Iterable[tuple[UserProfile, str]], tick: int,
               urgent_threshold: int = 3, day_length: int = 24) -> list[DeliveryDecision]:
    """Pick recipients and channel for one alarm.

    ``users`` yields (profile, current location). Urgent alarms go out by SMS
    immediately; others use the first channel whose window holds the current
    hour, or wait for the first channel's next window.
    """
    hour = tick % day_length
    out = []
    for profile, current in users:
        if alarm not in profile.subscribed or current != location:
            continue
        if alarm >= urgent_threshold:
            out.append(DeliveryDecision(profile.user_id, "sms"))
            continue
        for ch in profile.channels:
            if ch.contains(hour):
                out.append(DeliveryDecision(profile.user_id, ch.name))
                break
        else:
            first = profile.channels[0]
            out.append(DeliveryDecision(profile.user_id, first.name, _next_start(first, tick, day_length)))
    return out


class DistributorBehavior(Behavior):
    name = "DistributorBehavior"

    def __init__(self, config: ScenarioConfig, user_agents: Sequence[str]):
        self.user_agents = tuple(user_agents)
        self.urgent_threshold = config.urgent_threshold
        self.day_length = config.day_length
        # (tick, event id, alarm, decision)
        self.log: list[tuple[int, int, int, DeliveryDecision]] = []

    def handle(self, agent, env, node):
        if not (env.performative == "inform" and isinstance(node, SList) and node.head == "alarm"):
            return False
        pairs = keyword_pairs(node.items[1:], "alarm")
        event_id = int(pairs["event"].text)
        alarm = int(pairs["type"].text)
        location = pairs["location"].text
        tick = int(pairs["tick"].text)
        users = []
        for name in self.user_agents:
            ub = agent.platform.lookup(name).behaviors.get("UserBehavior")
            if ub is not None:
                users.append((ub.profile, ub.current_location()))
        for d in distribute(alarm, location, users, tick, self.urgent_threshold, self.day_length):
            self.log.append((tick, event_id, alarm, d))
            items = [Atom("deliver"), Keyword("event"), Atom(str(event_id)), Keyword("type"), Atom(str(alarm)),
                     Keyword("location"), Atom(location), Keyword("channel"), Atom(d.channel)]
            items += [Keyword("delay"), Atom(str(d.delay_until))] if d.delay_until is not None else []
            agent.send(f"user_{d.user_id}", "inform", SList(items))
        return True


class UserBehavior(Behavior):
    """Holds a subscriber profile; mobile users wander between locations."""

    name = "UserBehavior"

    def __init__(self, profile: UserProfile):
        self.profile = profile
        self.location = profile.location
        self.inbox: list[tuple[int, int, str]] = []

    def current_location(self) -> str:
        return self.location

    def move(self, rng: random.Random, locations: Sequence[str], mobility: float) -> None:
        if self.profile.mobile and rng.random() < mobility:
            self.location = rng.choice(list(locations))

    def handle(self, agent, env, node):
        if not (isinstance(node, SList) and node.head == "deliver"):
            return False
        pairs = keyword_pairs(node.items[1:], "deliver")
        self.inbox.append((int(pairs["event"].text), int(pairs["type"].text), pairs["channel"].text))
        return True


# -- feedback ----------------------------------------------------------------


def simulate_verdict(predicted: int, truth: int, accurate: bool, rng: random.Random) -> int | None:
    """Return None for 'Correct' or the suggested label; inaccurate givers pick a wrong verdict."""
    if accurate:
        return None if predicted == truth else truth
    wrong = [c for c in range(4) if c != truth]
    pick = rng.choice(wrong)
    return None if pick == predicted else pick


class FeedbackBehavior(Behavior):
    name = "FeedbackBehavior"

    def __init__(self, config: ScenarioConfig, acquisition: DataAcquisition):
        self.acquisition = acquisition
        self.hidden_truth = config.hidden_truth
        self.fraction = config.institutional_fraction
        self.accuracy = config.individual_accuracy
        self.authority = config.authority
        self.relabels = 0

    def feedback_round(self, tick: int, events: Sequence[int], deliveries: Sequence[tuple[str, int]],
                       rng: random.Random) -> list[FeedbackRecord]:
        """Institutional verdicts on a fraction of this tick's events, then one verdict per delivery."""
        repo = self.acquisition.repository
        out = []
        for eid in events:
            if rng.random() < self.fraction:
                rec = repo.index[eid]
                truth = classify(self.hidden_truth, rec.categories)
                out.append(FeedbackRecord(eid, Source.INSTITUTIONAL, self.authority,
                                          simulate_verdict(rec.predicted, truth, True, rng), tick))
        for user, eid in deliveries:
            rec = repo.index[eid]
            truth = classify(self.hidden_truth, rec.categories)
            accurate = rng.random() < self.accuracy
            out.append(FeedbackRecord(eid, Source.INDIVIDUAL, user,
                                      simulate_verdict(rec.predicted, truth, accurate, rng), tick))
        for fb in out:
            if self.acquisition.record_feedback(fb) is not None:
                self.relabels += 1
        return out


# -- ontology agent ----------------------------------------------------------


class OntologyBehavior(Behavior):
    name = "OntologyBehavior"

    def __init__(self, service: OntologyService):
        self.service = service

    def handle(self, agent, env, node):
        if not (isinstance(node, SList) and node.head == "ontologyQuery"):
            return False
        try:
            frame = decode_frame(node)
            answer = self.service.map_term(frame)
        except (FrameError, OntologyError) as exc:
            agent.fail(env, type(exc).__name__, str(exc))
            return True
        agent.reply(env, "inform", encode_frame(answer))
        return True

"""Agent platform: directory, mailboxes, agent factory and the training module.

Two scheduling modes share one contract (each agent handles one message at a
time, per sender/receiver pair delivery is FIFO):

* ``deterministic`` -- a single seeded scheduler picks the next non-empty
  mailbox; runs are reproducible and transcripts byte-identical.
* ``threads`` -- one worker thread per agent.
"""

from __future__ import annotations

import logging
import queue
import random
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, TextIO

from . import mining
from .rules import RuleBase, RuleError, parse_defrule
from .sl import (
    AddRule, AgentDescriptor, AgentsToBeTrained, Atom, FrameError, Keyword, LoadClass,
    SList, SlNode, Str, decode_frame, encode_frame, parse_sl, print_sl,
)

__all__ = [
    "Envelope", "Receipt", "AgentSpec", "Behavior", "BehaviorRegistry", "Agent", "Platform",
    "TrainingBehavior", "PlatformError", "DuplicateName", "UnknownBehavior", "UnknownReceiver",
    "UnknownAgent", "failure_content", "parse_failure", "PERFORMATIVES", "TRAINING_ONTOLOGY",
    "FACTORY", "ATM",
]

log = logging.getLogger(__name__)

PERFORMATIVES = frozenset({"request", "inform", "failure"})
TRAINING_ONTOLOGY = "AgentAcademy"
FACTORY = "factory"
ATM = "atm"


class PlatformError(Exception):
    pass


class DuplicateName(PlatformError):
    pass


class UnknownBehavior(PlatformError):
    pass


class UnknownReceiver(PlatformError):
    pass


class UnknownAgent(PlatformError):
    pass


@dataclass(frozen=True)
class Envelope:
    performative: str
    sender: str
    receiver: str
    ontology: str
    content: str

    def __post_init__(self):
        if self.performative not in PERFORMATIVES:
            raise ValueError(f"unsupported performative {self.performative!r}")

    def line(self, tick: int) -> str:
        return f"{tick} {self.sender} {self.receiver} {self.performative} {self.ontology} {self.content}"


@dataclass(frozen=True)
class Receipt:
    seq: int
    tick: int


def failure_content(reason: str, detail: str = "") -> str:
    return print_sl(SList((Atom("failure"), Keyword("reason"), Atom(reason), Keyword("detail"), Str(detail))))


def parse_failure(node: SlNode) -> tuple[str, str] | None:
    if isinstance(node, SList) and node.head == "failure" and len(node) == 5:
        return node[2].text, node[4].text
    return None


@dataclass
class AgentSpec:
    name: str
    agent_type: str
    behaviors: tuple[str, ...] = ()
    ontology: str = "O3RTAAEnglish"


class Behavior:
    """A role an agent can load by class name.

    ``handle`` returns True when it consumed the message.
    """

    name = "Behavior"

    def setup(self, agent: "Agent") -> None:
        pass

    def handle(self, agent: "Agent", env: Envelope, node: SlNode) -> bool:
        return False

    def rules_installed(self, agent: "Agent") -> None:
        pass


class BehaviorRegistry:
    """Closed class-name -> behavior factory table standing in for dynamic class loading."""

    def __init__(self, factories: Mapping[str, Callable[["Agent"], Behavior]] | None = None):
        self._factories: dict[str, Callable[[Agent], Behavior]] = {}
        for name, factory in (factories or {}).items():
            self.register(name, factory)

    def register(self, name: str, factory: Callable[["Agent"], Behavior]) -> None:
        if name in self._factories:
            raise DuplicateName(f"behavior {name} already registered")
        self._factories[name] = factory

    def create(self, name: str, agent: "Agent") -> Behavior:
        try:
            factory = self._factories[name]
        except KeyError:
            raise UnknownBehavior(name) from None
        return factory(agent)

    def __contains__(self, name: str) -> bool:
        return name in self._factories

    def names(self) -> list[str]:
        return list(self._factories)


class Agent:
    def __init__(self, platform: "Platform", name: str, agent_type: str, ontology: str = "O3RTAAEnglish"):
        self.platform = platform
        self.name = name
        self.agent_type = agent_type
        self.ontology = ontology
        self.behaviors: dict[str, Behavior] = {}
        self.rulebase = RuleBase()
        self.failures: list[tuple[str, str, str]] = []

    def __repr__(self):
        return f"Agent({self.name!r}, {self.agent_type!r}, behaviors={list(self.behaviors)})"

    def behavior(self, name: str) -> Behavior:
        return self.behaviors[name]

    def send(self, receiver: str, performative: str, content: SlNode | str, ontology: str | None = None) -> Receipt:
        text = content if isinstance(content, str) else print_sl(content)
        env = Envelope(performative, self.name, receiver, ontology or self.ontology, text)
        return self.platform.deliver(env)

    def reply(self, env: Envelope, performative: str, content: SlNode | str) -> Receipt:
        return self.send(env.sender, performative, content, env.ontology)

    def fail(self, env: Envelope, reason: str, detail: str = "") -> Receipt:
        return self.reply(env, "failure", failure_content(reason, detail))

    # -- built-in training abilities of an untrained agent --------------------

    def install_behaviors(self, names: Iterable[str]) -> None:
        names = list(names)
        registry = self.platform.registry
        missing = [n for n in names if n not in registry]
        if missing:
            raise UnknownBehavior(", ".join(missing))
        for n in names:
            if n not in self.behaviors:
                b = registry.create(n, self)
                self.behaviors[n] = b
                b.setup(self)

    def install_rules(self, frame: AddRule) -> None:
        """Replace the rulebase wholesale; any bad rule leaves the old one in place."""
        new = RuleBase(parse_defrule(text) for text in frame.rules)
        self.rulebase = new
        for b in self.behaviors.values():
            b.rules_installed(self)

    def handle(self, env: Envelope) -> None:
        node = parse_sl(env.content)
        if env.performative == "failure":
            info = parse_failure(node)
            self.failures.append((env.sender, *(info or ("unknown", env.content))))
        head = node.head if isinstance(node, SList) else None
        if head in ("loadClass", "addRule") and env.performative == "request":
            try:
                frame = decode_frame(node)
                if isinstance(frame, LoadClass):
                    self.install_behaviors(frame.behaviors)
                else:
                    self.install_rules(frame)
            except (FrameError, RuleError, UnknownBehavior) as exc:
                self.fail(env, type(exc).__name__, str(exc))
                return
            self.reply(env, "inform", SList((Atom("done"), Atom(head))))
            return
        for b in list(self.behaviors.values()):
            if b.handle(self, env, node):
                return
        if env.performative == "request":
            self.fail(env, "NotUnderstood", env.content)
        else:
            log.debug("%s ignored %s from %s", self.name, env.performative, env.sender)


class Platform:
    def __init__(self, registry: BehaviorRegistry | None = None, seed: int = 0, mode: str = "deterministic",
                 transcript: TextIO | None = None, keep_transcript: bool = True):
        if mode not in ("deterministic", "threads"):
            raise ValueError(f"unknown mode {mode!r}")
        self.registry = registry or BehaviorRegistry()
        self.mode = mode
        self.tick = 0
        self.agents: dict[str, Agent] = {}
        self.requested_behaviors: dict[str, tuple[str, ...]] = {}
        self.transcript: list[str] = []
        self._keep = keep_transcript
        self._out = transcript
        self._rng = random.Random(seed)
        self._seq = 0
        self._lock = threading.Lock()
        # deterministic mode
        self._mail: dict[str, deque] = {}
        self._ready: list[str] = []
        # threads mode
        self._queues: dict[str, queue.Queue] = {}
        self._threads: dict[str, threading.Thread] = {}
        self._inflight = 0
        self._handled = 0
        self._idle = threading.Condition(self._lock)
        self._running = False
        self.errors: list[BaseException] = []
        self.add_agent(Agent(self, FACTORY, "agentFactory", TRAINING_ONTOLOGY))

    # -- directory -------------------------------------------------------------

    def add_agent(self, agent: Agent, behaviors: Iterable[str] = ()) -> Agent:
        """Register an agent directly (platform services bootstrap this way)."""
        with self._lock:
            if agent.name in self.agents:
                raise DuplicateName(agent.name)
            self.agents[agent.name] = agent
            self._mail[agent.name] = deque()
            if self.mode == "threads":
                self._queues[agent.name] = queue.Queue()
                if self._running:
                    self._spawn(agent.name)
        agent.install_behaviors(behaviors)
        return agent

    def lookup(self, name: str) -> Agent:
        try:
            return self.agents[name]
        except KeyError:
            raise UnknownAgent(name) from None

    def create_agent(self, spec: AgentSpec) -> str:
        """Agent Factory: register an untrained agent and announce it to the training module."""
        if spec.name in self.agents:
            raise DuplicateName(spec.name)
        missing = [b for b in spec.behaviors if b not in self.registry]
        if missing:
            raise UnknownBehavior(", ".join(missing))
        if ATM not in self.agents:
            raise UnknownReceiver(ATM)
        self.add_agent(Agent(self, spec.name, spec.agent_type, spec.ontology))
        if spec.behaviors:
            self.requested_behaviors[spec.name] = tuple(spec.behaviors)
        frame = AgentsToBeTrained((AgentDescriptor(spec.name, spec.agent_type),))
        self.agents[FACTORY].send(ATM, "request", encode_frame(frame), TRAINING_ONTOLOGY)
        return spec.name

    # -- messaging -------------------------------------------------------------

    def deliver(self, env: Envelope) -> Receipt:
        with self._lock:
            if env.receiver not in self.agents:
                raise UnknownReceiver(env.receiver)
            self._seq += 1
            receipt = Receipt(self._seq, self.tick)
            line = env.line(self.tick)
            if self._keep:
                self.transcript.append(line)
            if self._out is not None:
                self._out.write(line + "\n")
            if self.mode == "deterministic":
                box = self._mail[env.receiver]
                if not box:
                    self._ready.append(env.receiver)
                box.append(env)
            else:
                self._inflight += 1
                self._queues[env.receiver].put(env)
        return receipt

    def pending(self) -> int:
        with self._lock:
            if self.mode == "deterministic":
                return sum(len(b) for b in self._mail.values())
            return self._inflight

    def run_until_idle(self, max_steps: int | None = None) -> int:
        """Process messages until every mailbox is empty; returns messages handled."""
        if self.mode == "threads":
            return self._run_threads()
        steps = 0
        ready = self._ready
        while ready:
            if max_steps is not None and steps >= max_steps:
                break
            i = self._rng.randrange(len(ready))
            name = ready[i]
            box = self._mail[name]
            env = box.popleft()
            if not box:
                ready[i] = ready[-1]
                ready.pop()
            self.agents[name].handle(env)
            steps += 1
        return steps

    # -- threads mode ------------------------------------------------------------

    def _spawn(self, name: str) -> None:
        t = threading.Thread(target=self._worker, args=(name,), name=f"agent-{name}", daemon=True)
        self._threads[name] = t
        t.start()

    def _worker(self, name: str) -> None:
        q = self._queues[name]
        agent = self.agents[name]
        while True:
            env = q.get()
            if env is None:
                return
            try:
                agent.handle(env)
            except BaseException as exc:  # surfaced by run_until_idle
                self.errors.append(exc)
            finally:
                with self._idle:
                    self._inflight -= 1
                    self._handled += 1
                    if self._inflight == 0:
                        self._idle.notify_all()

    def _run_threads(self) -> int:
        with self._lock:
            if not self._running:
                self._running = True
                for name in self.agents:
                    self._spawn(name)
            start = self._handled
        with self._idle:
            while self._inflight:
                self._idle.wait()
            handled = self._handled - start
        if self.errors:
            raise self.errors[0]
        return handled

    def shutdown(self) -> None:
        if self.mode == "threads" and self._running:
            for q in self._queues.values():
                q.put(None)
            for t in self._threads.values():
                t.join()
            self._running = False
            self._threads.clear()


class TrainingBehavior(Behavior):
    """Agent Training Module: hands out behaviors and mined rule sets.

    ``type_behaviors`` maps an agent type to the behavior class names an agent
    of that type is loaded with. ``repository`` supplies training snapshots.
    """

    name = "TrainingBehavior"

    def __init__(self, type_behaviors: Mapping[str, Iterable[str]] | None = None, repository=None):
        self.type_behaviors = {k: tuple(v) for k, v in (type_behaviors or {}).items()}
        self.repository = repository
        self.trees: dict[str, mining.DecisionTree] = {}
        self.retrain_count = 0

    def handle(self, agent, env, node):
        if env.performative != "request":
            return isinstance(node, SList) and node.head == "done"
        head = node.head if isinstance(node, SList) else None
        if head not in ("agentsToBeTrained", "requestRules"):
            return False
        try:
            frame = decode_frame(node)
        except FrameError as exc:
            agent.fail(env, type(exc).__name__, str(exc))
            return True
        if isinstance(frame, AgentsToBeTrained):
            self.handle_training_request(agent, env, frame)
        else:
            self.retrain(agent, frame.agent, frame.location, env)
        return True

    def handle_training_request(self, atm: Agent, env: Envelope, frame: AgentsToBeTrained) -> None:
        platform = atm.platform
        registry = platform.registry
        for desc in frame.agents:
            if desc.name not in platform.agents:
                atm.fail(env, "UnknownAgent", desc.name)
                continue
            behaviors = platform.requested_behaviors.get(desc.name, self.type_behaviors.get(desc.agent_type))
            if behaviors is None:
                atm.fail(env, "UnknownType", desc.agent_type)
                continue
            missing = [b for b in behaviors if b not in registry]
            if missing:
                atm.fail(env, "UnknownBehavior", ", ".join(missing))
                continue
            atm.send(desc.name, "request", encode_frame(LoadClass(behaviors)), TRAINING_ONTOLOGY)

    def retrain(self, atm: Agent, target: str, location: str, env: Envelope | None = None) -> None:
        """Mine the location's labeled examples and ship the compiled rules to ``target``."""

        def fail(reason, detail):
            atm.send(target, "failure", failure_content(reason, detail), TRAINING_ONTOLOGY)

        if target not in atm.platform.agents:
            if env is not None:
                atm.fail(env, "UnknownAgent", target)
            return
        if self.repository is None:
            fail("NoRepository", "training module has no repository")
            return
        dataset = self.repository.query_examples(location)
        if not dataset.examples:
            fail("EmptyDataset", f"no labeled examples for {location}")
            return
        tree = mining.induce_tree(dataset)
        self.trees[target] = tree
        self.retrain_count += 1
        rules = [r.to_defrule() for r in mining.tree_to_rules(tree)]
        atm.send(target, "request", encode_frame(AddRule(rules)), TRAINING_ONTOLOGY)

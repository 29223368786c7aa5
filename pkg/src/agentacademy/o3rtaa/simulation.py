"""Closed-loop O3RTAA run: sense, diagnose, predict, distribute, feed back, retrain."""

from __future__ import annotations

import io
import random
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TextIO

from ..mining import AlarmType, classify, grid
from ..ontology import Ontology, OntologyService, TermMap
from ..repository import Repository
from ..rules import RuleBase
from ..runtime import ATM, Agent, AgentSpec, BehaviorRegistry, Platform, TrainingBehavior
from .agents import (
    DataAcquisition, DiagnosisBehavior, DistributorBehavior, FeedbackBehavior, OntologyBehavior,
    PredictorBehavior, UserBehavior, predict_alarm, readings_node,
)
from .config import ScenarioConfig, dump_config, loads_config
from .environment import EnvironmentModel

__all__ = [
    "EpochMetrics", "Report", "Scenario", "run_simulation", "grid_agreement",
    "replay_transcript", "TRANSCRIPT_MAGIC", "AGENT_TYPES",
]

TRANSCRIPT_MAGIC = "# agentacademy transcript v1"
CODES = tuple(int(a) for a in AlarmType)

AGENT_TYPES = {
    "diagnosisAgent": ("DiagnosisBehavior",),
    "predictorAgent": ("PredictorBehavior",),
    "distributorAgent": ("DistributorBehavior",),
    "userAgent": ("UserBehavior",),
    "feedbackAgent": ("FeedbackBehavior",),
}


def grid_agreement(rulebase: RuleBase, config: ScenarioConfig) -> float:
    """Fraction of the discretized input grid on which the rules match the hidden truth."""
    points = grid(config.schema)
    hits = sum(predict_alarm(rulebase, x) == classify(config.hidden_truth, x) for x in points)
    return hits / len(points)


@dataclass
class EpochMetrics:
    location: str
    epoch: int
    start_tick: int
    rules: int
    grid_agreement: float
    # confusion[truth][predicted]
    confusion: list[list[int]] = field(default_factory=lambda: [[0] * len(CODES) for _ in CODES])

    @property
    def events(self) -> int:
        return sum(sum(row) for row in self.confusion)

    def precision(self, code: int) -> float | None:
        col = sum(row[code] for row in self.confusion)
        return self.confusion[code][code] / col if col else None

    def recall(self, code: int) -> float | None:
        row = sum(self.confusion[code])
        return self.confusion[code][code] / row if row else None


def _fmt(x: float | None) -> str:
    return "   -" if x is None else f"{x:4.2f}"


@dataclass
class Report:
    seed: int
    ticks: int
    epochs: list[EpochMetrics]
    observations: int
    labeled: int
    retrains: int
    diagnosis: dict

    def for_location(self, location: str) -> list[EpochMetrics]:
        return [e for e in self.epochs if e.location == location]

    def to_text(self) -> str:
        out = [
            f"O3RTAA closed-loop report: seed={self.seed} ticks={self.ticks}",
            f"observations={self.observations} labeled={self.labeled} retrains={self.retrains}",
            "diagnosis: " + " ".join(f"{k}={v}" for k, v in sorted(self.diagnosis.items())),
            "",
            "location   epoch  start  rules  events  grid   "
            + "  ".join(f"P{c}   R{c}  " for c in CODES),
        ]
        for e in self.epochs:
            cells = "  ".join(f"{_fmt(e.precision(c))} {_fmt(e.recall(c))}" for c in CODES)
            out.append(
                f"{e.location:<10} {e.epoch:>5}  {e.start_tick:>5}  {e.rules:>5}  {e.events:>6}  "
                f"{e.grid_agreement:5.3f}  {cells}"
            )
        return "\n".join(out) + "\n"


class Scenario:
    """A wired-up platform for one configuration; call :meth:`step` per tick."""

    def __init__(self, config: ScenarioConfig, log_path: str | Path, transcript: TextIO | None = None,
                 keep_transcript: bool = False):
        self.config = config
        self.env = EnvironmentModel(config)
        self.repository = Repository(log_path, config.schema, threshold=config.threshold_k)
        self.acquisition = DataAcquisition(self.repository)
        self.ontology = OntologyService()
        for name, terms in config.ontologies.items():
            self.ontology.register(Ontology(name, terms))
        for src, dst, pairs in config.term_maps:
            self.ontology.add_map(TermMap(src, dst, dict(pairs)))
        self.tick_events: list[tuple[int, str]] = []
        self.user_names = [f"user_{u.user_id}" for u in config.users]
        profiles = {f"user_{u.user_id}": u for u in config.users}

        registry = BehaviorRegistry({
            "DiagnosisBehavior": lambda a: DiagnosisBehavior(config, self.acquisition),
            "PredictorBehavior": lambda a: PredictorBehavior(
                a.name.removeprefix("predictor_"), self.acquisition, config,
                on_event=lambda eid, who: self.tick_events.append((eid, who)), ontology=self.ontology),
            "DistributorBehavior": lambda a: DistributorBehavior(config, self.user_names),
            "UserBehavior": lambda a: UserBehavior(profiles[a.name]),
            "FeedbackBehavior": lambda a: FeedbackBehavior(config, self.acquisition),
            "OntologyBehavior": lambda a: OntologyBehavior(self.ontology),
            "TrainingBehavior": lambda a: TrainingBehavior(AGENT_TYPES, self.repository),
        })
        self.platform = Platform(registry, seed=config.seed, transcript=transcript, keep_transcript=keep_transcript)
        p = self.platform
        lang = config.shared_ontology
        p.add_agent(Agent(p, ATM, "trainingModule", lang), ["TrainingBehavior"])
        p.add_agent(Agent(p, "ontology", "ontologyAgent", lang), ["OntologyBehavior"])
        p.add_agent(Agent(p, "sensors", "sensorNetwork", lang))
        p.create_agent(AgentSpec("diagnosis", "diagnosisAgent", ontology=lang))
        for loc in config.locations:
            p.create_agent(AgentSpec(f"predictor_{loc}", "predictorAgent", ontology=lang))
        p.create_agent(AgentSpec("distributor", "distributorAgent", ontology=lang))
        for name in self.user_names:
            p.create_agent(AgentSpec(name, "userAgent", ontology=lang))
        p.create_agent(AgentSpec("feedback", "feedbackAgent", ontology=lang))
        p.run_until_idle()
        self.predictors = {loc: p.lookup(f"predictor_{loc}") for loc in config.locations}
        self.feedback = p.lookup("feedback").behaviors["FeedbackBehavior"]
        self.distributor = p.lookup("distributor").behaviors["DistributorBehavior"]
        self.diagnosis = p.lookup("diagnosis").behaviors["DiagnosisBehavior"]
        self.ticks_run = 0

    def _rng(self, tick: int, stream: int) -> random.Random:
        return random.Random((self.config.seed * 7_919 + tick) * 8 + stream)

    def step(self, tick: int) -> None:
        p = self.platform
        p.tick = tick
        move_rng = self._rng(tick, 0)
        for name in self.user_names:
            p.lookup(name).behaviors["UserBehavior"].move(move_rng, self.config.locations, self.config.mobility)
        readings = self.env.generate_tick(tick)
        p.lookup("sensors").send("diagnosis", "inform", readings_node(tick, readings))
        self.tick_events = []
        log_start = len(self.distributor.log)
        p.run_until_idle()
        deliveries = [(d.user_id, eid) for _, eid, _, d in self.distributor.log[log_start:]]
        self.feedback.feedback_round(tick, [eid for eid, _ in self.tick_events], deliveries, self._rng(tick, 1))
        self.ticks_run += 1

    def report(self) -> Report:
        repo = self.repository
        epochs = []
        for loc, agent in self.predictors.items():
            pb = agent.behaviors["PredictorBehavior"]
            for k, (rb, events) in enumerate(zip(pb.rulebases, pb.epoch_events)):
                if pb.epoch_ticks[k] >= self.ticks_run:
                    continue  # nothing has run under this rulebase yet
                m = EpochMetrics(loc, k, pb.epoch_ticks[k], len(rb), grid_agreement(rb, self.config))
                for eid in events:
                    rec = repo.index[eid]
                    m.confusion[classify(self.config.hidden_truth, rec.categories)][rec.predicted] += 1
                epochs.append(m)
        summary = repo.summary()
        atm = self.platform.lookup(ATM).behaviors["TrainingBehavior"]
        return Report(self.config.seed, self.ticks_run, epochs, summary["observations"], summary["labeled"],
                      atm.retrain_count, dict(self.diagnosis.counts))

    def close(self) -> None:
        self.repository.close()


def run_simulation(config: ScenarioConfig, transcript: TextIO | None = None,
                   log_path: str | Path | None = None, overwrite: bool = False) -> Report:
    """Drive ``config.ticks`` ticks end to end; deterministic per seed.

    The repository log goes to ``log_path`` (or ``config.log``); without
    either it lives in a temporary directory and is discarded.
    """
    if transcript is not None:
        transcript.write(TRANSCRIPT_MAGIC + "\n")
        # the log path never influences messages, so it stays out of the header
        for line in dump_config(replace(config, log=None)).splitlines():
            transcript.write(f"#| {line}\n")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(log_path or config.log or Path(tmp) / "aur.log")
        if path.exists():
            if not overwrite:
                raise FileExistsError(f"repository log {path} already exists")
            path.unlink()
            Path(str(path) + ".sensed").unlink(missing_ok=True)
        scenario = Scenario(config, path, transcript)
        try:
            for tick in range(config.ticks):
                scenario.step(tick)
            scenario.repository.flush()
            return scenario.report()
        finally:
            scenario.close()


def replay_transcript(text: str) -> tuple[bool, str]:
    """Re-run the configuration embedded in a transcript and compare line by line."""
    lines = text.splitlines()
    if not lines or lines[0] != TRANSCRIPT_MAGIC:
        return False, "not a transcript (missing header)"
    cfg_lines = [ln[3:] for ln in lines if ln.startswith("#| ")]
    config = replace(loads_config("\n".join(cfg_lines)), log=None)
    buf = io.StringIO()
    run_simulation(config, transcript=buf)
    again = buf.getvalue().splitlines()
    if again == lines:
        return True, f"transcript verified: {len(lines) - len(cfg_lines) - 1} envelopes"
    for i, (a, b) in enumerate(zip(lines, again)):
        if a != b:
            return False, f"first difference at line {i + 1}:\n  recorded: {a}\n  replayed: {b}"
    return False, f"length differs: recorded {len(lines)} lines, replayed {len(again)}"

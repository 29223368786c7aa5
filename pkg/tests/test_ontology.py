import pytest
from hypothesis import given, settings, strategies as st

from agentacademy.o3rtaa.agents import OntologyBehavior
from agentacademy.ontology import (
    DuplicateOntology, NoMapRegistered, Ontology, OntologyService, TermMap, UnknownOntology, UnmappedTerm,
)
from agentacademy.rules import Fact
from agentacademy.runtime import Agent, Behavior, BehaviorRegistry, Platform, parse_failure
from agentacademy.sl import OntologyQuery, TermMapping, decode_frame, encode_frame, parse_sl, print_sl

import messages

EN, TR = "O3RTAAEnglish", "O3RTAATurkish"
EN_TERMS = ["pressure", "ozone", "nitrogen", "alarm type", "location"]
TR_TERMS = ["basinc", "ozon", "azot", "alarm tipi", "konum"]


@pytest.fixture
def svc():
    s = OntologyService()
    s.register(Ontology(EN, EN_TERMS))
    s.register(Ontology(TR, TR_TERMS))
    s.add_map(TermMap(EN, TR, dict(zip(EN_TERMS, TR_TERMS))))
    return s


def test_register_and_lookup(svc):
    assert svc.lookup(EN).terms == frozenset(EN_TERMS)
    with pytest.raises(DuplicateOntology):
        svc.register(Ontology(EN, ["x"]))
    with pytest.raises(UnknownOntology):
        svc.lookup("Klingon")
    with pytest.raises(ValueError):
        Ontology("Empty", [])


def test_pressure_maps_to_basinc(svc):
    q = decode_frame(parse_sl(messages.ONTOLOGY_QUERY))
    answer = svc.map_term(q)
    assert answer == TermMapping("pressure", "basinc")
    assert print_sl(encode_frame(answer)) == messages.MAPPING


def test_reverse_direction(svc):
    assert svc.map_term(OntologyQuery(TR, EN, "basinc")) == TermMapping("basinc", "pressure")


def test_identity_map():
    s = OntologyService()
    s.register(Ontology("A", ["x", "y"]))
    s.register(Ontology("B", ["x", "y"]))
    s.add_map(TermMap("A", "B", {"x": "x", "y": "y"}))
    assert s.map_term(OntologyQuery("A", "B", "y")).to_term == "y"
    assert s.map_term(OntologyQuery("A", "A", "x")).to_term == "x"


def test_errors(svc):
    with pytest.raises(UnmappedTerm):
        svc.map_term(OntologyQuery(EN, TR, "humidity"))
    with pytest.raises(UnknownOntology):
        svc.map_term(OntologyQuery(EN, "Klingon", "pressure"))
    svc.register(Ontology("Greek", ["piesi"]))
    with pytest.raises(NoMapRegistered):
        svc.map_term(OntologyQuery(EN, "Greek", "pressure"))
    with pytest.raises(ValueError):
        TermMap(EN, TR, {"pressure": "basinc", "ozone": "basinc"})
    with pytest.raises(UnmappedTerm):
        svc.add_map(TermMap(EN, "Greek", {"wind": "piesi"}))


def test_translate_facts(svc):
    assert svc.translate_facts([Fact("pressure", "high")], EN, TR) == [Fact("basinc", "high")]
    assert svc.translate_facts([], EN, TR) == []
    facts = [Fact("ozone", "low"), Fact("pressure", "high")]
    assert svc.translate_facts(facts, EN, TR) == [Fact("ozon", "low"), Fact("basinc", "high")]


def test_translate_facts_is_all_or_nothing(svc):
    with pytest.raises(UnmappedTerm):
        svc.translate_facts([Fact("ozone", "low"), Fact("wind", "high")], EN, TR)


@st.composite
def bijections(draw):
    src = draw(st.lists(st.text(min_size=1, max_size=6), min_size=1, max_size=12, unique=True))
    dst = draw(st.lists(st.text(min_size=1, max_size=6), min_size=len(src), max_size=len(src), unique=True))
    return dict(zip(src, dst))


@given(bijections(), st.data())
@settings(max_examples=500)
def test_round_trip_over_random_bijections(pairs, data):
    s = OntologyService()
    s.register(Ontology("A", pairs))
    s.register(Ontology("B", pairs.values()))
    s.add_map(TermMap("A", "B", pairs))
    attrs = data.draw(st.lists(st.sampled_from(sorted(pairs)), max_size=8))
    facts = [Fact(a, data.draw(st.sampled_from(["low", "normal", "high"]))) for a in attrs]
    there = s.translate_facts(facts, "A", "B")
    assert [f.value for f in there] == [f.value for f in facts]
    assert s.translate_facts(there, "B", "A") == facts


# -- over the bus -----------------------------------------------------------------

class TurkishReader(Behavior):
    """Receives English readings, asks the ontology agent for unknown terms."""

    name = "TurkishReader"

    def __init__(self, terms):
        self.terms = set(terms)
        self.learned = {}
        self.failures = []

    def handle(self, agent, env, node):
        if node.head == "reading":
            term = node[1].text
            if env.ontology != agent.ontology and term not in self.terms:
                agent.send("ontology", "request",
                           encode_frame(OntologyQuery(env.ontology, agent.ontology, term)))
            return True
        if node.head == "Mapping":
            m = decode_frame(node)
            self.learned[m.from_term] = m.to_term
            return True
        if env.performative == "failure":
            self.failures.append(parse_failure(node))
            return True
        return False


def bilingual_platform(svc):
    reg = BehaviorRegistry({
        "OntologyBehavior": lambda a: OntologyBehavior(svc),
        "TurkishReader": lambda a: TurkishReader(TR_TERMS),
    })
    p = Platform(reg, seed=3)
    p.add_agent(Agent(p, "ontology", "ontologyAgent", EN), ["OntologyBehavior"])
    p.add_agent(Agent(p, "sensor", "sensor", EN))
    reader = p.add_agent(Agent(p, "reader", "reader", TR), ["TurkishReader"])
    return p, reader.behaviors["TurkishReader"]


def test_ontology_agent_answers_over_the_bus(svc):
    p, reader = bilingual_platform(svc)
    p.lookup("sensor").send("reader", "inform", "(reading pressure 1050.0)")
    p.run_until_idle()
    assert reader.learned == {"pressure": "basinc"}
    assert any(line.endswith(messages.ONTOLOGY_QUERY) for line in p.transcript)
    assert any(line.endswith(messages.MAPPING) for line in p.transcript)


def test_ontology_agent_reports_unmapped_term(svc):
    p, reader = bilingual_platform(svc)
    p.lookup("sensor").send("reader", "inform", "(reading humidity 40)")
    p.run_until_idle()
    assert reader.learned == {}
    assert reader.failures and reader.failures[0][0] == "UnmappedTerm"

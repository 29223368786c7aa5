import random

import pytest
from hypothesis import given, settings, strategies as st

from agentacademy.mining import CATEGORIES
from agentacademy.repository import (
    DuplicateFeedback, FeedbackRecord, Label, LogFormatError, ObservationRecord, Relabeled, Repository,
    Source, UnknownEvent,
)

SCHEMA = tuple((a, CATEGORIES) for a in ("NO2NO3", "ozone", "pressure"))
IND, INST = Source.INDIVIDUAL, Source.INSTITUTIONAL


def obs(location="valencia", predicted=0, tick=0, cat=("low", "normal", "high")):
    cats = dict(zip(("NO2NO3", "ozone", "pressure"), cat))
    raw = {"NO2NO3": 10.5, "ozone": 100.25, "pressure": 1050.0}
    return ObservationRecord(tick, location, raw, cats, predicted)


@pytest.fixture
def repo(tmp_path):
    r = Repository(tmp_path / "aur.log", SCHEMA, threshold=5)
    yield r
    r.close()


def reopen(r):
    r.close()
    return Repository(r.path, SCHEMA, threshold=r.threshold)


def test_ids_start_at_one_and_increase(repo):
    ids = [repo.record_observation(obs(tick=t)) for t in range(100)]
    assert ids == list(range(1, 101))
    assert repo.get(1).event_id == 1


def test_replay_reproduces_index(repo):
    for t in range(100):
        repo.record_observation(obs(tick=t, predicted=t % 4))
    before = repo.state()
    again = reopen(repo)
    assert again.state() == before
    again.close()


def test_schema_required_for_new_log(tmp_path):
    with pytest.raises(ValueError):
        Repository(tmp_path / "new.log")


def test_schema_mismatch_rejected(repo):
    repo.close()
    with pytest.raises(LogFormatError):
        Repository(repo.path, (("ozone", CATEGORIES),))
    Repository(repo.path).close()  # schema read from the header


def test_individual_threshold(repo):
    eid = repo.record_observation(obs(predicted=3))
    for i in range(4):
        assert repo.record_feedback(FeedbackRecord(eid, IND, f"u{i}", 2, 1)) is None
    assert repo.get(eid).label is None
    assert repo.record_feedback(FeedbackRecord(eid, IND, "u4", 2, 1)) == Relabeled(2)
    assert repo.get(eid).label == Label(2, IND)


def test_institutional_immediate(repo):
    eid = repo.record_observation(obs(predicted=3))
    assert repo.record_feedback(FeedbackRecord(eid, INST, "authority", 0, 1)) == Relabeled(0)
    assert repo.get(eid).label == Label(0, INST)


def test_institutional_correct_labels_with_prediction(repo):
    eid = repo.record_observation(obs(predicted=2))
    assert repo.record_feedback(FeedbackRecord(eid, INST, "authority", None, 1)) == Relabeled(2)


def test_individual_correct_counts_toward_prediction(repo):
    eid = repo.record_observation(obs(predicted=1))
    out = [repo.record_feedback(FeedbackRecord(eid, IND, f"u{i}", None, 1)) for i in range(5)]
    assert out == [None] * 4 + [Relabeled(1)]


def test_individuals_after_institutional_do_nothing(repo):
    eid = repo.record_observation(obs(predicted=3))
    repo.record_feedback(FeedbackRecord(eid, INST, "authority", 1, 1))
    for i in range(10):
        assert repo.record_feedback(FeedbackRecord(eid, IND, f"u{i}", 2, 1)) is None
    assert repo.get(eid).label == Label(1, INST)


def test_unknown_and_duplicate_feedback(repo):
    with pytest.raises(UnknownEvent):
        repo.record_feedback(FeedbackRecord(7, IND, "u", None, 0))
    eid = repo.record_observation(obs())
    repo.record_feedback(FeedbackRecord(eid, IND, "u", None, 0))
    with pytest.raises(DuplicateFeedback):
        repo.record_feedback(FeedbackRecord(eid, IND, "u", 2, 0))


def test_query_examples(repo):
    assert len(repo.query_examples("valencia")) == 0
    a = repo.record_observation(obs("valencia", predicted=1))
    b = repo.record_observation(obs("gandia", predicted=2))
    repo.record_observation(obs("valencia", predicted=3))
    repo.record_feedback(FeedbackRecord(a, INST, "auth", 3, 0))
    repo.record_feedback(FeedbackRecord(b, INST, "auth", None, 0))
    ds = repo.query_examples("valencia")
    assert [ex.label for ex in ds.examples] == [3]
    assert ds.schema == SCHEMA
    assert dict(ds.examples[0].attributes) == {"NO2NO3": "low", "ozone": "normal", "pressure": "high"}


def test_compact_empty_store(repo):
    repo.compact()
    assert repo.path.read_text().splitlines() == [repo.path.read_text().splitlines()[0]]
    assert repo.path.read_text().startswith("(aur :version 1 :schema")


def test_compact_preserves_state_and_line_count(repo):
    rng = random.Random(1)
    for t in range(30):
        eid = repo.record_observation(obs(tick=t, predicted=rng.randrange(4)))
        for i in range(rng.randrange(7)):
            repo.record_feedback(FeedbackRecord(eid, IND, f"u{i}", rng.choice([None, 1, 2]), t))
        if rng.random() < 0.3:
            repo.record_feedback(FeedbackRecord(eid, INST, "auth", rng.choice([None, 0, 3]), t))
    before = repo.state()
    repo.compact()
    # header + one line per observation
    assert len(repo.path.read_text().splitlines()) == 1 + len(repo)
    again = reopen(repo)
    assert again.state() == before
    again.close()


def test_partial_tallies_survive_compaction(repo):
    eid = repo.record_observation(obs(predicted=0))
    for i in range(4):
        repo.record_feedback(FeedbackRecord(eid, IND, f"u{i}", 3, 0))
    repo.compact()
    again = reopen(repo)
    with pytest.raises(DuplicateFeedback):
        again.record_feedback(FeedbackRecord(eid, IND, "u0", 3, 1))
    assert again.record_feedback(FeedbackRecord(eid, IND, "u9", 3, 1)) == Relabeled(3)
    again.close()


def test_appends_after_compaction_replay(repo):
    repo.record_observation(obs())
    repo.compact()
    eid = repo.record_observation(obs(predicted=2))
    repo.record_feedback(FeedbackRecord(eid, INST, "auth", None, 0))
    before = repo.state()
    again = reopen(repo)
    assert again.state() == before
    again.close()


def test_log_lines_are_canonical_sl(repo):
    eid = repo.record_observation(obs(predicted=2, tick=4))
    repo.record_feedback(FeedbackRecord(eid, INST, "auth", 3, 5))
    lines = repo.path.read_text().splitlines()
    assert lines[1] == ("(obs :id 1 :tick 4 :location valencia :raw (NO2NO3 10.5 ozone 100.25 pressure 1050.0)"
                        " :cat (NO2NO3 low ozone normal pressure high) :pred 2 :label none :labelsrc none)")
    assert lines[2].startswith("(fb :id 1 ")


def test_sensed_data_goes_to_sibling_file(repo):
    repo.record_sensed(3, "s01", "valencia", {"ozone": 12.5, "pressure": 999.0})
    repo.flush()
    assert repo.sensed_path.read_text() == "(sense :tick 3 :station s01 :location valencia :raw (ozone 12.5 pressure 999.0))\n"
    assert len(repo) == 0


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "x.log"
    p.write_text("(obs :id 1)\n")
    with pytest.raises(LogFormatError):
        Repository(p)


# -- randomized durability ----------------------------------------------------------

def random_ops(rng, repo, n):
    users = [f"u{i}" for i in range(8)] + ["auth1", "auth2"]
    for _ in range(n):
        r = rng.random()
        if r < 0.35 or not repo.index:
            repo.record_observation(obs(rng.choice(["valencia", "gandia"]), rng.randrange(4), rng.randrange(100),
                                        tuple(rng.choice(CATEGORIES) for _ in range(3))))
        elif r < 0.95:
            eid = rng.randrange(1, len(repo.index) + 3)
            who = rng.choice(users)
            src = INST if who.startswith("auth") else IND
            fb = FeedbackRecord(eid, src, who, rng.choice([None, 0, 1, 2, 3]), rng.randrange(100))
            try:
                repo.record_feedback(fb)
            except (UnknownEvent, DuplicateFeedback):
                pass
        else:
            repo.compact()


def test_random_sequences_replay_identically(tmp_path):
    rng = random.Random(2024)
    for trial in range(5):
        repo = Repository(tmp_path / f"r{trial}.log", SCHEMA, threshold=rng.randint(1, 5))
        random_ops(rng, repo, 1000)
        before = repo.state()
        again = reopen(repo)
        assert again.state() == before
        again.close()


# -- threshold policy properties -----------------------------------------------------

verdicts = st.lists(
    st.tuples(st.sampled_from([IND, INST]), st.sampled_from([None, 0, 1, 2, 3])), min_size=1, max_size=20)


@given(st.integers(1, 6), st.integers(0, 3), verdicts)
@settings(max_examples=300)
def test_label_matches_policy_model(tmp_path_factory, k, predicted, seq):
    path = tmp_path_factory.mktemp("p") / "aur.log"
    with Repository(path, SCHEMA, threshold=k) as repo:
        eid = repo.record_observation(obs(predicted=predicted))
        tallies, label = {}, None
        for i, (src, suggested) in enumerate(seq):
            value = predicted if suggested is None else suggested
            out = repo.record_feedback(FeedbackRecord(eid, src, f"v{i}", suggested, 0))
            if src is INST:
                label, expected = (value, INST), Relabeled(value)
            else:
                tallies[value] = tallies.get(value, 0) + 1
                if tallies[value] == k and (label is None or label[1] is not INST):
                    label, expected = (value, IND), Relabeled(value)
                else:
                    expected = None
            assert out == expected
        got = repo.get(eid).label
        assert (got.value, got.source) == label if label else got is None

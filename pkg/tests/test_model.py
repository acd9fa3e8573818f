import json

import pytest
from hypothesis import given, strategies as st

from roundtable.model import (ERROR_TYPES, AnnotatedStory, CorrelationResult, Coefficients,
                              DiscussionHistory, ErrorType, EvaluationReport, FeedbackNote,
                              Finding, InjectedError, ScoreCard, Statement, StatementKind,
                              StoryText, Strategy, SubQuestion, Variant, Verdict, ablations,
                              validate_report)


def test_story_word_count_and_validation():
    s = StoryText("a", "one two three.")
    assert s.word_count == 3
    assert StoryText("z", "他很高兴。", "zh").word_count == 4
    with pytest.raises(ValueError):
        StoryText("a", "   ")
    with pytest.raises(ValueError):
        StoryText("a", "one two", word_count=5)


@pytest.mark.parametrize("t", list(ErrorType))
def test_error_type_round_trip(t):
    assert ErrorType.parse(json.loads(json.dumps(t.value))) is t
    assert t.value in ("REP", "LINC", "DCONT", "ILC", "FER")


def test_error_type_rejects_unknown():
    with pytest.raises(ValueError):
        ErrorType.parse("SPELLING")


def test_scorecard_invariants():
    card = ScoreCard.from_types([ErrorType.REP, ErrorType.REP, ErrorType.FER])
    assert card[ErrorType.REP] == -2 and card["FER"] == -1 and card.total == -3
    assert ScoreCard.from_dict(card.to_dict()) == card
    with pytest.raises(ValueError):
        ScoreCard({ErrorType.REP: -1}, -2)
    with pytest.raises(ValueError):
        ScoreCard({ErrorType.REP: 1}, 1)


@given(st.lists(st.sampled_from(ERROR_TYPES), max_size=30))
def test_scorecard_total_is_minus_count(types):
    card = ScoreCard.from_types(types)
    assert card.total == -len(types) == sum(card.per_type.values())


def test_strategy_sa_forces_single_agent_and_ablations():
    assert Strategy(Variant.SA, num_agents=3).num_agents == 1
    rows = ablations(Strategy())
    assert [r.label for r in rows] == ["full", "no_feedback", "no_qa_explanations", "single_agent"]
    assert rows[1].feedback_enabled is False and rows[1].variant is Variant.SR_COT
    assert rows[2].qa_explanations_enabled is False
    assert rows[3].variant is Variant.SA
    assert Variant.parse("SR+CoT") is Variant.SR_COT
    assert Variant.parse("one-by-one") is Variant.ONE_BY_ONE


def _report(story, findings, card=None):
    card = card or ScoreCard.from_types(f.error_type for f in findings)
    return EvaluationReport(story.id, tuple(findings), card)


def test_validate_report_examples(story):
    assert validate_report(_report(story, []), story) == []
    bad = _report(story, [Finding(ErrorType.FER, 0, "the cat flew")])
    problems = validate_report(bad, story)
    assert len(problems) == 1 and "the cat flew" in problems[0]
    two_rep = [Finding(ErrorType.REP, 2, "Tom was happy"), Finding(ErrorType.REP, 3, "strange stone")]
    mismatch = _report(story, two_rep, ScoreCard({ErrorType.REP: -1}, -1))
    problems = validate_report(mismatch, story)
    assert len(problems) == 1 and "scorecard mismatch" in problems[0]


def test_validate_report_sentence_range(story):
    r = _report(story, [Finding(ErrorType.REP, 9, "Tom was happy")])
    assert any("sentence_index" in p for p in validate_report(r, story))


def test_history_is_append_only_prefix():
    h = DiscussionHistory("t")
    snapshots = []
    for k in range(4):
        h.append(Statement("a", k, k, StatementKind.REFLECTED, f"s{k}"))
        snapshots.append(json.loads(h.to_json())["statements"])
    for a, b in zip(snapshots, snapshots[1:]):
        assert b[:len(a)] == a and len(b) == len(a) + 1
    assert isinstance(h.statements, tuple)


def test_serialization_round_trips(story):
    h = DiscussionHistory("t", [Statement("a", 0, 0, StatementKind.PRELIMINARY, "x")],
                          [FeedbackNote(0, Verdict.CONSENSUS, "ok")])
    assert DiscussionHistory.from_dict(json.loads(h.to_json())) == h
    sq = SubQuestion(0, "q", ErrorType.REP)
    assert SubQuestion.from_dict(sq.to_dict()) == sq
    err = InjectedError(ErrorType.REP, 1, "a", "a", "d")
    ann = AnnotatedStory(story, (err,))
    assert ann.gold_scores.total == -1
    assert AnnotatedStory.from_dict(json.loads(json.dumps(ann.to_dict()))) == ann
    rep = _report(story, [Finding(ErrorType.REP, 2, "Tom was happy", "why")])
    assert EvaluationReport.from_dict(rep.to_dict()) == rep
    assert set(rep.to_dict()) >= {"task_id", "strategy", "findings", "scorecard", "qa", "prose",
                                  "unparsed"}
    assert Strategy.from_dict(Strategy().to_dict()) == Strategy()


def test_annotated_story_rejects_inconsistent_gold(story):
    err = InjectedError(ErrorType.REP, 1, "a", "a")
    with pytest.raises(ValueError):
        AnnotatedStory(story, (err,), ScoreCard.zero())


def test_correlation_result_bounds():
    ok = Coefficients(0.5, 0.4, 5)
    CorrelationResult({t: ok for t in ERROR_TYPES}, ok)
    with pytest.raises(ValueError):
        CorrelationResult({}, Coefficients(1.5, 0.0, 5))
    with pytest.raises(ValueError):
        CorrelationResult({}, Coefficients(1.0, 1.0, 1))

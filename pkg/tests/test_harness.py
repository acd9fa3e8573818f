import pytest

from roundtable.bench import (ABSENT, MissingScores, correlate, extract_scores, run_ablation,
                              run_benchmark)
from roundtable.corpus import build_benchmark, make_corpus
from roundtable.model import (AnnotatedStory, ErrorType, EvaluationReport, ScoreCard, Strategy,
                              StoryText, Variant)
from roundtable.scripted import gold_agents, silent_agents

from oracles import kendall_oracle, spearman_oracle


def report(qa, card=None, unparsed=False):
    return EvaluationReport("t", (), card or ScoreCard.zero(), tuple(qa), unparsed=unparsed)


def test_extract_scores_examples():
    qa = [("REP: how many?", "SCORE: -2. 2 found"), ("TOTAL: total?", "SCORE: -2")]
    card = extract_scores(report(qa))
    assert card[ErrorType.REP] == -2 and card.total == -2
    with pytest.raises(MissingScores):
        extract_scores(report(qa, unparsed=True))
    with pytest.raises(MissingScores) as e:
        extract_scores(report([("REP: how many?", "SCORE: x")]))
    assert "SCORE: x" in str(e.value)
    with pytest.raises(MissingScores):
        extract_scores(report([("REP: q", "SCORE: -1"), ("TOTAL: q", "SCORE: -3")]))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    dist = [({"REP": 1}, 1.0), ({"FER": 1, "ILC": 1}, 1.0), ({"DCONT": 1, "LINC": 2}, 1.0),
            ({}, 1.0), ({"REP": 2, "DCONT": 1}, 1.0)]
    res = build_benchmark(make_corpus(12, 8), dist, 3, tmp_path_factory.mktemp("c"))
    return res.stories


def test_perfect_agreement(corpus, tmp_path):
    table = run_benchmark(corpus, [Strategy(Variant.SR_COT), Strategy(Variant.SA)], gold_agents,
                          out_dir=tmp_path)
    for row in table.rows:
        assert row.excluded == 0
        for _, c in row.result.cells():
            if c.rho is not None:
                assert c.rho == pytest.approx(1.0) and c.tau == pytest.approx(1.0)
    assert (tmp_path / "correlations.csv").exists()
    assert len((tmp_path / "correlations.scores.jsonl").read_text().splitlines()) == 24
    assert len((tmp_path / "correlations.partial.jsonl").read_text().splitlines()) == 24


def test_silent_agents_give_absent_cells(corpus):
    table = run_benchmark(corpus, [Strategy(Variant.COT)], silent_agents)
    cells = dict(table.rows[0].result.cells())
    assert all(c.rho is None for c in cells.values())
    row = table.to_csv().splitlines()[1].split(",")
    assert row[1:13] == [ABSENT] * 12


def test_five_story_hand_example():
    engine = [-1, -2, -3, 0, -2]
    gold = [-1, -3, -2, 0, -2]
    cards = [ScoreCard.from_counts({ErrorType.REP: -v}) for v in engine]
    refs = [ScoreCard.from_counts({ErrorType.REP: -v}) for v in gold]
    res = correlate(cards, refs)
    assert res.overall.rho == pytest.approx(29 / 38, abs=1e-12)
    assert res.overall.rho == pytest.approx(spearman_oracle(engine, gold), abs=1e-12)
    assert res.overall.tau == pytest.approx(kendall_oracle(engine, gold), abs=1e-12)


def test_excluded_samples_are_counted(corpus):
    def flaky(strategy, story):
        agents = gold_agents(strategy, story)
        if story.story.id == corpus[0].story.id:
            agents.summarizer.backend._scripts["summarizer"].clear()
            agents.summarizer.backend._scripts["summarizer"].append("no structured block")
            agents.summarizer.backend._scripts["summarizer"].append("still none")
        return agents

    table = run_benchmark(corpus, [Strategy(Variant.SA)], flaky)
    row = table.rows[0]
    assert row.excluded == 1 and row.result.overall.n == len(corpus) - 1
    assert table.to_csv().splitlines()[1].endswith(f",{len(corpus) - 1},1")


def test_parallel_matches_serial(corpus):
    strategies = [Strategy(Variant.SR), Strategy(Variant.COT)]
    a = run_benchmark(corpus, strategies, gold_agents)
    b = run_benchmark(corpus, strategies, gold_agents, workers=4)
    assert a.to_csv() == b.to_csv()


def test_ablation_rows_and_identities(corpus, story):
    table = run_ablation(corpus, Strategy(), gold_agents)
    assert [r.label for r in table.rows] == ["full", "no_feedback", "no_qa_explanations",
                                            "single_agent"]
    assert table.to_csv().count("\n") == 5


def test_duplicate_labels_rejected(corpus):
    with pytest.raises(ValueError):
        run_benchmark(corpus, [Strategy(), Strategy()], gold_agents)


def test_reference_human_when_available():
    stories = [AnnotatedStory(StoryText(f"h{i}", "A b. C d. E f."),
                              human_scores=ScoreCard.from_counts({ErrorType.REP: i}))
               for i in range(3)]
    table = run_benchmark(stories, [Strategy(Variant.SA)], silent_agents)
    assert table.reference == "human"

"""The twelve acceptance criteria, one test each.

A PASS/FAIL line per criterion is printed in the pytest terminal summary.
"""
import random
import time
from contextlib import contextmanager

import pytest
from hypothesis import given, settings, strategies as st

import conftest
from oracles import adjacent_duplicates, kendall_oracle, spearman_oracle
from roundtable.bench import extract_scores, kendall, run_benchmark, spearman
from roundtable.corpus import build_benchmark, inject_errors, make_corpus, make_story, truncate_text
from roundtable.discussion import EvaluationTask, parse_feedback, run_discussion
from roundtable.gateway import (AgentHandle, BackendExhausted, GenerationParams, HttpBackend,
                                Message, RecordingBackend, ReplayBackend, ScriptedBackend,
                                TranscriptStore)
from roundtable.gateway.prompts import EXPLANATION_REQUEST
from roundtable.model import (ERROR_TYPES, ErrorType, EvaluationReport, Finding, StoryText,
                              Strategy, SubQuestion, Variant, ablations)
from roundtable.reporting import render_qa_report, score_findings
from roundtable.scripted import (fenced, gold_agents, script_discussion, summary_reply)
from roundtable.text import count_words, locate_excerpt, split_sentences
from stubserver import StubServer

STORY = StoryText("s1", conftest.STORY_BODY)
P = GenerationParams()


@contextmanager
def criterion(num, title):
    conftest.ACCEPTANCE_RESULTS[num] = (False, title, "did not finish")
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        conftest.ACCEPTANCE_RESULTS[num] = (False, title, f"{type(exc).__name__}: {exc}"[:200])
        raise
    conftest.ACCEPTANCE_RESULTS[num] = (True, title, f"{time.perf_counter() - start:.2f}s")


def five_subs():
    return [SubQuestion(i, f"Does the story contain {t.title} errors?", t)
            for i, t in enumerate(ERROR_TYPES)]


def run_sr_cot():
    strategy = Strategy(Variant.SR_COT, num_agents=2)
    _, agents = script_discussion(strategy, summary_reply([]))
    return run_discussion(EvaluationTask(STORY, strategy=strategy), agents.evaluators,
                          agents.feedback, agents.summarizer, sub_questions=five_subs())


def test_01_orchestration_determinism():
    with criterion(1, "orchestration determinism (20 statements, 5 notes, 1 summary, < 1 s)"):
        start = time.perf_counter()
        a = run_sr_cot()
        b = run_sr_cot()
        elapsed = (time.perf_counter() - start) / 2
        assert len(a.statements) == 20
        assert len(a.history.feedback) == 5
        assert sum(c["template"] == "summarize_qa" for c in a.calls) == 1 and a.raw_summary
        assert a.to_json().encode() == b.to_json().encode()
        assert elapsed < 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.sampled_from([Variant.COT, Variant.SR_COT]))
def _rounds_property(n, variant):
    strategy = Strategy(variant)
    rubric = (ErrorType.REP,)
    decomposition = fenced({"sub_questions": [
        {"question": f"Repetition check {k}?", "error_type": "REP"} for k in range(n)]})
    backend = ScriptedBackend({"decomposer": [decomposition],
                               "feedback": ["fine\nVERDICT: CONSENSUS"] * n,
                               "summarizer": [summary_reply([])]})
    per = 2 * n if variant.uses_reflection else n
    agents = []
    for i in range(2):
        backend.add(f"e{i}", *["x"] * per)
        agents.append(AgentHandle(f"e{i}", backend, P))
    t = run_discussion(EvaluationTask(STORY, rubric, strategy), agents)
    assert t.rounds_completed == n == len(t.sub_questions)
    assert {s.round for s in t.history.statements} == set(range(n))


def test_02_algorithm_structure():
    with criterion(2, "rounds = decomposition length (1-8); SA uses exactly 2 calls"):
        _rounds_property()
        strategy = Strategy(Variant.SA)
        backend, agents = script_discussion(strategy, summary_reply([]))
        run_discussion(EvaluationTask(STORY, strategy=strategy), agents.evaluators,
                       agents.feedback, agents.summarizer)
        assert len(backend.calls) == 2


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text(min_size=0, max_size=40).filter(lambda s: "\r" not in s),
                min_size=2, max_size=6),
       st.sampled_from([Variant.COT, Variant.SR_COT, Variant.SR, Variant.ONE_BY_ONE]))
def _guidance_property(guidances, variant):
    strategy = Strategy(variant, max_rounds=len(guidances))
    n = len(guidances)
    per = 2 if variant.uses_reflection else 1
    replies = [f"{g}\nVERDICT: DISAGREEMENT" for g in guidances]
    backend = ScriptedBackend({"a": ["x"] * per * n, "b": ["x"] * per * n, "feedback": replies,
                               "summarizer": [summary_reply([])]})
    subs = [SubQuestion(i, f"q{i}?") for i in range(n)]
    run_discussion(EvaluationTask(STORY, strategy=strategy),
                   [AgentHandle("a", backend, P), AgentHandle("b", backend, P)],
                   sub_questions=subs)
    for k in range(n - 1):
        guidance = parse_feedback(replies[k], k).guidance
        if not guidance:
            continue
        for agent in "ab":
            for conv in backend.conversations(agent)[per * (k + 1): per * (k + 2)]:
                assert guidance in "\n".join(m.content for m in conv)


def test_03_feedback_plumbing():
    with criterion(3, "round-k guidance reaches every round-k+1 agent conversation"):
        _guidance_property()


def test_04_correlation_oracle():
    with criterion(4, "spearman/kendall match brute-force oracles within 1e-12 (1,000 vectors)"):
        rng = random.Random(2024)
        start = time.perf_counter()
        done = 0
        while done < 1000:
            n = rng.randint(2, 8)
            xs = [rng.randint(0, 4) for _ in range(n)]
            ys = [rng.choice([rng.randint(0, 4), rng.random()]) for _ in range(n)]
            if len(set(xs)) < 2 or len(set(ys)) < 2:
                continue
            assert abs(spearman(xs, ys) - spearman_oracle(xs, ys)) <= 1e-12
            assert abs(kendall(xs, ys) - kendall_oracle(xs, ys)) <= 1e-12
            done += 1
        assert time.perf_counter() - start < 5.0


def test_05_known_values():
    with criterion(5, "spearman([1,2,3,4],[2,1,4,3]) = 0.6, kendall([1,2,3],[1,3,2]) = 1/3"):
        assert spearman([1, 2, 3, 4], [2, 1, 4, 3]) == 0.6
        assert kendall([1, 2, 3], [1, 3, 2]) == 1 / 3


def test_06_perfect_agreement(tmp_path):
    with criterion(6, "gold-reporting agents give rho = tau = 1 on a 20-story corpus (< 10 s)"):
        start = time.perf_counter()
        dist = [({"REP": 1}, 1.0), ({"FER": 1, "LINC": 1}, 1.0), ({"DCONT": 1, "ILC": 2}, 1.0),
                ({}, 1.0), ({"REP": 2, "ILC": 1, "DCONT": 1}, 1.0)]
        built = build_benchmark(make_corpus(20, 11), dist, 42, tmp_path)
        assert len(built.stories) == 20
        strategies = [Strategy(v) for v in Variant]
        table = run_benchmark(built.stories, strategies, gold_agents)
        checked = 0
        for row in table.rows:
            assert row.excluded == 0
            for _, c in row.result.cells():
                if c.rho is not None:
                    assert c.rho == pytest.approx(1.0, abs=1e-12)
                    assert c.tau == pytest.approx(1.0, abs=1e-12)
                    checked += 1
        assert checked >= 5 * len(strategies)
        assert time.perf_counter() - start < 10.0


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(ERROR_TYPES), st.integers(0, 20)), max_size=25))
def _scoring_property(items):
    findings = [Finding(t, i, "x") for t, i in items]
    card = score_findings(findings)
    assert card.total == -len(findings)
    for t in ERROR_TYPES:
        assert card[t] == -sum(1 for f in findings if f.error_type is t)


def test_07_scoring_rule():
    with criterion(7, "total = -|findings| and per-type deductions match counts (1,000 cases)"):
        _scoring_property()


def _random_story(rng, k):
    vocab = ["the", "fox", "ran", "far", "away", "and", "then", "slept", "under", "a", "tree"]
    sents = []
    for _ in range(rng.randint(1, 12)):
        n = rng.choice([rng.randint(1, 40), rng.randint(1, 120), rng.randint(150, 260)])
        sents.append(" ".join(rng.choice(vocab) for _ in range(n)) + rng.choice(".!?"))
    return StoryText(f"r{k}", " ".join(sents))


def test_08_truncation():
    with criterion(8, "truncation: <= 200 words or single-sentence exception; prefix; idempotent"):
        rng = random.Random(8)
        exceptions = cut = 0
        for k in range(100):
            story = _random_story(rng, k)
            out = truncate_text(story, 200)
            assert story.body.startswith(out.body)
            if out.word_count > 200:
                sents = split_sentences(out.body)
                assert len(sents) == 1 and count_words(sents[0]) > 200
                exceptions += 1
            cut += out.body != story.body
            assert truncate_text(out, 200) == out
        assert cut > 10 and exceptions > 0


@pytest.mark.parametrize("etype", ERROR_TYPES, ids=[t.value for t in ERROR_TYPES])
def test_09_injection_soundness(etype):
    results = conftest.ACCEPTANCE_RESULTS
    prior = results.get(9, (True, "", ""))
    title = "100 seeded injections per type: gold counts, excerpts locate, deterministic"
    try:
        for k in range(100):
            story = make_story(f"st{k}", 6 + k % 5, k)
            count = 1 + k % 2
            out, gold = inject_errors(story, [(etype, count)], 1000 + k)
            assert len(gold) == count and all(g.error_type is etype for g in gold)
            for g in gold:
                assert locate_excerpt(out.body, g.perturbed_excerpt,
                                      hint=g.sentence_index) == g.sentence_index
            assert inject_errors(story, [(etype, count)], 1000 + k) == (out, gold)
            if etype is ErrorType.REP:
                dups = adjacent_duplicates(split_sentences(out.body))
                assert sorted(g.sentence_index for g in gold) == dups
    except BaseException as exc:
        results[9] = (False, title, f"{etype.value}: {type(exc).__name__}: {exc}"[:200])
        raise
    if prior[0]:
        done = (prior[2].split(": ")[1] + ", " if prior[2].startswith("types: ") else "")
        results[9] = (True, title, "types: " + done + etype.value)


def _structure(transcript):
    return ([c["template"] for c in transcript.calls],
            [(s.agent_id, s.round, s.kind) for s in transcript.statements],
            len(transcript.history.feedback), transcript.rounds_completed)


def test_10_ablation_identities():
    with criterion(10, "ablations: single_agent == SA, no_feedback has 0 notes, no_qa omits"
                       " explanation request"):
        rows = {s.label: s for s in ablations(Strategy())}

        def run(strategy):
            backend, agents = script_discussion(strategy, summary_reply([]))
            t = run_discussion(EvaluationTask(STORY, strategy=strategy), agents.evaluators,
                               agents.feedback, agents.summarizer, agents.decomposer)
            return backend, t

        _, multi = run(rows["single_agent"])
        _, sa = run(Strategy(Variant.SA))
        assert _structure(multi) == _structure(sa)
        _, fb = run(rows["no_feedback"])
        assert len(fb.history.feedback) == 0
        assert all(c["template"] not in ("feedback", "consensus_probe") for c in fb.calls)
        full_backend, _ = run(rows["full"])
        qa_backend, _ = run(rows["no_qa_explanations"])
        full_prompt = full_backend.conversations("summarizer")[0][-1].content
        qa_prompt = qa_backend.conversations("summarizer")[0][-1].content
        assert EXPLANATION_REQUEST in full_prompt
        assert EXPLANATION_REQUEST not in qa_prompt
        assert "explanation of why" not in qa_prompt


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(ERROR_TYPES), st.integers(0, 9),
                          st.text(max_size=30)), max_size=15),
       st.booleans())
def _report_round_trip(items, explain):
    findings = [Finding(t, i, f"excerpt {i}", why) for t, i, why in items]
    card = score_findings(findings)
    qa = render_qa_report(findings, card, explanations=explain)
    rebuilt = extract_scores(EvaluationReport("x", (), card.zero(), tuple(qa)))
    assert rebuilt == card


def test_11_report_round_trip():
    with criterion(11, "SCORE tokens from render_qa_report reconstruct score_findings"):
        _report_round_trip()


def test_12_live_backend_protocol(tmp_path):
    with criterion(12, "stub server: 429,429,200 backs off increasingly; exhaustion; replay"):
        conv = [Message("system", "judge"), Message("user", "story")]
        slept = []
        with StubServer([429, 429, 200], reply="ok") as srv:
            live = HttpBackend(srv.url, api_key="k", base_delay=0.01, sleep=slept.append)
            store = TranscriptStore(tmp_path / "t.jsonl")
            rec = RecordingBackend(live, store)
            assert rec.complete("eval-1", conv, GenerationParams(timeout=5)) == "ok"
        delays = live.last_delays
        assert len(delays) == 2 and all(a < b for a, b in zip(delays, delays[1:]))
        assert slept == delays
        with StubServer([429] * 4) as srv:
            live = HttpBackend(srv.url, api_key="k", max_attempts=4, sleep=lambda d: None)
            with pytest.raises(BackendExhausted):
                live.complete("eval-1", conv, GenerationParams(timeout=5))
        replay = ReplayBackend(tmp_path / "t.jsonl")
        out = replay.complete("eval-1", conv, GenerationParams(timeout=5))
        assert out.encode("utf-8") == "ok".encode("utf-8")

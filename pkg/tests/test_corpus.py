import json
import random

import pytest

from roundtable.corpus import (InfeasiblePlan, MalformedLine, build_benchmark, inject_errors,
                               load_corpus, make_corpus, make_story, over_limit,
                               rebuild_from_manifest, truncate_text, write_corpus)
from roundtable.model import ERROR_TYPES, AnnotatedStory, ErrorType, StoryText
from roundtable.text import locate_excerpt, split_sentences

from oracles import adjacent_duplicates, greedy_truncation_words


def words(n, tag):
    return " ".join(f"{tag}{k}" for k in range(n - 1)) + " end."


# -- io ------------------------------------------------------------------------

def test_load_corpus_examples(tmp_path):
    p = tmp_path / "c.jsonl"
    stories = [AnnotatedStory(StoryText(f"s{i}", f"Story {i} here. It ends.")) for i in range(3)]
    write_corpus(stories, p)
    assert [s.story.id for s in load_corpus(p)] == ["s0", "s1", "s2"]
    (tmp_path / "e.jsonl").write_text("")
    assert load_corpus(tmp_path / "e.jsonl") == []


def test_load_corpus_rejects_inconsistent_gold(tmp_path):
    rec = {"id": "bad", "body": "A b. C d. E f.",
           "gold_errors": [{"error_type": "REP", "sentence_index": 0,
                            "original_excerpt": "A b.", "perturbed_excerpt": "A b."}],
           "gold_scores": {"REP": 0, "total": 0}}
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(rec) + "\n")
    with pytest.raises(MalformedLine) as e:
        load_corpus(p)
    assert e.value.story_id == "bad" and "bad" in str(e.value)


def test_load_corpus_rejects_bad_json(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "body": "x."}\n{oops\n')
    with pytest.raises(MalformedLine) as e:
        load_corpus(p)
    assert e.value.lineno == 2


# -- truncation ------------------------------------------------------------------

def test_truncate_under_limit_unchanged():
    s = StoryText("a", words(150, "w"))
    assert truncate_text(s) is s


def test_truncate_80_193_251():
    body = " ".join([words(80, "a"), words(113, "b"), words(58, "c")])
    s = StoryText("a", body)
    assert s.word_count == 251
    out = truncate_text(s)
    assert out.word_count == greedy_truncation_words([80, 113, 58], 200) == 193
    assert body.startswith(out.body)


def test_truncate_single_long_sentence():
    s = StoryText("a", words(220, "w") + " " + words(10, "t"))
    out = truncate_text(s)
    assert out.word_count == 220 and over_limit(out)


def test_truncate_chinese_counts_characters():
    body = "他" * 150 + "。" + "她" * 100 + "。"
    out = truncate_text(StoryText("z", body, "zh"))
    assert out.body == "他" * 150 + "。"


@pytest.mark.parametrize("seed", range(5))
def test_truncate_matches_greedy_oracle(seed):
    rng = random.Random(seed)
    for k in range(20):
        counts = [rng.randint(1, 90) for _ in range(rng.randint(1, 8))]
        body = " ".join(words(n, f"s{i}x") for i, n in enumerate(counts))
        out = truncate_text(StoryText("x", body), 200)
        assert out.word_count == min(sum(counts), greedy_truncation_words(counts, 200))


# -- injection -------------------------------------------------------------------

FIVE = StoryText("f", "Tom had three apples. He gave one to his sister. She was always happy. "
                      "They walked to the big market. It was a hot day.")


def test_rep_example():
    out, gold = inject_errors(FIVE, [(ErrorType.REP, 1)], 7)
    sents = split_sentences(out.body)
    assert len(sents) == 6
    dups = adjacent_duplicates(sents)
    assert len(gold) == 1 and dups == [gold[0].sentence_index]


def test_empty_plan_is_identity():
    out, gold = inject_errors(FIVE, [], 123)
    assert out == FIVE and gold == []


def test_injection_deterministic():
    plan = [(t, 1) for t in ERROR_TYPES]
    assert inject_errors(FIVE, plan, 11) == inject_errors(FIVE, plan, 11)


def test_short_story_infeasible():
    with pytest.raises(InfeasiblePlan):
        inject_errors(StoryText("s", "One. Two."), [(ErrorType.DCONT, 1)], 0)


def test_linc_falls_back_to_negation():
    s = StoryText("n", "Tom is a boy. Anna can swim. The sky is grey.")
    out, gold = inject_errors(s, [(ErrorType.LINC, 1)], 3)
    assert gold[0].original_excerpt != gold[0].perturbed_excerpt
    assert " not " in gold[0].perturbed_excerpt or "n't" in gold[0].perturbed_excerpt


@pytest.mark.parametrize("etype", ERROR_TYPES)
def test_single_type_locates(etype):
    story = make_story("x", 8, 5)
    out, gold = inject_errors(story, [(etype, 1)], 99)
    assert len(gold) == 1
    assert locate_excerpt(out.body, gold[0].perturbed_excerpt,
                          hint=gold[0].sentence_index) == gold[0].sentence_index


# -- benchmark building ------------------------------------------------------------

def test_build_fixed_plan(tmp_path):
    corpus = make_corpus(10, 3)
    res = build_benchmark(corpus, {"REP": 1}, 7, tmp_path)
    lines = res.corpus_path.read_text().splitlines()
    assert len(lines) == 10
    assert all(json.loads(ln)["gold_scores"]["total"] == -1 for ln in lines)
    manifest = json.loads(res.manifest_path.read_text())
    assert manifest["seed"] == 7 and manifest["skipped_ids"] == []


def test_rebuild_is_byte_identical(tmp_path):
    corpus = make_corpus(12, 4)
    dist = [({"REP": 1, "FER": 1}, 1.0), ({"DCONT": 1}, 2.0), ({"ILC": 1, "LINC": 1}, 1.0)]
    a = build_benchmark(corpus, dist, 5, tmp_path / "a")
    b = rebuild_from_manifest(corpus, a.manifest_path, tmp_path / "b")
    assert a.corpus_path.read_bytes() == b.corpus_path.read_bytes()
    c = build_benchmark(corpus, dist, 5, tmp_path / "c", workers=4)
    assert a.corpus_path.read_bytes() == c.corpus_path.read_bytes()


def test_build_skips_infeasible(tmp_path):
    corpus = make_corpus(3, 1) + [StoryText("short", "It rained. We stayed in.")]
    res = build_benchmark(corpus, {"DCONT": 1}, 2, tmp_path)
    manifest = json.loads(res.manifest_path.read_text())
    assert manifest["skipped_ids"] == ["short"]
    assert len(res.stories) == 3


def test_build_loads_back(tmp_path):
    res = build_benchmark(make_corpus(5, 9), {"REP": 1, "ILC": 1}, 1, tmp_path)
    loaded = load_corpus(res.corpus_path)
    assert loaded == res.stories

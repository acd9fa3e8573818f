"""Seeded rule-based error injection with exact gold annotations.

Randomness: every draw is ``getrandbits(32) % n`` on a Mersenne Twister
(MT19937, ``random.Random``) seeded with the integer seed. Nothing else
touches the generator, so the sequence of picks is fully determined by
(story, plan, seed).

Each injection only touches sentences no earlier injection used, so every
gold excerpt still sits verbatim in the final text.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from ..model import ErrorType, InjectedError, StoryText
from ..text import is_terminated, join_sentences, normalize_ws, split_sentences


class InjectionError(ValueError):
    pass


class InfeasiblePlan(InjectionError):
    def __init__(self, error_type: ErrorType | None, reason: str):
        label = error_type.value if error_type else "plan"
        super().__init__(f"{label}: {reason}")
        self.error_type = error_type
        self.reason = reason


class NoLexicalTarget(InfeasiblePlan):
    pass


@dataclass(frozen=True)
class LexicalTables:
    antonyms: dict
    substitutions: dict
    fact_flips: dict
    negation_auxiliaries: tuple
    off_topic: tuple
    word_boundaries: bool = True
    numbers: bool = True
    negation_word: str = "not"


@lru_cache(maxsize=None)
def load_tables(language: str = "en") -> LexicalTables:
    lang = language if language in ("en", "zh") else "en"
    raw = json.loads(resources.files("roundtable.corpus").joinpath(f"data/{lang}.json")
                     .read_text(encoding="utf-8"))
    return LexicalTables(
        antonyms={k.lower(): v for k, v in raw["antonyms"].items()},
        substitutions={k.lower(): v for k, v in raw["substitutions"].items()},
        fact_flips={k.lower(): v for k, v in raw["fact_flips"].items()},
        negation_auxiliaries=tuple(raw["negation_auxiliaries"]),
        off_topic=tuple(raw["off_topic"]),
        word_boundaries=raw.get("word_boundaries", True),
        numbers=raw.get("numbers", True),
        negation_word=raw.get("negation_word", "not"),
    )


def _pick(rng: random.Random, seq: Sequence):
    return seq[rng.getrandbits(32) % len(seq)]


def _match_case(src: str, repl: str) -> str:
    if len(src) > 1 and src.isupper():
        return repl.upper()
    if src[:1].isupper():
        return repl[:1].upper() + repl[1:]
    return repl


@lru_cache(maxsize=None)
def _table_regex(keys: tuple, boundaries: bool) -> re.Pattern:
    alt = "|".join(re.escape(k) for k in sorted(keys, key=lambda k: (-len(k), k)))
    if boundaries:
        return re.compile(rf"\b(?:{alt})\b", re.I)
    return re.compile(f"(?:{alt})")


def _table_hits(sentence: str, table: dict, boundaries: bool) -> list[re.Match]:
    if not table:
        return []
    return list(_table_regex(tuple(table), boundaries).finditer(sentence))


def _replace(sentence: str, m: re.Match, repl: str) -> str:
    return sentence[:m.start()] + _match_case(m.group(0), repl) + sentence[m.end():]


class _Draft:
    """Sentence list under edit, with used positions and gold entries kept aligned."""

    def __init__(self, sentences: list[str]):
        self.sents = list(sentences)
        self.used: set[int] = set()
        self.rep_heads: set[int] = set()
        self.gold: list[list] = []  # [type, index, original, perturbed, description]

    def free(self, exclude_unterminated_last: bool = False) -> list[int]:
        idx = [i for i in range(len(self.sents)) if i not in self.used]
        if exclude_unterminated_last and self.sents and not is_terminated(self.sents[-1]):
            idx = [i for i in idx if i != len(self.sents) - 1]
        return idx

    def insert(self, pos: int, sentence: str) -> None:
        self.sents.insert(pos, sentence)
        self.used = {i + 1 if i >= pos else i for i in self.used}
        self.rep_heads = {i + 1 if i >= pos else i for i in self.rep_heads}
        for g in self.gold:
            if g[1] >= pos:
                g[1] += 1

    def insert_positions(self) -> list[int]:
        """Insertion points that keep a repetition pair adjacent and follow an untouched sentence."""
        n = len(self.sents)
        out = []
        for p in range(1, n + 1):
            if p - 1 in self.used or (p - 1) in self.rep_heads:
                continue
            if p == n and not is_terminated(self.sents[-1]):
                continue
            out.append(p)
        return out


def _inject_rep(d: _Draft, rng, tables) -> None:
    cands = d.free(exclude_unterminated_last=True)
    if not cands:
        raise InfeasiblePlan(ErrorType.REP, "no untouched sentence left to repeat")
    i = _pick(rng, cands)
    s = d.sents[i]
    d.insert(i + 1, s)
    d.used |= {i, i + 1}
    d.rep_heads.add(i)
    d.gold.append([ErrorType.REP, i, s, s, f"sentence {i} repeated immediately after itself"])


def _inject_lexical(d: _Draft, rng, etype: ErrorType, table: dict, boundaries: bool,
                    what: str) -> bool:
    hits = [(i, m) for i in d.free() for m in _table_hits(d.sents[i], table, boundaries)]
    if not hits:
        return False
    i, m = _pick(rng, hits)
    original = d.sents[i]
    repl = table[m.group(0).lower()]
    d.sents[i] = _replace(original, m, repl)
    d.used.add(i)
    d.gold.append([etype, i, original, d.sents[i], f"{what}: {m.group(0)} -> {repl}"])
    return True


def _negate(d: _Draft, rng, tables: LexicalTables) -> bool:
    neg = tables.negation_word
    if tables.word_boundaries:
        aux = "|".join(re.escape(a) for a in tables.negation_auxiliaries)
        pat = re.compile(rf"\b({aux})\b(?!\s+not\b)(?!n't)", re.I)
    else:
        aux = "|".join(re.escape(a) for a in tables.negation_auxiliaries)
        pat = re.compile(rf"(?<!{re.escape(neg)})({aux})")
    hits = [(i, m) for i in d.free() for m in pat.finditer(d.sents[i])]
    if not hits:
        return False
    i, m = _pick(rng, hits)
    original = d.sents[i]
    if tables.word_boundaries:
        new = original[:m.end()] + " " + neg + original[m.end():]
    else:
        new = original[:m.start()] + neg + original[m.start():]
    d.sents[i] = new
    d.used.add(i)
    d.gold.append([ErrorType.LINC, i, original, new, f"polarity shift: {m.group(0)} negated"])
    return True


def _inject_linc(d: _Draft, rng, tables) -> None:
    if _inject_lexical(d, rng, ErrorType.LINC, tables.antonyms, tables.word_boundaries,
                       "antonym substitution"):
        return
    if not _negate(d, rng, tables):
        raise NoLexicalTarget(ErrorType.LINC, "no antonym or auxiliary verb in untouched sentences")


def _inject_ilc(d: _Draft, rng, tables) -> None:
    if not _inject_lexical(d, rng, ErrorType.ILC, tables.substitutions, tables.word_boundaries,
                           "pronoun/quantifier swap"):
        raise NoLexicalTarget(ErrorType.ILC, "no pronoun or quantifier in untouched sentences")


_NUMBER_RE = re.compile(r"(?<![\d.,])\d+(?![\d.,]\d)")


def _inject_fer(d: _Draft, rng, tables) -> None:
    hits = [(i, m, "table") for i in d.free()
            for m in _table_hits(d.sents[i], tables.fact_flips, tables.word_boundaries)]
    if tables.numbers:
        hits += [(i, m, "number") for i in d.free() for m in _NUMBER_RE.finditer(d.sents[i])]
    if not hits:
        raise NoLexicalTarget(ErrorType.FER, "no entity or number in untouched sentences")
    hits.sort(key=lambda h: (h[0], h[1].start()))
    i, m, kind = _pick(rng, hits)
    original = d.sents[i]
    if kind == "number":
        repl = str(int(m.group(0)) + 1 + rng.getrandbits(32) % 9)
        new = original[:m.start()] + repl + original[m.end():]
    else:
        repl = tables.fact_flips[m.group(0).lower()]
        new = _replace(original, m, repl)
    d.sents[i] = new
    d.used.add(i)
    d.gold.append([ErrorType.FER, i, original, new, f"fact flip: {m.group(0)} -> {repl}"])


def _inject_dcont(d: _Draft, rng, tables) -> None:
    free = d.free(exclude_unterminated_last=True)
    pairs = [(i, j) for i in free for j in free
             if j - i >= 2 and normalize_ws(d.sents[i]) != normalize_ws(d.sents[j])]
    present = {normalize_ws(s) for s in d.sents}
    pool = [s for s in tables.off_topic if normalize_ws(s) not in present]
    positions = d.insert_positions() if pool else []
    modes = (["swap"] if pairs else []) + (["splice"] if positions else [])
    if not modes:
        raise InfeasiblePlan(ErrorType.DCONT, "needs two untouched non-adjacent sentences "
                                              "or an insertion point")
    mode = _pick(rng, modes)
    if mode == "swap":
        i, j = _pick(rng, pairs)
        a, b = d.sents[i], d.sents[j]
        d.sents[i], d.sents[j] = b, a
        d.used |= {i, j}
        d.gold.append([ErrorType.DCONT, i, a, b, f"sentences {i} and {j} swapped"])
    else:
        p = _pick(rng, positions)
        s = _pick(rng, pool)
        anchor = d.sents[p - 1]
        d.insert(p, s)
        d.used.add(p)
        d.gold.append([ErrorType.DCONT, p, anchor, s,
                       f"unrelated sentence inserted after sentence {p - 1}"])


_INJECTORS = {
    ErrorType.REP: _inject_rep,
    ErrorType.LINC: _inject_linc,
    ErrorType.DCONT: _inject_dcont,
    ErrorType.ILC: _inject_ilc,
    ErrorType.FER: _inject_fer,
}


def inject_errors(story: StoryText, plan: Sequence[tuple[ErrorType, int]], seed: int,
                  tables: LexicalTables | None = None) -> tuple[StoryText, list[InjectedError]]:
    """Apply ``plan`` (pairs of error type and count, in order) to ``story``.

    Returns the perturbed story and one :class:`InjectedError` per injected
    error, indexed by sentences of the perturbed text.
    """
    steps = []
    for etype, count in plan:
        if count < 0:
            raise ValueError("error counts must be non-negative")
        steps += [ErrorType.parse(etype)] * int(count)
    if not steps:
        return story, []
    sentences = split_sentences(story.body)
    if len(sentences) < 3:
        raise InfeasiblePlan(None, f"story {story.id} has {len(sentences)} sentences, need >= 3")
    tables = tables or load_tables(story.language)
    rng = random.Random(seed)
    draft = _Draft(sentences)
    for etype in steps:
        _INJECTORS[etype](draft, rng, tables)

    body = join_sentences(draft.sents, story.language)
    if [normalize_ws(s) for s in split_sentences(body)] != [normalize_ws(s) for s in draft.sents]:
        raise InfeasiblePlan(None, "perturbation changed sentence segmentation")
    gold = [InjectedError(t, i, o, p, desc) for t, i, o, p, desc in draft.gold]
    return story.with_body(body), gold

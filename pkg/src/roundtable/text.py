"""Sentence segmentation, word counting and excerpt location.

One segmentation rule is used everywhere (truncation, error injection,
finding validation) so sentence indices agree across the package.
"""
from __future__ import annotations

import json
import re

ASCII_TERMINATORS = ".!?"
CJK_TERMINATORS = "。！？"
CLOSERS = "\"')]}”’」』）】"

_CJK_LANGS = ("zh",)


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Return ``(start, end)`` character spans of the sentences in ``text``.

    A sentence ends after a run of terminators (plus any closing quotes or
    brackets) when the next character is whitespace or end of text. The
    full-width terminators end a sentence unconditionally, since Chinese text
    does not put spaces between sentences. Leading whitespace is skipped.
    """
    spans = []
    n = len(text)
    i = 0
    start = None
    while i < n:
        ch = text[i]
        if start is None:
            if ch.isspace():
                i += 1
                continue
            start = i
        if ch in ASCII_TERMINATORS or ch in CJK_TERMINATORS:
            j = i
            cjk = False
            while j < n and (text[j] in ASCII_TERMINATORS or text[j] in CJK_TERMINATORS):
                cjk = cjk or text[j] in CJK_TERMINATORS
                j += 1
            while j < n and text[j] in CLOSERS:
                j += 1
            if cjk or j == n or text[j].isspace():
                spans.append((start, j))
                start = None
            i = j
            continue
        i += 1
    if start is not None:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        spans.append((start, end))
    return spans


def split_sentences(text: str) -> list[str]:
    return [text[a:b] for a, b in sentence_spans(text)]


def join_sentences(sentences: list[str], language: str = "en") -> str:
    sep = "" if language in _CJK_LANGS else " "
    return sep.join(sentences)


def is_terminated(sentence: str) -> bool:
    s = sentence.rstrip().rstrip(CLOSERS)
    return bool(s) and (s[-1] in ASCII_TERMINATORS or s[-1] in CJK_TERMINATORS)


def count_words(text: str, language: str = "en") -> int:
    """Whitespace tokens, or unicode letters for Chinese."""
    if language in _CJK_LANGS:
        return sum(1 for ch in text if ch.isalpha())
    return len(text.split())


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def locate_excerpt(body: str, excerpt: str, hint: int | None = None) -> int | None:
    """Sentence index where ``excerpt`` occurs, comparing whitespace-normalized text.

    ``hint`` is tried first, so an excerpt repeated in several sentences keeps
    the index the caller asked for. Excerpts spanning a sentence boundary map to
    the sentence in which they start.
    """
    needle = normalize_ws(excerpt)
    if not needle:
        return None
    spans = sentence_spans(body)
    sentences = [normalize_ws(body[a:b]) for a, b in spans]
    if hint is not None and 0 <= hint < len(sentences) and needle in sentences[hint]:
        return hint
    for idx, sent in enumerate(sentences):
        if needle in sent:
            return idx
    # cross-boundary excerpt: rebuild the normalized body sentence by sentence
    flat = ""
    starts = []
    prev_end = None
    for (a, b), sent in zip(spans, sentences):
        if prev_end is not None and body[prev_end:a].strip() == "" and a > prev_end:
            flat += " "
        starts.append(len(flat))
        flat += sent
        prev_end = b
    pos = flat.find(needle)
    if pos < 0:
        return None
    idx = 0
    for k, s in enumerate(starts):
        if s <= pos:
            idx = k
    return idx


def occurs_in(body: str, excerpt: str) -> bool:
    needle = normalize_ws(excerpt)
    return bool(needle) and needle in normalize_ws(body)


_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_-]*)[ \t]*\r?\n(.*?)```", re.S)


def first_json_block(text: str):
    """Decode the first fenced code block that holds valid JSON.

    Falls back to the whole reply when it is bare JSON. Returns ``None`` when
    nothing decodes.
    """
    for m in _FENCE_RE.finditer(text or ""):
        lang = m.group(1).lower()
        if lang and lang not in ("json", "javascript", "js"):
            continue
        try:
            return json.loads(m.group(2))
        except ValueError:
            continue
    try:
        return json.loads((text or "").strip())
    except ValueError:
        return None

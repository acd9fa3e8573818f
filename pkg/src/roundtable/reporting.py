"""Structured findings from summaries, deduction scoring, report rendering."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .model import ERROR_TYPES, ErrorType, EvaluationReport, Finding, ScoreCard, StoryText
from .text import first_json_block, locate_excerpt, normalize_ws, split_sentences

SCORE_RE = re.compile(r"SCORE:\s*(\S+)")
TOTAL_KEY = "TOTAL"

FATAL_NO_BLOCK = "fatal: no structured findings block in summary"


@dataclass
class ParseResult:
    findings: list[Finding]
    warnings: list[str] = field(default_factory=list)
    unparsed: bool = False

    def __iter__(self):
        # allows ``findings, warnings = parse_findings(...)``
        return iter((self.findings, self.warnings))


def _entries(data) -> list | None:
    if isinstance(data, dict):
        data = data.get("findings", data.get("errors"))
    return data if isinstance(data, list) else None


def _to_findings(entries: list, story: StoryText) -> tuple[list[Finding], list[str]]:
    sentences = split_sentences(story.body)
    findings, warnings, seen = [], [], set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            warnings.append(f"entry {i}: not an object")
            continue
        try:
            etype = ErrorType.parse(entry.get("error_type", ""))
        except ValueError:
            warnings.append(f"entry {i}: unknown error type {entry.get('error_type')!r}")
            continue
        excerpt = normalize_ws(str(entry.get("excerpt") or ""))
        idx = entry.get("sentence_index")
        try:
            idx = int(idx) if idx is not None and idx != "" else None
        except (TypeError, ValueError):
            idx = None
        if excerpt:
            located = locate_excerpt(story.body, excerpt, hint=idx)
            if located is None:
                warnings.append(f"entry {i}: excerpt {excerpt!r} not found in the story")
                continue
            idx = located
        elif idx is not None and 0 <= idx < len(sentences):
            excerpt = normalize_ws(sentences[idx])
        else:
            warnings.append(f"entry {i}: no usable location")
            continue
        key = (etype, idx)
        if key in seen:
            warnings.append(f"entry {i}: duplicate {etype.value} finding in sentence {idx}")
            continue
        seen.add(key)
        findings.append(Finding(etype, idx, excerpt, str(entry.get("explanation") or "").strip()))
    return findings, warnings


def parse_findings(raw_summary: str, story: StoryText,
                   repair: Callable[[], str] | None = None) -> ParseResult:
    """Findings from the first fenced JSON block of a summary.

    ``repair`` is called once when no block decodes (typically a re-prompt to
    the summarizer); if that also fails the result is empty and ``unparsed``.
    """
    entries = _entries(first_json_block(raw_summary))
    warnings = []
    if entries is None and repair is not None:
        warnings.append("summary had no structured block; repair requested")
        entries = _entries(first_json_block(repair()))
    if entries is None:
        return ParseResult([], warnings + [FATAL_NO_BLOCK], unparsed=True)
    findings, more = _to_findings(entries, story)
    return ParseResult(findings, warnings + more)


def score_findings(findings: Iterable[Finding]) -> ScoreCard:
    return ScoreCard.from_types(f.error_type for f in findings)


def _location(f: Finding) -> str:
    return f'sentence {f.sentence_index} ("{f.excerpt}")'


def render_qa_report(findings: Sequence[Finding], scorecard: ScoreCard,
                     rubric: Sequence[ErrorType] = ERROR_TYPES,
                     explanations: bool = True) -> list[tuple[str, str]]:
    """One question per rubric type plus a total; answers lead with ``SCORE: <int>``."""
    items = []
    for t in rubric:
        question = f"{t.value}: How many errors of type {t.title} does the story contain, and where?"
        answer = f"SCORE: {scorecard[t]}"
        mine = [f for f in findings if f.error_type is t]
        if explanations:
            if mine:
                parts = [_location(f) + (f": {f.explanation}" if f.explanation else "")
                         for f in mine]
                answer += f". {len(mine)} found: " + "; ".join(parts)
            else:
                answer += ". None found."
        items.append((question, answer))
    items.append((f"{TOTAL_KEY}: What is the total score of the story?",
                  f"SCORE: {scorecard.total}"))
    return items


def render_text_report(findings: Sequence[Finding], scorecard: ScoreCard, transcript=None,
                       story_id: str = "", strategy: str = "") -> str:
    """Markdown report: header, one section per error type, feedback appendix."""
    if transcript is not None:
        story_id = story_id or transcript.history.task_id
        strategy = strategy or transcript.config_snapshot.get("strategy", {}).get("label", "")
    lines = [f"# Evaluation report: {story_id}", ""]
    if strategy:
        lines.append(f"Strategy: {strategy}")
    scores = ", ".join(f"{t.value} {scorecard[t]}" for t in ERROR_TYPES)
    lines += [f"Total score: {scorecard.total} ({scores})", ""]
    if not findings:
        lines += ["No issues detected.", ""]
    for t in ERROR_TYPES:
        mine = [f for f in findings if f.error_type is t]
        lines += [f"## {t.title} ({t.value})", ""]
        if not mine:
            lines += ["No issues detected.", ""]
            continue
        for f in mine:
            lines.append(f'- Sentence {f.sentence_index}: "{f.excerpt}"')
            if f.explanation:
                lines.append(f"  {f.explanation}")
        lines.append("")
    if transcript is not None and transcript.history.feedback:
        lines += ["## Appendix: moderator verdicts", ""]
        for note in transcript.history.feedback:
            guidance = " ".join(note.guidance.split())
            lines.append(f"- Round {note.round + 1}: {note.verdict.value.upper()}"
                         + (f" - {guidance}" if guidance else ""))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def build_report(transcript, story: StoryText, rubric: Sequence[ErrorType] = ERROR_TYPES,
                 repair: Callable[[], str] | None = None) -> EvaluationReport:
    strategy = transcript.config_snapshot.get("strategy", {})
    explanations = bool(strategy.get("qa_explanations_enabled", True))
    parsed = parse_findings(transcript.raw_summary, story, repair)
    findings = parsed.findings
    if not explanations:
        findings = [Finding(f.error_type, f.sentence_index, f.excerpt, "") for f in findings]
    card = score_findings(findings)
    qa = render_qa_report(findings, card, rubric, explanations)
    prose = render_text_report(findings, card, transcript, story.id, strategy.get("label", ""))
    if parsed.unparsed:
        prose = "UNPARSED: the summary contained no structured findings.\n\n" + prose
    return EvaluationReport(story.id, tuple(findings), card, tuple(qa), prose,
                            strategy.get("label", ""), parsed.unparsed, tuple(parsed.warnings))

"""Domain types shared by the engine, the corpus tools and the benchmark.

Everything here is a plain value: construction validates, ``to_dict`` /
``from_dict`` give the canonical snake_case JSON form.
"""
from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping

from .text import count_words, occurs_in, split_sentences


class ErrorType(str, enum.Enum):
    REP = "REP"
    LINC = "LINC"
    DCONT = "DCONT"
    ILC = "ILC"
    FER = "FER"

    @classmethod
    def parse(cls, value: "str | ErrorType") -> "ErrorType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown error type {value!r}") from None

    @property
    def title(self) -> str:
        return ERROR_TITLES[self]


ERROR_TYPES: tuple[ErrorType, ...] = tuple(ErrorType)

ERROR_TITLES = {
    ErrorType.REP: "Repetition",
    ErrorType.LINC: "Logical Inconsistency",
    ErrorType.DCONT: "Discontinuity",
    ErrorType.ILC: "Inappropriate Lexical Choice",
    ErrorType.FER: "Factual Error",
}

ERROR_DEFINITIONS = {
    ErrorType.REP: "redundant sentences or excessive use of the same words",
    ErrorType.LINC: "antonym substitutions or polarity shifts that contradict the rest of the text",
    ErrorType.DCONT: "sentences out of order or content unrelated to the story",
    ErrorType.ILC: "misused quantifiers or pronouns",
    ErrorType.FER: "statements that contradict established knowledge",
}


@dataclass(frozen=True)
class StoryText:
    id: str
    body: str
    language: str = "en"
    word_count: int = -1

    def __post_init__(self):
        if not self.body or not self.body.strip():
            raise ValueError(f"story {self.id!r}: body is empty")
        expected = count_words(self.body, self.language)
        if self.word_count == -1:
            object.__setattr__(self, "word_count", expected)
        elif self.word_count != expected:
            raise ValueError(
                f"story {self.id!r}: word_count {self.word_count} does not match body ({expected})"
            )

    @property
    def sentences(self) -> list[str]:
        return split_sentences(self.body)

    def with_body(self, body: str) -> "StoryText":
        return StoryText(self.id, body, self.language)

    def to_dict(self) -> dict:
        return {"id": self.id, "body": self.body, "language": self.language,
                "word_count": self.word_count}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StoryText":
        return cls(str(d["id"]), d["body"], d.get("language", "en"), d.get("word_count", -1))


@dataclass(frozen=True)
class SubQuestion:
    index: int
    text: str
    target: ErrorType | None = None

    def to_dict(self) -> dict:
        return {"index": self.index, "text": self.text,
                "target": self.target.value if self.target else None}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SubQuestion":
        t = d.get("target")
        return cls(int(d["index"]), d["text"], ErrorType.parse(t) if t else None)


def check_contiguous(subs: Iterable[SubQuestion]) -> None:
    for expected, sq in enumerate(subs):
        if sq.index != expected:
            raise ValueError(f"sub-question indices must run 0..n-1, got {sq.index} at {expected}")


class StatementKind(str, enum.Enum):
    PRELIMINARY = "preliminary"
    REFLECTED = "reflected"


@dataclass(frozen=True)
class Statement:
    agent_id: str
    round: int
    sub_question: int
    kind: StatementKind
    content: str

    def to_dict(self) -> dict:
        return {"agent_id": self.agent_id, "round": self.round,
                "sub_question": self.sub_question, "kind": self.kind.value,
                "content": self.content}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Statement":
        return cls(d["agent_id"], int(d["round"]), int(d["sub_question"]),
                   StatementKind(d["kind"]), d["content"])


class Verdict(str, enum.Enum):
    CONSENSUS = "consensus"
    DISAGREEMENT = "disagreement"
    INEFFICIENT = "inefficient"


@dataclass(frozen=True)
class FeedbackNote:
    round: int
    verdict: Verdict
    guidance: str
    parse_warning: str | None = None

    def to_dict(self) -> dict:
        d = {"round": self.round, "verdict": self.verdict.value, "guidance": self.guidance}
        if self.parse_warning:
            d["parse_warning"] = self.parse_warning
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FeedbackNote":
        return cls(int(d["round"]), Verdict(d["verdict"]), d["guidance"], d.get("parse_warning"))


class DiscussionHistory:
    """Append-only record of accepted statements and feedback notes."""

    def __init__(self, task_id: str, statements=(), feedback=()):
        self.task_id = task_id
        self._statements: list[Statement] = list(statements)
        self._feedback: list[FeedbackNote] = list(feedback)

    @property
    def statements(self) -> tuple[Statement, ...]:
        return tuple(self._statements)

    @property
    def feedback(self) -> tuple[FeedbackNote, ...]:
        return tuple(self._feedback)

    def append(self, statement: Statement) -> None:
        self._statements.append(statement)

    def add_feedback(self, note: FeedbackNote) -> None:
        self._feedback.append(note)

    def __len__(self) -> int:
        return len(self._statements)

    def __eq__(self, other) -> bool:
        return isinstance(other, DiscussionHistory) and self.to_dict() == other.to_dict()

    def copy(self) -> "DiscussionHistory":
        return DiscussionHistory(self.task_id, self._statements, self._feedback)

    def to_dict(self) -> dict:
        return {"task_id": self.task_id,
                "statements": [s.to_dict() for s in self._statements],
                "feedback": [f.to_dict() for f in self._feedback]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DiscussionHistory":
        return cls(d["task_id"], [Statement.from_dict(s) for s in d["statements"]],
                   [FeedbackNote.from_dict(f) for f in d["feedback"]])


@dataclass(frozen=True)
class Finding:
    error_type: ErrorType
    sentence_index: int
    excerpt: str
    explanation: str = ""

    def to_dict(self) -> dict:
        return {"error_type": self.error_type.value, "sentence_index": self.sentence_index,
                "excerpt": self.excerpt, "explanation": self.explanation}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Finding":
        return cls(ErrorType.parse(d["error_type"]), int(d["sentence_index"]),
                   d["excerpt"], d.get("explanation", ""))


@dataclass(frozen=True)
class ScoreCard:
    """Deduction scores: each error costs one point, starting from zero."""

    per_type: Mapping[ErrorType, int]
    total: int

    def __post_init__(self):
        full = {t: 0 for t in ERROR_TYPES}
        for k, v in self.per_type.items():
            full[ErrorType.parse(k)] = int(v)
        if any(v > 0 for v in full.values()):
            raise ValueError("scores must be non-positive")
        if self.total != sum(full.values()):
            raise ValueError(f"total {self.total} != sum of per-type scores {sum(full.values())}")
        object.__setattr__(self, "per_type", full)

    @classmethod
    def zero(cls) -> "ScoreCard":
        return cls({}, 0)

    @classmethod
    def from_counts(cls, counts: Mapping[ErrorType, int]) -> "ScoreCard":
        per = {t: -int(counts.get(t, 0)) for t in ERROR_TYPES}
        return cls(per, sum(per.values()))

    @classmethod
    def from_types(cls, types: Iterable[ErrorType]) -> "ScoreCard":
        return cls.from_counts(Counter(types))

    def __getitem__(self, t: ErrorType | str) -> int:
        return self.per_type[ErrorType.parse(t)]

    def __hash__(self):
        return hash((tuple(self.per_type[t] for t in ERROR_TYPES), self.total))

    def to_dict(self) -> dict:
        d = {t.value: self.per_type[t] for t in ERROR_TYPES}
        d["total"] = self.total
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScoreCard":
        per = {ErrorType.parse(k): int(v) for k, v in d.items() if k != "total"}
        total = int(d["total"]) if "total" in d else sum(per.values())
        return cls(per, total)


class Variant(str, enum.Enum):
    SA = "sa"
    ONE_BY_ONE = "o_b_o"
    SR = "sr"
    COT = "cot"
    SR_COT = "sr_cot"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("+", "_").replace("-", "_")
        aliases = {"one_by_one": "o_b_o", "obo": "o_b_o", "single": "sa"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown strategy {value!r}") from None

    @property
    def uses_cot(self) -> bool:
        return self in (Variant.COT, Variant.SR_COT)

    @property
    def uses_reflection(self) -> bool:
        return self in (Variant.SR, Variant.SR_COT)


@dataclass(frozen=True)
class Strategy:
    variant: Variant = Variant.SR_COT
    feedback_enabled: bool = True
    qa_explanations_enabled: bool = True
    num_agents: int = 2
    max_rounds: int = 2
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.variant is Variant.SA:
            object.__setattr__(self, "num_agents", 1)
        if self.num_agents < 1 or self.max_rounds < 1:
            raise ValueError("num_agents and max_rounds must be positive")
        if not self.label:
            object.__setattr__(self, "label", self.variant.value)

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "feedback_enabled": self.feedback_enabled,
                "qa_explanations_enabled": self.qa_explanations_enabled,
                "num_agents": self.num_agents, "max_rounds": self.max_rounds,
                "label": self.label}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Strategy":
        return cls(Variant.parse(d["variant"]), bool(d.get("feedback_enabled", True)),
                   bool(d.get("qa_explanations_enabled", True)), int(d.get("num_agents", 2)),
                   int(d.get("max_rounds", 2)), d.get("label", ""))


def ablations(base: Strategy | None = None) -> list[Strategy]:
    """The four ablation rows: full, without feedback, without Q&A explanations, single agent."""
    base = base or Strategy()
    return [
        replace(base, label="full"),
        replace(base, feedback_enabled=False, label="no_feedback"),
        replace(base, qa_explanations_enabled=False, label="no_qa_explanations"),
        Strategy(Variant.SA, feedback_enabled=base.feedback_enabled,
                 qa_explanations_enabled=base.qa_explanations_enabled, label="single_agent"),
    ]


@dataclass(frozen=True)
class EvaluationReport:
    task_id: str
    findings: tuple[Finding, ...]
    scorecard: ScoreCard
    qa_items: tuple[tuple[str, str], ...] = ()
    prose: str = ""
    strategy: str = ""
    unparsed: bool = False
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "strategy": self.strategy,
                "findings": [f.to_dict() for f in self.findings],
                "scorecard": self.scorecard.to_dict(),
                "qa": [{"question": q, "answer": a} for q, a in self.qa_items],
                "prose": self.prose, "unparsed": self.unparsed,
                "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvaluationReport":
        return cls(d["task_id"], tuple(Finding.from_dict(f) for f in d.get("findings", [])),
                   ScoreCard.from_dict(d["scorecard"]),
                   tuple((q["question"], q["answer"]) for q in d.get("qa", [])),
                   d.get("prose", ""), d.get("strategy", ""), bool(d.get("unparsed", False)),
                   tuple(d.get("warnings", [])))


@dataclass(frozen=True)
class InjectedError:
    error_type: ErrorType
    sentence_index: int
    original_excerpt: str
    perturbed_excerpt: str
    description: str = ""

    def to_dict(self) -> dict:
        return {"error_type": self.error_type.value, "sentence_index": self.sentence_index,
                "original_excerpt": self.original_excerpt,
                "perturbed_excerpt": self.perturbed_excerpt, "description": self.description}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "InjectedError":
        return cls(ErrorType.parse(d["error_type"]), int(d["sentence_index"]),
                   d["original_excerpt"], d["perturbed_excerpt"], d.get("description", ""))


@dataclass(frozen=True)
class AnnotatedStory:
    story: StoryText
    gold_errors: tuple[InjectedError, ...] = ()
    gold_scores: ScoreCard | None = None
    human_scores: ScoreCard | None = None

    def __post_init__(self):
        object.__setattr__(self, "gold_errors", tuple(self.gold_errors))
        if self.gold_scores is not None:
            expected = ScoreCard.from_types(e.error_type for e in self.gold_errors)
            if expected != self.gold_scores:
                raise ValueError(f"story {self.story.id!r}: gold_scores inconsistent with gold_errors")
        elif self.gold_errors:
            object.__setattr__(self, "gold_scores",
                               ScoreCard.from_types(e.error_type for e in self.gold_errors))

    def to_dict(self) -> dict:
        d = self.story.to_dict()
        d["gold_errors"] = [e.to_dict() for e in self.gold_errors]
        d["gold_scores"] = self.gold_scores.to_dict() if self.gold_scores else {}
        if self.human_scores is not None:
            d["human_scores"] = self.human_scores.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AnnotatedStory":
        gold = d.get("gold_scores") or None
        human = d.get("human_scores") or None
        return cls(StoryText.from_dict(d),
                   tuple(InjectedError.from_dict(e) for e in d.get("gold_errors") or []),
                   ScoreCard.from_dict(gold) if gold else None,
                   ScoreCard.from_dict(human) if human else None)


@dataclass(frozen=True)
class Coefficients:
    rho: float | None
    tau: float | None
    n: int

    def to_dict(self) -> dict:
        return {"rho": self.rho, "tau": self.tau, "n": self.n}


@dataclass(frozen=True)
class CorrelationResult:
    """Spearman/Kendall per error type plus the total column.

    ``None`` coefficients mark columns where correlation is undefined
    (a constant score column or fewer than two samples).
    """

    per_type: Mapping[ErrorType, Coefficients]
    overall: Coefficients
    excluded: int = 0

    def __post_init__(self):
        for c in list(self.per_type.values()) + [self.overall]:
            for v in (c.rho, c.tau):
                if v is not None and not -1.0 <= v <= 1.0:
                    raise ValueError(f"coefficient {v} outside [-1, 1]")
                if v is not None and c.n < 2:
                    raise ValueError("a coefficient needs n >= 2")

    def cells(self) -> list[tuple[str, Coefficients]]:
        return [(t.value, self.per_type[t]) for t in ERROR_TYPES if t in self.per_type] + [
            ("TOTAL", self.overall)]

    def to_dict(self) -> dict:
        d = {name: c.to_dict() for name, c in self.cells()}
        d["excluded"] = self.excluded
        return d


def validate_report(report: EvaluationReport, story: StoryText) -> list[str]:
    """Describe every way ``report`` disagrees with ``story``; empty when consistent."""
    problems = []
    n_sent = len(story.sentences)
    for i, f in enumerate(report.findings):
        if not occurs_in(story.body, f.excerpt):
            problems.append(f"finding {i}: excerpt {f.excerpt!r} not found in story {story.id}")
        if not 0 <= f.sentence_index < n_sent:
            problems.append(
                f"finding {i}: sentence_index {f.sentence_index} outside 0..{n_sent - 1}")
    expected = ScoreCard.from_types(f.error_type for f in report.findings)
    if expected != report.scorecard:
        diffs = [f"{t.value} {report.scorecard[t]} vs {expected[t]}" for t in ERROR_TYPES
                 if report.scorecard[t] != expected[t]]
        problems.append("scorecard mismatch: " + (", ".join(diffs) or
                        f"total {report.scorecard.total} vs {expected.total}"))
    return problems

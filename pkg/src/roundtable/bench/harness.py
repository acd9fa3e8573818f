"""Correlation benchmarks of engine scores against gold or human scores."""
from __future__ import annotations

import csv
import io
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..discussion import DiscussionAborted, EvaluationTask, InvalidState, UnparseableDecomposition
from ..gateway import GatewayError
from ..model import (ERROR_TYPES, AnnotatedStory, Coefficients, CorrelationResult, ErrorType,
                     EvaluationReport, ScoreCard, Strategy, ablations)
from ..pipeline import AgentSet, evaluate_story
from ..reporting import SCORE_RE, TOTAL_KEY
from .stats import DegenerateInput, kendall, spearman

log = logging.getLogger(__name__)

ABSENT = "—"

AgentsFor = Callable[[Strategy, AnnotatedStory], AgentSet]


class MissingScores(ValueError):
    pass


def _score_token(answer: str, question: str) -> int:
    m = SCORE_RE.search(answer)
    if not m:
        raise MissingScores(f"no SCORE token in answer to {question!r}")
    token = m.group(1).rstrip(".,;")
    if not re.fullmatch(r"[+-]?\d+", token):
        raise MissingScores(f"malformed SCORE token {m.group(0)!r} in answer to {question!r}")
    return int(token)


def extract_scores(report: EvaluationReport) -> ScoreCard:
    """Scores read back from the Q&A answers, falling back to the scorecard."""
    if report.unparsed:
        raise MissingScores(f"report {report.task_id} is flagged unparsed")
    if not report.qa_items:
        return report.scorecard
    per = {t: report.scorecard[t] for t in ERROR_TYPES}
    total = None
    for question, answer in report.qa_items:
        key = question.split(":", 1)[0].strip().upper()
        if key == TOTAL_KEY:
            total = _score_token(answer, question)
        elif key in ErrorType.__members__:
            per[ErrorType(key)] = _score_token(answer, question)
    if total is None:
        total = sum(per.values())
    try:
        return ScoreCard(per, total)
    except ValueError as exc:
        raise MissingScores(f"report {report.task_id}: {exc}") from None


def correlate(engine: Sequence[ScoreCard], reference: Sequence[ScoreCard],
              excluded: int = 0) -> CorrelationResult:
    def coeffs(xs, ys) -> Coefficients:
        try:
            return Coefficients(spearman(xs, ys), kendall(xs, ys), len(xs))
        except DegenerateInput:
            return Coefficients(None, None, len(xs))

    per = {t: coeffs([e[t] for e in engine], [r[t] for r in reference]) for t in ERROR_TYPES}
    overall = coeffs([e.total for e in engine], [r.total for r in reference])
    return CorrelationResult(per, overall, excluded)


@dataclass
class TableRow:
    label: str
    strategy: Strategy
    result: CorrelationResult
    scores: list[dict] = field(default_factory=list)

    @property
    def excluded(self) -> int:
        return self.result.excluded


@dataclass
class CorrelationTable:
    rows: list[TableRow]
    reference: str

    def row(self, label: str) -> TableRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    @staticmethod
    def columns() -> list[str]:
        return [t.value for t in ERROR_TYPES] + ["TOTAL"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["strategy"]
        for c in self.columns():
            header += [f"{c}_rho", f"{c}_tau"]
        w.writerow(header + ["n", "excluded"])
        for r in self.rows:
            cells = [r.label]
            n = 0
            for _, c in r.result.cells():
                cells += [ABSENT if c.rho is None else f"{c.rho:.3f}",
                          ABSENT if c.tau is None else f"{c.tau:.3f}"]
                n = c.n
            w.writerow(cells + [n, r.excluded])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"reference": self.reference,
                "rows": [{"strategy": r.label, "config": r.strategy.to_dict(),
                          **r.result.to_dict()} for r in self.rows]}

    def save(self, out_dir, name: str = "correlations") -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / f"{name}.csv", "json": out / f"{name}.json",
                 "scores": out / f"{name}.scores.jsonl"}
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n",
                                 encoding="utf-8")
        with paths["scores"].open("w", encoding="utf-8") as fh:
            for r in self.rows:
                for rec in r.scores:
                    fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        return paths


def pick_reference(corpus: Sequence[AnnotatedStory], reference: str = "auto") -> str:
    if reference == "auto":
        return "human" if corpus and all(s.human_scores for s in corpus) else "gold"
    if reference not in ("human", "gold"):
        raise ValueError(f"unknown reference column {reference!r}")
    return reference


def _reference_card(story: AnnotatedStory, reference: str) -> ScoreCard:
    card = story.human_scores if reference == "human" else story.gold_scores
    if card is None:
        raise ValueError(f"story {story.story.id} has no {reference} scores")
    return card


def _evaluate_one(strategy: Strategy, story: AnnotatedStory, agents_for: AgentsFor,
                  rubric, checkpoint_dir) -> dict:
    rec = {"strategy": strategy.label, "story_id": story.story.id, "engine": None,
           "excluded": None}
    task = EvaluationTask(story.story, tuple(rubric), strategy)
    try:
        report, _ = evaluate_story(task, agents_for(strategy, story),
                                   checkpoint_dir=checkpoint_dir)
        rec["engine"] = extract_scores(report).to_dict()
    except MissingScores as exc:
        rec["excluded"] = f"missing scores: {exc}"
    except DiscussionAborted as exc:
        rec["excluded"] = f"aborted: {exc}"
        if exc.path:
            rec["checkpoint"] = str(exc.path)
    except (GatewayError, UnparseableDecomposition, InvalidState) as exc:
        rec["excluded"] = f"{type(exc).__name__}: {exc}"
    if rec["excluded"]:
        log.warning("strategy %s, story %s excluded: %s", strategy.label, story.story.id,
                    rec["excluded"])
    return rec


def run_benchmark(corpus: Sequence[AnnotatedStory], strategies: Sequence[Strategy],
                  agents_for: AgentsFor, reference: str = "auto", workers: int = 1,
                  out_dir=None, rubric: Sequence[ErrorType] = ERROR_TYPES,
                  checkpoint_dir=None, name: str = "correlations") -> CorrelationTable:
    """Evaluate every story under every strategy and correlate with the reference.

    Per-story results are appended to ``<out_dir>/<name>.partial.jsonl`` as
    they complete, in whatever order the worker pool finishes them.
    """
    labels = [st.label for st in strategies]
    if len(set(labels)) != len(labels):
        raise ValueError(f"strategy labels must be unique: {labels}")
    ref = pick_reference(corpus, reference)
    ref_cards = {s.story.id: _reference_card(s, ref) for s in corpus}
    jobs = [(st, s) for st in strategies for s in corpus]
    partial = None
    lock = threading.Lock()
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        partial = Path(out_dir) / f"{name}.partial.jsonl"
        partial.write_text("", encoding="utf-8")

    results: dict[tuple[str, str], dict] = {}

    def done(rec):
        results[(rec["strategy"], rec["story_id"])] = rec
        if partial is not None:
            with lock, partial.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            futs = [pool.submit(_evaluate_one, st, s, agents_for, rubric, checkpoint_dir)
                    for st, s in jobs]
            for f in as_completed(futs):
                done(f.result())
    else:
        for st, s in jobs:
            done(_evaluate_one(st, s, agents_for, rubric, checkpoint_dir))

    rows = []
    for st in strategies:
        engine, refs, scores, excluded = [], [], [], 0
        for s in corpus:
            rec = dict(results[(st.label, s.story.id)])
            rec["reference"] = ref_cards[s.story.id].to_dict()
            scores.append(rec)
            if rec["engine"] is None:
                excluded += 1
                continue
            engine.append(ScoreCard.from_dict(rec["engine"]))
            refs.append(ref_cards[s.story.id])
        rows.append(TableRow(st.label, st, correlate(engine, refs, excluded), scores))
    table = CorrelationTable(rows, ref)
    if out_dir is not None:
        table.save(out_dir, name)
    return table


def run_ablation(corpus: Sequence[AnnotatedStory], base: Strategy, agents_for: AgentsFor,
                 **kwargs) -> CorrelationTable:
    """Rows: full, no_feedback, no_qa_explanations, single_agent."""
    kwargs.setdefault("name", "ablation")
    return run_benchmark(corpus, ablations(base), agents_for, **kwargs)

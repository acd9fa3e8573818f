"""Multi-agent discussion: decomposition, rounds, reflection, feedback, summary.

The combined strategy works as follows. The task is split into
sub-questions, one discussion round per sub-question. In every round each
evaluator first states a preliminary idea given the history so far, then
revises it after reading the preliminaries of the agents who spoke before it
in the round. Only the revised statement enters the shared history. After the
last agent a moderator assesses the round; its guidance is shown to every
agent in the next round. A summarizer finally turns the history into a
findings report.

The simpler strategies drop pieces of that loop: no decomposition
(``o_b_o``, ``sr``: ``max_rounds`` rounds over the whole task), no
reflection (``o_b_o``, ``cot``), or no discussion at all (``sa``: one
evaluator call followed by the summary).
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .gateway import AgentHandle, GatewayError, Message, complete, get_template, render_prompt
from .gateway.prompts import EXPLANATION_REQUEST, REPAIR_INSTRUCTION, SCORES_ONLY_REQUEST
from .model import (ERROR_DEFINITIONS, ERROR_TYPES, DiscussionHistory, ErrorType, FeedbackNote,
                    Statement, StatementKind, Strategy, StoryText, SubQuestion, Variant, Verdict,
                    check_contiguous)
from .text import first_json_block

log = logging.getLogger(__name__)

DEFAULT_HISTORY_BUDGET = 6000  # approximate tokens


class UnparseableDecomposition(ValueError):
    pass


class InvalidState(RuntimeError):
    pass


@dataclass(frozen=True)
class EvaluationTask:
    story: StoryText
    rubric: tuple[ErrorType, ...] = ERROR_TYPES
    strategy: Strategy = field(default_factory=Strategy)

    def __post_init__(self):
        rubric = tuple(ErrorType.parse(t) for t in self.rubric)
        if not rubric:
            raise ValueError("rubric must not be empty")
        if len(set(rubric)) != len(rubric):
            raise ValueError("rubric contains duplicate error types")
        object.__setattr__(self, "rubric", rubric)

    @property
    def task_id(self) -> str:
        return self.story.id


@dataclass
class DiscussionTranscript:
    history: DiscussionHistory
    sub_questions: list[SubQuestion]
    raw_summary: str
    config_snapshot: dict
    utterances: list[Statement] = field(default_factory=list)
    calls: list[dict] = field(default_factory=list)
    rounds_completed: int = 0

    @property
    def statements(self) -> list[Statement]:
        """Every utterance in order, preliminaries included."""
        return self.utterances

    def to_dict(self) -> dict:
        return {"history": self.history.to_dict(),
                "sub_questions": [q.to_dict() for q in self.sub_questions],
                "raw_summary": self.raw_summary,
                "config_snapshot": self.config_snapshot,
                "utterances": [s.to_dict() for s in self.utterances],
                "calls": self.calls,
                "rounds_completed": self.rounds_completed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


@dataclass
class Checkpoint:
    """State needed to resume a discussion that failed mid-way."""

    task_id: str
    history: DiscussionHistory
    sub_questions: list[SubQuestion] | None
    next_index: int
    utterances: list[Statement]
    calls: list[dict]
    partial: list[Statement] = field(default_factory=list)
    error: str = ""

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "history": self.history.to_dict(),
                "sub_questions": None if self.sub_questions is None
                else [q.to_dict() for q in self.sub_questions],
                "next_index": self.next_index,
                "utterances": [s.to_dict() for s in self.utterances],
                "calls": self.calls,
                "partial": [s.to_dict() for s in self.partial],
                "error": self.error}

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d: Mapping) -> "Checkpoint":
        subs = d.get("sub_questions")
        return cls(d["task_id"], DiscussionHistory.from_dict(d["history"]),
                   None if subs is None else [SubQuestion.from_dict(q) for q in subs],
                   int(d["next_index"]), [Statement.from_dict(s) for s in d["utterances"]],
                   list(d.get("calls", [])), [Statement.from_dict(s) for s in d.get("partial", [])],
                   d.get("error", ""))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class DiscussionAborted(RuntimeError):
    def __init__(self, checkpoint: Checkpoint, path: Path | None, cause: Exception):
        where = f"; checkpoint written to {path}" if path else ""
        super().__init__(f"discussion {checkpoint.task_id} aborted: {cause}{where}")
        self.checkpoint = checkpoint
        self.path = path
        self.cause = cause


@dataclass
class RoundOutcome:
    statements: list[Statement]
    preliminaries: list[Statement]
    feedback: FeedbackNote | None = None


# -- prompt helpers ---------------------------------------------------------

def describe_rubric(rubric: Sequence[ErrorType]) -> str:
    return "\n".join(f"- {t.value} ({t.title}): {ERROR_DEFINITIONS[t]}" for t in rubric)


def whole_task_question(task: EvaluationTask) -> SubQuestion:
    names = ", ".join(t.value for t in task.rubric)
    return SubQuestion(0, f"Identify every error of the types {names} in the story, "
                          "with its location and an explanation.")


def synthetic_sub_question(index: int, error_type: ErrorType) -> SubQuestion:
    return SubQuestion(index, f"Does the story contain {error_type.title} ({error_type.value}) "
                              f"errors, i.e. {ERROR_DEFINITIONS[error_type]}? "
                              "Locate each one.", error_type)


def _approx_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def _statement_line(s: Statement) -> str:
    return f"[round {s.round + 1}] {s.agent_id}: {s.content}"


def format_history(statements: Sequence[Statement], budget: int | None = DEFAULT_HISTORY_BUDGET,
                   header: str = "Discussion so far:") -> str:
    """History section for agent prompts; empty string when there is no history.

    When the verbatim lines exceed ``budget`` tokens, statements from rounds
    before the most recent one are folded into a single digest entry.
    """
    if not statements:
        return ""
    lines = [_statement_line(s) for s in statements]
    if budget is not None and _approx_tokens("\n".join(lines)) > budget:
        last_round = statements[-1].round
        old = [s for s in statements if s.round != last_round]
        recent = [s for s in statements if s.round == last_round]
        digest = "; ".join(
            f"r{s.round + 1} {s.agent_id}: {' '.join(s.content.split())[:80]}" for s in old)
        lines = [f"[digest of {len(old)} earlier statements] {digest}"] + [
            _statement_line(s) for s in recent]
    return "\n" + header + "\n" + "\n".join(lines) + "\n"


def _guidance_message(guidance: str) -> Message:
    return Message("system", "Moderator feedback from the previous round, take it into account:\n"
                   + guidance)


def _ask(agent: AgentHandle, template: str, bindings: Mapping[str, str], calls: list | None,
         guidance: str | None = None) -> tuple[str, list[Message]]:
    conversation = render_prompt(get_template(template), bindings)
    if guidance:
        conversation.insert(1, _guidance_message(guidance))
    reply = complete(agent, conversation)
    if calls is not None:
        calls.append({"agent_id": agent.agent_id, "template": template})
    return reply, conversation


def _repair(agent: AgentHandle, conversation: list[Message], reply: str,
            calls: list | None) -> str:
    msgs = conversation + [Message("assistant", reply or "(empty reply)"),
                           Message("user", REPAIR_INSTRUCTION)]
    fixed = complete(agent, msgs)
    if calls is not None:
        calls.append({"agent_id": agent.agent_id, "template": "repair"})
    return fixed


# -- operations -------------------------------------------------------------

def _parse_decomposition(raw, rubric: Sequence[ErrorType]) -> list[SubQuestion] | None:
    data = first_json_block(raw)
    if isinstance(data, dict):
        data = data.get("sub_questions", data.get("questions"))
    if not isinstance(data, list):
        return None
    subs = []
    for item in data:
        if isinstance(item, str):
            text, target = item, None
        elif isinstance(item, dict):
            text = item.get("question") or item.get("text")
            target = item.get("error_type") or item.get("target")
        else:
            return None
        if not text or not str(text).strip():
            continue
        try:
            etype = ErrorType.parse(target) if target else None
        except ValueError:
            etype = None
        if etype is not None and etype not in rubric:
            etype = None
        subs.append(SubQuestion(len(subs), str(text).strip(), etype))
    return subs


def decompose_question(task: EvaluationTask, decomposer: AgentHandle,
                       calls: list | None = None) -> list[SubQuestion]:
    if not task.strategy.variant.uses_cot:
        raise InvalidState(f"strategy {task.strategy.variant.value} does not decompose")
    bindings = {"story": task.story.body, "error_types": describe_rubric(task.rubric)}
    reply, conversation = _ask(decomposer, "decompose", bindings, calls)
    subs = _parse_decomposition(reply, task.rubric)
    if subs is None:
        log.warning("task %s: decomposition unparseable, asking for a repair", task.task_id)
        subs = _parse_decomposition(_repair(decomposer, conversation, reply, calls), task.rubric)
        if subs is None:
            raise UnparseableDecomposition(
                f"task {task.task_id}: decomposer reply has no usable JSON block")
    covered = {q.target for q in subs}
    for t in task.rubric:
        if t not in covered:
            subs.append(synthetic_sub_question(len(subs), t))
    check_contiguous(subs)
    return subs


def _template_for_idea(task: EvaluationTask) -> str:
    v = task.strategy.variant
    if v is Variant.SA:
        return "single_agent_eval"
    return "preliminary" if v.uses_cot else "one_by_one_turn"


def formulate_idea(agent: AgentHandle, sub_q: SubQuestion, history: DiscussionHistory,
                   task: EvaluationTask, round_index: int = 0, guidance: str | None = None,
                   calls: list | None = None,
                   history_budget: int | None = DEFAULT_HISTORY_BUDGET) -> Statement:
    """Preliminary statement on ``sub_q``; the history is left untouched."""
    bindings = {"story": task.story.body, "sub_question": sub_q.text,
                "history": format_history(history.statements, history_budget),
                "error_types": describe_rubric(task.rubric)}
    reply, _ = _ask(agent, _template_for_idea(task), bindings, calls, guidance)
    return Statement(agent.agent_id, round_index, sub_q.index, StatementKind.PRELIMINARY, reply)


def format_peers(peers: Sequence[Statement]) -> str:
    if not peers:
        return "(no peer statements)"
    return "\n".join(f"{p.agent_id}: {p.content}" for p in peers)


def self_reflect(agent: AgentHandle, preliminary: Statement, peer_preliminaries: Sequence[Statement],
                 history: DiscussionHistory, task: EvaluationTask, sub_q: SubQuestion,
                 guidance: str | None = None, calls: list | None = None,
                 history_budget: int | None = DEFAULT_HISTORY_BUDGET) -> Statement:
    if preliminary.kind is not StatementKind.PRELIMINARY:
        raise ValueError("self_reflect needs a preliminary statement")
    bindings = {"story": task.story.body, "sub_question": sub_q.text,
                "history": format_history(history.statements, history_budget),
                "own_statement": preliminary.content,
                "peer_statements": format_peers(peer_preliminaries)}
    reply, _ = _ask(agent, "self_reflect", bindings, calls, guidance)
    return Statement(agent.agent_id, preliminary.round, preliminary.sub_question,
                     StatementKind.REFLECTED, reply)


_VERDICT_RE = re.compile(r"^\s*\**\s*VERDICT\s*:\s*\**\s*(CONSENSUS|DISAGREEMENT|INEFFICIENT)"
                         r"\s*\**\s*\.?\s*$", re.I)


def parse_feedback(reply: str, round_index: int) -> FeedbackNote:
    lines = (reply or "").rstrip().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if lines:
        m = _VERDICT_RE.match(lines[-1])
        if m:
            guidance = "\n".join(lines[:-1]).strip()
            return FeedbackNote(round_index, Verdict(m.group(1).lower()), guidance)
    return FeedbackNote(round_index, Verdict.INEFFICIENT, (reply or "").strip(),
                        parse_warning="reply has no VERDICT line")


def give_feedback(feedback_agent: AgentHandle, history: DiscussionHistory, round_index: int,
                  task: EvaluationTask, sub_q: SubQuestion | None = None,
                  calls: list | None = None) -> FeedbackNote:
    """Moderator verdict on one round; sees that round plus its own earlier notes."""
    this_round = [s for s in history.statements if s.round == round_index]
    if not this_round:
        raise InvalidState(f"round {round_index} has no statements")
    earlier = "\n".join(f"[round {n.round + 1}] {n.verdict.value}: {n.guidance}"
                        for n in history.feedback if n.round < round_index) or "(none)"
    bindings = {"sub_question": sub_q.text if sub_q else "",
                "history": "\n".join(_statement_line(s) for s in this_round),
                "feedback": earlier, "error_types": describe_rubric(task.rubric)}
    template = "feedback" if task.strategy.variant.uses_cot else "consensus_probe"
    reply, _ = _ask(feedback_agent, template, bindings, calls)
    note = parse_feedback(reply, round_index)
    if note.parse_warning:
        log.warning("task %s round %d: %s", task.task_id, round_index, note.parse_warning)
    return note


def run_round(sub_q: SubQuestion, agents: Sequence[AgentHandle], history: DiscussionHistory,
              task: EvaluationTask, round_index: int, feedback_agent: AgentHandle | None = None,
              guidance: str | None = None, calls: list | None = None,
              utterances: list | None = None,
              history_budget: int | None = DEFAULT_HISTORY_BUDGET) -> RoundOutcome:
    """One round: every agent speaks (and reflects) in order, then optional feedback.

    Statements are appended to ``history`` as they are accepted, so after a
    backend failure the history holds the partial round.
    """
    if not agents:
        raise ValueError("a round needs at least one agent")
    reflect = task.strategy.variant.uses_reflection
    accepted, prelims = [], []
    for agent in agents:
        p = formulate_idea(agent, sub_q, history, task, round_index, guidance, calls,
                           history_budget)
        if utterances is not None:
            utterances.append(p)
        final = p
        if reflect:
            final = self_reflect(agent, p, prelims, history, task, sub_q, guidance, calls,
                                 history_budget)
            if utterances is not None:
                utterances.append(final)
        prelims.append(p)
        history.append(final)
        accepted.append(final)
    note = None
    if task.strategy.feedback_enabled and feedback_agent is not None:
        note = give_feedback(feedback_agent, history, round_index, task, sub_q, calls)
        history.add_feedback(note)
    return RoundOutcome(accepted, prelims, note)


def summarize(summarizer: AgentHandle, history: DiscussionHistory, task: EvaluationTask,
              calls: list | None = None,
              history_budget: int | None = DEFAULT_HISTORY_BUDGET) -> str:
    if not history.statements:
        raise InvalidState("summary requires at least one statement in the history")
    explain = task.strategy.qa_explanations_enabled
    bindings = {"story": task.story.body, "error_types": describe_rubric(task.rubric),
                "history": format_history(history.statements, history_budget, header="").strip(),
                "explanation_request": EXPLANATION_REQUEST if explain else SCORES_ONLY_REQUEST}
    reply, _ = _ask(summarizer, "summarize_qa", bindings, calls)
    return reply


def _role(agents: Sequence[AgentHandle], role: str, handle: AgentHandle | None) -> AgentHandle:
    if handle is not None:
        return handle
    base = agents[0]
    return AgentHandle(role, base.backend, base.params)


def run_discussion(task: EvaluationTask, agents: Sequence[AgentHandle],
                   feedback_agent: AgentHandle | None = None,
                   summarizer: AgentHandle | None = None,
                   decomposer: AgentHandle | None = None, *,
                   sub_questions: Sequence[SubQuestion] | None = None,
                   resume: Checkpoint | None = None,
                   checkpoint_dir=None,
                   history_budget: int | None = DEFAULT_HISTORY_BUDGET,
                   params_snapshot: Mapping | None = None) -> DiscussionTranscript:
    """Run the full discussion for ``task`` under its strategy.

    Helper roles default to handles named ``decomposer``, ``feedback`` and
    ``summarizer`` on the first evaluator's backend. ``sub_questions`` skips
    the decomposition call. On a backend failure a :class:`Checkpoint` is
    built (and saved under ``checkpoint_dir``) and :class:`DiscussionAborted`
    is raised; pass it back as ``resume`` to continue.
    """
    strategy = task.strategy
    if len(agents) != strategy.num_agents:
        raise ValueError(f"strategy needs {strategy.num_agents} agents, got {len(agents)}")
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique within a discussion")
    summarizer = _role(agents, "summarizer", summarizer)
    if strategy.feedback_enabled and strategy.variant is not Variant.SA:
        feedback_agent = _role(agents, "feedback", feedback_agent)
    else:
        feedback_agent = None

    if resume is not None:
        history = resume.history.copy()
        utterances = list(resume.utterances)
        calls = list(resume.calls)
        subs = resume.sub_questions
        start = resume.next_index
    else:
        history = DiscussionHistory(task.task_id)
        utterances, calls, subs, start = [], [], None, 0
    if subs is None and sub_questions is not None:
        subs = list(sub_questions)
        check_contiguous(subs)

    def abort(exc, next_index, before_hist, before_utt, partial, n_calls=None):
        done_calls = list(calls if n_calls is None else calls[:n_calls])
        cp = Checkpoint(task.task_id, before_hist, subs, next_index, before_utt, done_calls,
                        partial, f"{type(exc).__name__}: {exc}")
        path = None
        if checkpoint_dir is not None:
            path = cp.save(Path(checkpoint_dir) / f"{task.task_id}.checkpoint.json")
        raise DiscussionAborted(cp, path, exc) from exc

    if subs is None:
        if strategy.variant.uses_cot:
            try:
                subs = decompose_question(task, _role(agents, "decomposer", decomposer), calls)
            except GatewayError as exc:
                abort(exc, 0, history.copy(), list(utterances), [])
        else:
            subs = [whole_task_question(task)]

    if strategy.variant is Variant.SA:
        n_rounds = 1
    elif strategy.variant.uses_cot:
        n_rounds = len(subs)
    else:
        n_rounds = strategy.max_rounds

    guidance = None
    if start > 0 and history.feedback and history.feedback[-1].round == start - 1:
        guidance = history.feedback[-1].guidance or None
    for r in range(start, n_rounds):
        sub_q = subs[r] if strategy.variant.uses_cot else subs[0]
        before_hist, before_utt, n_calls = history.copy(), list(utterances), len(calls)
        try:
            outcome = run_round(sub_q, agents, history, task, r, feedback_agent, guidance, calls,
                                utterances, history_budget)
        except GatewayError as exc:
            partial = list(history.statements[len(before_hist):])
            abort(exc, r, before_hist, before_utt, partial, n_calls)
        guidance = outcome.feedback.guidance if outcome.feedback and outcome.feedback.guidance \
            else None

    try:
        raw = summarize(summarizer, history, task, calls, history_budget)
    except GatewayError as exc:
        abort(exc, n_rounds, history.copy(), list(utterances), [])

    snapshot = {"strategy": strategy.to_dict(),
                "params": dict(params_snapshot) if params_snapshot is not None
                else agents[0].params.to_dict()}
    return DiscussionTranscript(history, list(subs), raw, snapshot, utterances, calls, n_rounds)

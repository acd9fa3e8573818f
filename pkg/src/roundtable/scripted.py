"""Build scripted backends that drive a whole discussion offline.

Handy for demos, for wiring checks of a new prompt catalog, and for
benchmark runs whose outcome is known in advance (agents that report exactly
the gold errors).
"""
from __future__ import annotations

import json
from typing import Sequence

from .discussion import describe_rubric
from .gateway import AgentHandle, GenerationParams, ScriptedBackend
from .model import ERROR_TYPES, AnnotatedStory, ErrorType, Finding, InjectedError, Strategy, Variant
from .pipeline import AgentSet


def fenced(obj) -> str:
    return "```json\n" + json.dumps(obj, ensure_ascii=False) + "\n```"


def decomposition_reply(rubric: Sequence[ErrorType]) -> str:
    return fenced({"sub_questions": [
        {"question": f"Does the story contain {t.title} errors?", "error_type": t.value}
        for t in rubric]})


def summary_reply(findings: Sequence[Finding | InjectedError]) -> str:
    entries = []
    for f in findings:
        if isinstance(f, InjectedError):
            entries.append({"error_type": f.error_type.value, "sentence_index": f.sentence_index,
                            "excerpt": f.perturbed_excerpt, "explanation": f.description})
        else:
            entries.append(f.to_dict())
    return "Panel summary.\n" + fenced({"findings": entries})


def rounds_for(strategy: Strategy, n_sub_questions: int) -> int:
    if strategy.variant is Variant.SA:
        return 1
    return n_sub_questions if strategy.variant.uses_cot else strategy.max_rounds


def script_discussion(strategy: Strategy, summary: str,
                      rubric: Sequence[ErrorType] = ERROR_TYPES,
                      decomposition: str | None = None,
                      evaluator_reply: str = "```json\n{\"findings\": []}\n```",
                      feedback_reply: str = "The panel agrees.\nVERDICT: CONSENSUS",
                      ) -> tuple[ScriptedBackend, AgentSet]:
    """A scripted backend holding exactly the replies one discussion consumes."""
    backend = ScriptedBackend()
    n_sub = len(rubric)
    if strategy.variant.uses_cot:
        backend.add("decomposer", decomposition or decomposition_reply(rubric))
    rounds = rounds_for(strategy, n_sub)
    per_round = 2 if strategy.variant.uses_reflection else 1
    evaluators = []
    for i in range(strategy.num_agents):
        agent_id = f"evaluator-{i + 1}"
        backend.add(agent_id, *[evaluator_reply] * (rounds * per_round))
        evaluators.append(AgentHandle(agent_id, backend, GenerationParams()))
    if strategy.feedback_enabled and strategy.variant is not Variant.SA:
        backend.add("feedback", *[feedback_reply] * rounds)
    backend.add("summarizer", summary)
    params = GenerationParams()
    agents = AgentSet(evaluators, AgentHandle("feedback", backend, params),
                      AgentHandle("summarizer", backend, params),
                      AgentHandle("decomposer", backend, params))
    return backend, agents


def gold_agents(strategy: Strategy, story: AnnotatedStory,
                rubric: Sequence[ErrorType] = ERROR_TYPES) -> AgentSet:
    """Agents whose summary lists exactly the story's gold errors."""
    _, agents = script_discussion(strategy, summary_reply(story.gold_errors), rubric)
    return agents


def silent_agents(strategy: Strategy, story: AnnotatedStory,
                  rubric: Sequence[ErrorType] = ERROR_TYPES) -> AgentSet:
    """Agents that never report an error."""
    _, agents = script_discussion(strategy, summary_reply([]), rubric)
    return agents


__all__ = ["fenced", "decomposition_reply", "summary_reply", "script_discussion", "gold_agents",
           "silent_agents", "describe_rubric", "rounds_for"]

"""Discussion plus report in one call."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .discussion import (DiscussionTranscript, EvaluationTask, _role, run_discussion)
from .gateway import AgentHandle, GatewayError, Message, complete, get_template
from .gateway.prompts import REPAIR_INSTRUCTION
from .model import EvaluationReport
from .reporting import build_report

log = logging.getLogger(__name__)


@dataclass
class AgentSet:
    evaluators: list[AgentHandle]
    feedback: AgentHandle | None = None
    summarizer: AgentHandle | None = None
    decomposer: AgentHandle | None = None


def _repair_call(summarizer: AgentHandle, raw: str, calls: list):
    def repair() -> str:
        template = get_template("summarize_qa")
        msgs = [Message("system", template.system),
                Message("user", "Report to reformat:\n" + (raw or "(empty)") + "\n\n"
                        + REPAIR_INSTRUCTION + ' Use {"findings": [{"error_type", '
                        '"sentence_index", "excerpt", "explanation"}]}.')]
        try:
            reply = complete(summarizer, msgs)
        except GatewayError as exc:
            log.warning("summary repair failed: %s", exc)
            return ""
        calls.append({"agent_id": summarizer.agent_id, "template": "repair"})
        return reply
    return repair


def evaluate_story(task: EvaluationTask, agents: AgentSet,
                   **kwargs) -> tuple[EvaluationReport, DiscussionTranscript]:
    """Run the discussion for ``task`` and turn its summary into a report.

    Extra keyword arguments go to :func:`run_discussion`.
    """
    transcript = run_discussion(task, agents.evaluators, agents.feedback, agents.summarizer,
                                agents.decomposer, **kwargs)
    summarizer = _role(agents.evaluators, "summarizer", agents.summarizer)
    report = build_report(transcript, task.story, task.rubric,
                          _repair_call(summarizer, transcript.raw_summary, transcript.calls))
    return report, transcript


def default_agents(backend, num_agents: int, params=None) -> AgentSet:
    from .gateway import GenerationParams
    params = params or GenerationParams()
    evaluators = [AgentHandle(f"evaluator-{i + 1}", backend, params) for i in range(num_agents)]
    return AgentSet(evaluators, AgentHandle("feedback", backend, params),
                    AgentHandle("summarizer", backend, params),
                    AgentHandle("decomposer", backend, params))

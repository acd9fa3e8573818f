"""Multi-agent discussion engine for evaluating machine-generated stories.

Evaluator agents discuss a story round by round, a moderator steers each
round, and a summarizer produces findings that are scored by deducting one
point per error. The ``corpus`` and ``bench`` subpackages build
error-injected corpora and correlate engine scores with reference scores.
"""
from .discussion import (Checkpoint, DiscussionAborted, DiscussionTranscript, EvaluationTask,
                         run_discussion)
from .model import (ERROR_TYPES, AnnotatedStory, DiscussionHistory, ErrorType, EvaluationReport,
                    Finding, ScoreCard, Statement, StoryText, Strategy, SubQuestion, Variant,
                    ablations, validate_report)
from .pipeline import AgentSet, default_agents, evaluate_story
from .reporting import parse_findings, render_qa_report, render_text_report, score_findings

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "DiscussionAborted", "DiscussionTranscript", "EvaluationTask", "run_discussion",
    "ERROR_TYPES", "AnnotatedStory", "DiscussionHistory", "ErrorType", "EvaluationReport",
    "Finding", "ScoreCard", "Statement", "StoryText", "Strategy", "SubQuestion", "Variant",
    "ablations", "validate_report", "AgentSet", "default_agents", "evaluate_story",
    "parse_findings", "render_qa_report", "render_text_report", "score_findings",
]

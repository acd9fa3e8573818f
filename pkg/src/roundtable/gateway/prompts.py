"""Prompt catalog and placeholder rendering.

Placeholders are ``{name}`` with a lowercase identifier; any other braces
(JSON examples inside templates) are left alone. Substitution is a single
pass, so bound text that itself contains ``{story}`` is not expanded again.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .errors import MissingBinding

CATALOG_VERSION = "1"

PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, d) -> "Message":
        return cls(d["role"], d["content"])


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    system: str = "You are a careful evaluator of story texts."

    @property
    def placeholders(self) -> list[str]:
        seen = []
        for name in PLACEHOLDER_RE.findall(self.body):
            if name not in seen:
                seen.append(name)
        return seen


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> list[Message]:
    for name in template.placeholders:
        if name not in bindings:
            raise MissingBinding(name)
    body = PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), template.body)
    return [Message("system", template.system), Message("user", body)]


_EVALUATOR = (
    "You are one evaluator on a panel reviewing a machine-generated story. "
    "You look for concrete errors, quote the text you are talking about, and "
    "take your colleagues' views seriously without copying them blindly."
)

_JSON_FINDINGS = """```json
{"findings": [{"error_type": "REP", "sentence_index": 0, "excerpt": "exact quote", "explanation": "why"}]}
```"""

TEMPLATES: dict[str, PromptTemplate] = {}


def _add(name: str, body: str, system: str = _EVALUATOR) -> None:
    TEMPLATES[name] = PromptTemplate(name, body.strip("\n"), system)


_add("decompose", """
Story:
\"\"\"
{story}
\"\"\"

The panel must check this story for the following error types:
{error_types}

Break the evaluation task into sub-questions that can each be discussed in one
round. Use one sub-question per error type and tag it with that type.
Answer with a single fenced JSON block and nothing else:
```json
{"sub_questions": [{"question": "Does the story repeat sentences or words?", "error_type": "REP"}]}
```
""", system="You are the coordinator of a panel of text evaluators.")

_add("preliminary", """
Story (sentences are numbered from 0 in reading order):
\"\"\"
{story}
\"\"\"

Current sub-question: {sub_question}
{history}
Give your preliminary answer to the current sub-question only. Quote every
problem exactly as it appears in the story. Answer with a fenced JSON block:
""" + _JSON_FINDINGS)

_add("self_reflect", """
Story:
\"\"\"
{story}
\"\"\"

Current sub-question: {sub_question}
{history}
Your preliminary statement:
{own_statement}

Statements from other panel members in this round:
{peer_statements}

Reflect on your statement. Keep what you can defend, drop what you cannot,
and add problems a colleague found if you agree after checking the text.
Answer with your revised position as a fenced JSON block:
""" + _JSON_FINDINGS)

_add("feedback", """
You moderate a panel discussing a story. This round's sub-question:
{sub_question}

Statements made in this round:
{history}

Your earlier feedback:
{feedback}

Assess the round. Point out repeated or unproductive remarks and any
disagreement between panel members, and say what the next round should do to
reach agreement. Write your guidance as plain text, then finish with exactly
one line of the form
VERDICT: CONSENSUS
or VERDICT: DISAGREEMENT or VERDICT: INEFFICIENT.
""", system="You moderate an evaluation panel and keep its discussion efficient.")

_add("summarize_qa", """
Story (sentences are numbered from 0 in reading order):
\"\"\"
{story}
\"\"\"

Error types under review:
{error_types}

Full panel discussion:
{history}

Compile the panel's final verdict. List every error the panel agreed on,
once, with its type, sentence index and an exact quote from the story.
{explanation_request}
Answer with a single fenced JSON block:
""" + _JSON_FINDINGS, system="You summarize an evaluation panel's discussion into a report.")

_add("summarize_prose", """
Story:
\"\"\"
{story}
\"\"\"

Error types under review:
{error_types}

Full panel discussion:
{history}

Write a readable report for the team that maintains the story generator:
describe each problem the panel agreed on, where it occurs and how to fix it.
End with the same findings as a fenced JSON block:
""" + _JSON_FINDINGS, system="You summarize an evaluation panel's discussion into a report.")

_add("single_agent_eval", """
Story (sentences are numbered from 0 in reading order):
\"\"\"
{story}
\"\"\"

Check the story for these error types:
{error_types}

Report every error you find, quoting the text exactly. Answer with a fenced
JSON block:
""" + _JSON_FINDINGS, system="You are an expert evaluator of story texts.")

_add("one_by_one_turn", """
Story (sentences are numbered from 0 in reading order):
\"\"\"
{story}
\"\"\"

Task: {sub_question}
Error types under review:
{error_types}
{history}
It is your turn to speak. Build on what has been said, quote problems exactly
and answer with a fenced JSON block:
""" + _JSON_FINDINGS)

_add("consensus_probe", """
You moderate a panel evaluating a story for these error types:
{error_types}

Statements made in this round:
{history}

Your earlier feedback:
{feedback}

Does the panel agree on the list of errors? Name the points still in dispute
and what the next round should settle. Write your guidance as plain text, then
finish with exactly one line: VERDICT: CONSENSUS, VERDICT: DISAGREEMENT or
VERDICT: INEFFICIENT.
""", system="You moderate an evaluation panel and keep its discussion efficient.")

EXPLANATION_REQUEST = (
    "For each error add a short explanation of why it is an error and how it "
    "affects the story."
)
SCORES_ONLY_REQUEST = "Give no explanations; leave the explanation field empty."

REPAIR_INSTRUCTION = (
    "Your previous reply did not contain a valid fenced JSON block in the "
    "requested format. Reply again with only that JSON block."
)


def get_template(name: str) -> PromptTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise KeyError(f"no prompt template named {name!r}") from None

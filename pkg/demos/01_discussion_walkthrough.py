"""
A panel discussion, step by step
================================

Two evaluator agents, a moderator and a summarizer review one short story.
All replies come from a scripted backend, so the run is offline and the
printout is identical every time.
"""

from roundtable import EvaluationTask, Strategy, StoryText, Variant
from roundtable.discussion import run_discussion
from roundtable.reporting import build_report
from roundtable.scripted import fenced, script_discussion

story = StoryText("walkthrough", (
    "Tom woke up early on a cold winter morning. "
    "He walked two miles to the old hospital. "
    "He walked two miles to the old hospital. "
    "His aunt worked there as a doctor. "
    "She was always sad because she loved her work."
))
for i, sentence in enumerate(story.sentences):
    print(i, sentence)

# The summarizer's final reply carries a fenced JSON block of findings.
summary = "The panel found two problems.\n" + fenced({"findings": [
    {"error_type": "REP", "sentence_index": 2,
     "excerpt": "He walked two miles to the old hospital.",
     "explanation": "The previous sentence is repeated word for word."},
    {"error_type": "LINC", "excerpt": "always sad because she loved her work",
     "explanation": "Loving the work does not explain constant sadness."},
]})

strategy = Strategy(Variant.SR_COT, num_agents=2)
backend, agents = script_discussion(
    strategy, summary,
    feedback_reply="Both agents agree; look harder at sentence 4 next.\nVERDICT: DISAGREEMENT")

# One round per sub-question; every agent speaks and then reflects.
task = EvaluationTask(story, strategy=strategy)
transcript = run_discussion(task, agents.evaluators, agents.feedback, agents.summarizer,
                            agents.decomposer)
print("\nsub-questions:")
for q in transcript.sub_questions:
    print(f"  {q.index}: {q.text}")
print(f"\n{len(transcript.statements)} utterances, "
      f"{len(transcript.history.statements)} accepted into the history, "
      f"{len(transcript.history.feedback)} moderator notes, {len(transcript.calls)} calls")

# What did the second agent actually see in round 2?  The moderator's
# guidance arrives as an extra system message.
conv = backend.conversations("evaluator-2")[2]
print("\n" + conv[1].content)

report = build_report(transcript, story)
print()
for question, answer in report.qa_items:
    print(f"Q: {question}\nA: {answer}")
print("\n" + report.prose)

"""
Ablation rows
=============

Starting from the full configuration, switch off the moderator, the
explanations in the summary, and the second agent. The call counts show
what each switch removes.
"""

import tempfile

from roundtable import EvaluationTask, StoryText, Strategy, ablations
from roundtable.bench import run_ablation
from roundtable.corpus import build_benchmark, make_corpus
from roundtable.discussion import run_discussion
from roundtable.scripted import gold_agents, script_discussion, summary_reply

story = StoryText("ab", "Anna found a small dog near the ocean. The dog was fast. "
                        "They played in the snow for three hours.")

for strategy in ablations(Strategy()):
    backend, agents = script_discussion(strategy, summary_reply([]))
    t = run_discussion(EvaluationTask(story, strategy=strategy), agents.evaluators,
                       agents.feedback, agents.summarizer, agents.decomposer)
    templates = [c["template"] for c in t.calls]
    print(f"{strategy.label:<20} calls={len(templates):>2}  notes={len(t.history.feedback)}  "
          f"first={templates[0]}")

corpus = build_benchmark(make_corpus(12, seed=9), [({"REP": 1, "ILC": 1}, 1.0), ({}, 1.0)],
                         seed=9, out_dir=tempfile.mkdtemp()).stories
print()
print(run_ablation(corpus, Strategy(), gold_agents).to_csv())

"""
Correlating engine scores with gold scores
==========================================

The benchmark runs every strategy on every story and reports Spearman and
Kendall correlations per error type. Here the agents are scripted: one set
reports exactly the injected errors, another misses the repetitions.
"""

import tempfile

import numpy as np

from roundtable.bench import run_benchmark, spearman, kendall
from roundtable.corpus import build_benchmark, make_corpus
from roundtable.model import ErrorType, Strategy, Variant
from roundtable.scripted import gold_agents, script_discussion, summary_reply

dist = [({"REP": 1}, 1.0), ({"REP": 2, "FER": 1}, 1.0), ({"LINC": 1, "DCONT": 1}, 1.0),
        ({}, 1.0), ({"ILC": 2}, 1.0)]
corpus = build_benchmark(make_corpus(20, seed=5), dist, seed=5,
                         out_dir=tempfile.mkdtemp()).stories

# Ties are common with small integer scores; both coefficients handle them.
engine = [-1, -2, -3, 0, -2]
gold = [-1, -3, -2, 0, -2]
print(f"rho = {spearman(engine, gold):.4f}   tau-b = {kendall(engine, gold):.4f}\n")


def blind_to_repetition(strategy, story):
    seen = [e for e in story.gold_errors if e.error_type is not ErrorType.REP]
    _, agents = script_discussion(strategy, summary_reply(seen))
    return agents


perfect = run_benchmark(corpus, [Strategy(Variant.SA), Strategy(Variant.SR_COT)], gold_agents)
print(perfect.to_csv())

# REP column becomes constant (all zeros) and is shown as absent.
blind = run_benchmark(corpus, [Strategy(Variant.SR_COT)], blind_to_repetition)
print(blind.to_csv())

totals = np.array([[r["engine"]["total"], r["reference"]["total"]]
                   for r in blind.rows[0].scores])
print("engine vs gold totals:\n", totals.T)

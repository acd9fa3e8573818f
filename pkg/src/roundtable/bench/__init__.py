from .harness import (ABSENT, CorrelationTable, MissingScores, TableRow, correlate,
                      extract_scores, pick_reference, run_ablation, run_benchmark)
from .stats import DegenerateInput, kendall, spearman

__all__ = ["ABSENT", "CorrelationTable", "MissingScores", "TableRow", "correlate",
           "extract_scores", "pick_reference", "run_ablation", "run_benchmark",
           "DegenerateInput", "kendall", "spearman"]

from .build import (BuildResult, annotate_story, build_benchmark, normalize_distribution,
                    rebuild_from_manifest, sample_plan, source_checksum, story_seed)
from .inject import (InfeasiblePlan, InjectionError, LexicalTables, NoLexicalTarget,
                     inject_errors, load_tables)
from .io import DuplicateId, MalformedLine, load_corpus, write_corpus
from .synthetic import make_corpus, make_story
from .truncate import over_limit, truncate_text

__all__ = [
    "BuildResult", "annotate_story", "build_benchmark", "normalize_distribution",
    "rebuild_from_manifest", "sample_plan", "source_checksum", "story_seed", "InfeasiblePlan",
    "InjectionError", "LexicalTables", "NoLexicalTarget", "inject_errors", "load_tables",
    "DuplicateId", "MalformedLine", "load_corpus", "write_corpus", "over_limit", "truncate_text",
    "make_corpus", "make_story",
]

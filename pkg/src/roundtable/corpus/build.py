from __future__ import annotations

import hashlib
import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..model import AnnotatedStory, ErrorType, ScoreCard, StoryText
from .inject import InjectionError, inject_errors
from .io import dumps_story
from .truncate import truncate_text

log = logging.getLogger(__name__)

Plan = dict  # ErrorType -> count


def normalize_distribution(dist) -> list[tuple[Plan, float]]:
    """Accept one plan, a list of plans, or a list of ``(plan, weight)`` pairs."""
    if isinstance(dist, Mapping):
        dist = [dist]
    out = []
    for item in dist:
        if isinstance(item, Mapping) and "plan" in item:
            plan, weight = item["plan"], item.get("weight", 1.0)
        elif isinstance(item, Mapping):
            plan, weight = item, 1.0
        else:
            plan, weight = item
        plan = {ErrorType.parse(k): int(v) for k, v in plan.items()}
        if any(v < 0 for v in plan.values()) or weight <= 0:
            raise ValueError("plan counts must be >= 0 and weights > 0")
        out.append(({t: plan[t] for t in ErrorType if t in plan}, float(weight)))
    if not out:
        raise ValueError("plan distribution is empty")
    return out


def distribution_to_json(dist: Sequence[tuple[Plan, float]]) -> list[dict]:
    return [{"plan": {t.value: n for t, n in plan.items()}, "weight": w} for plan, w in dist]


def story_seed(seed: int, story_id: str, purpose: str = "inject") -> int:
    digest = hashlib.sha256(f"{seed}:{story_id}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sample_plan(dist: Sequence[tuple[Plan, float]], seed: int, story_id: str) -> Plan:
    if len(dist) == 1:
        return dist[0][0]
    rng = random.Random(story_seed(seed, story_id, "plan"))
    total = sum(w for _, w in dist)
    u = rng.getrandbits(32) / 2 ** 32 * total
    for plan, w in dist:
        if u < w:
            return plan
        u -= w
    return dist[-1][0]


def source_checksum(stories: Iterable[AnnotatedStory | StoryText]) -> str:
    h = hashlib.sha256()
    for s in stories:
        st = s.story if isinstance(s, AnnotatedStory) else s
        h.update(json.dumps({"id": st.id, "body": st.body, "language": st.language},
                            sort_keys=True, ensure_ascii=False).encode("utf-8") + b"\n")
    return h.hexdigest()


@dataclass
class BuildResult:
    corpus_path: Path
    manifest_path: Path
    stories: list[AnnotatedStory]
    skipped: list[dict] = field(default_factory=list)

    @property
    def skipped_ids(self) -> list[str]:
        return [s["id"] for s in self.skipped]


def annotate_story(story: StoryText, dist, seed: int,
                   word_limit: int | None = None) -> AnnotatedStory:
    if word_limit is not None:
        story = truncate_text(story, word_limit)
    plan = sample_plan(dist, seed, story.id)
    perturbed, gold = inject_errors(story, list(plan.items()), story_seed(seed, story.id))
    return AnnotatedStory(perturbed, tuple(gold), ScoreCard.from_types(e.error_type for e in gold))


def build_benchmark(corpus: Sequence[AnnotatedStory | StoryText], plan_distribution, seed: int,
                    out_dir, word_limit: int | None = None, workers: int = 1,
                    name: str = "annotated") -> BuildResult:
    """Inject errors into every story and write ``<name>.jsonl`` plus ``<name>.manifest.json``.

    Stories whose plan cannot be applied are skipped and listed in the
    manifest. The output depends only on the inputs and ``seed``.
    """
    dist = normalize_distribution(plan_distribution)
    stories = [s.story if isinstance(s, AnnotatedStory) else s for s in corpus]

    def work(story):
        try:
            return annotate_story(story, dist, seed, word_limit), None
        except InjectionError as exc:
            log.warning("skipping story %s: %s", story.id, exc)
            return None, {"id": story.id, "reason": str(exc)}

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, stories))
    else:
        results = [work(s) for s in stories]

    built = [r for r, _ in results if r is not None]
    skipped = [s for _, s in results if s is not None]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / f"{name}.jsonl"
    payload = "".join(dumps_story(s) + "\n" for s in built).encode("utf-8")
    corpus_path.write_bytes(payload)
    manifest = {
        "seed": seed,
        "distribution": distribution_to_json(dist),
        "word_limit": word_limit,
        "skipped_ids": [s["id"] for s in skipped],
        "skipped": skipped,
        "source_checksum": source_checksum(stories),
        "output_checksum": hashlib.sha256(payload).hexdigest(),
        "prng": "MT19937 (random.Random) seeded per story with sha256('<seed>:<id>:inject')[:8]",
    }
    manifest_path = out_dir / f"{name}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n",
                             encoding="utf-8")
    return BuildResult(corpus_path, manifest_path, built, skipped)


def rebuild_from_manifest(corpus, manifest_path, out_dir, name: str = "annotated") -> BuildResult:
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    if manifest.get("source_checksum") != source_checksum(corpus):
        raise ValueError("source corpus differs from the one recorded in the manifest")
    return build_benchmark(corpus, manifest["distribution"], manifest["seed"], out_dir,
                           manifest.get("word_limit"), name=name)

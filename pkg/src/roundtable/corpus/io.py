from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from ..model import AnnotatedStory


class MalformedLine(ValueError):
    def __init__(self, lineno: int, reason: str, story_id: str | None = None):
        where = f" (id {story_id})" if story_id else ""
        super().__init__(f"line {lineno}{where}: {reason}")
        self.lineno = lineno
        self.reason = reason
        self.story_id = story_id


class DuplicateId(MalformedLine):
    pass


def load_corpus(path) -> list[AnnotatedStory]:
    """Read a JSON Lines corpus; blank lines are skipped, order is kept."""
    stories, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            sid = None
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("expected a JSON object")
                sid = rec.get("id")
                if sid is None:
                    raise ValueError("missing id")
                story = AnnotatedStory.from_dict(rec)
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedLine(lineno, str(exc), sid) from None
            if story.story.id in seen:
                raise DuplicateId(lineno, "duplicate id", story.story.id)
            seen.add(story.story.id)
            stories.append(story)
    return stories


def dumps_story(story: AnnotatedStory) -> str:
    return json.dumps(story.to_dict(), ensure_ascii=False, sort_keys=True)


def write_corpus(stories: Iterable[AnnotatedStory], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for s in stories:
            fh.write(dumps_story(s) + "\n")
    return path

from __future__ import annotations

import logging

from ..model import StoryText
from ..text import count_words, sentence_spans

log = logging.getLogger(__name__)


def truncate_text(story: StoryText, word_limit: int = 200) -> StoryText:
    """Longest prefix of whole sentences with at most ``word_limit`` words.

    A first sentence that alone exceeds the limit is kept whole; the result
    then has more than ``word_limit`` words and a warning is logged.
    """
    if word_limit < 1:
        raise ValueError("word_limit must be >= 1")
    if story.word_count <= word_limit:
        return story
    spans = sentence_spans(story.body)
    end, total = None, 0
    for a, b in spans:
        n = count_words(story.body[a:b], story.language)
        if end is not None and total + n > word_limit:
            break
        total += n
        end = b
        if total > word_limit:
            log.warning("story %s: first sentence has %d words, over the %d-word limit",
                        story.id, total, word_limit)
            break
    return story.with_body(story.body[:end])


def over_limit(story: StoryText, word_limit: int = 200) -> bool:
    return story.word_count > word_limit

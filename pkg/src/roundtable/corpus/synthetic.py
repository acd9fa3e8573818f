"""Small generator of plausible English stories for demos and tests.

Sentences are drawn from a fixed bank that is rich in words the injection
tables know about. Every sentence has a target for the lexical, factual and
pronoun injectors.
"""
from __future__ import annotations

import random

from ..model import StoryText

NAMES = ["Tom", "Anna", "Lily", "Ben", "Maria", "Sam", "Nora", "Jack"]

BANK = [
    "{n} woke up early on a cold winter morning and he stretched.",
    "{n} was happy because the sun was shining on his window.",
    "{n} walked two miles to the old hospital where his aunt worked as a doctor.",
    "The shop on the corner was open on Monday and many people were inside.",
    "{n} bought milk and bread for their breakfast.",
    "Many friends came to visit in the summer, and he laughed with them.",
    "She found a small dog near the ocean.",
    "The dog was fast and he was always hungry for milk.",
    "They played in the snow for three hours.",
    "{n} remembered the first day at school with his two friends.",
    "His sister had a big smile on her face that morning.",
    "The house was clean and they kept it full of light in winter.",
    "{n} could not find his three keys, so they started to search.",
    "On Monday the teacher gave each student a good book.",
    "The train from London arrived late and the station was empty, so he waited.",
    "{n} liked to read stories about birds and fish with her brother.",
    "After dinner they were tired but glad to see the moon.",
    "The garden had several tall trees and five flowers.",
    "{n} won the race in December and his family felt proud.",
    "It was a hard climb in the rain, but they said the view was worth it.",
    "The cat slept in their warm kitchen until ten o'clock.",
    "Their neighbor was a rich man with 4 horses.",
    "{n} accepted the invitation to their summer party.",
    "The river was calm and the fish were easy for him to catch.",
]


def make_story(story_id: str, n_sentences: int, seed: int) -> StoryText:
    rng = random.Random(seed)
    name = rng.choice(NAMES)
    picks = rng.sample(range(len(BANK)), min(n_sentences, len(BANK)))
    while len(picks) < n_sentences:
        k = rng.randrange(len(BANK))
        if k != picks[-1]:
            picks.append(k)
    body = " ".join(BANK[i].format(n=name) for i in picks)
    return StoryText(story_id, body, "en")


def make_corpus(n: int, seed: int, min_sentences: int = 5, max_sentences: int = 10) -> list[StoryText]:
    rng = random.Random(seed)
    return [make_story(f"story-{i:03d}", rng.randint(min_sentences, max_sentences),
                       rng.getrandbits(32)) for i in range(n)]

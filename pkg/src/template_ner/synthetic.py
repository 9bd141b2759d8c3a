"""Deterministic synthetic corpora for demos and end-to-end harnesses.

The language has ~200 token types: filler words that are never entities,
two inventories of entity names, and two marker words that always precede a
mention of their type. A fifth of the device mentions carry a trailing
"mk2" token, so spans are not all single tokens and boundary mistakes are
possible.
"""

from __future__ import annotations

import random

from .corpus import Corpus, LabeledSentence

FILLERS = tuple(f"w{i:03d}" for i in range(150))
DEVICE_NAMES = tuple(f"dev{i:02d}" for i in range(20))
ANIMAL_NAMES = tuple(f"ani{i:02d}" for i in range(20))
DEVICE_MARKER = "install"
ANIMAL_MARKER = "feed"
DEVICE_SUFFIX = "mk2"

DEFAULT_LABELS = ("DEVICE", "ANIMAL")


def synthetic_corpus(
    n_sentences: int,
    seed: int,
    labels: tuple[str, str] = DEFAULT_LABELS,
    suffix_rate: float = 0.2,
    second_mention_rate: float = 0.25,
    no_mention_rate: float = 0.1,
) -> Corpus:
    """Generate n_sentences sentences; the primary mention type alternates by
    sentence index so both labels appear even in tiny corpora."""
    device_label, animal_label = labels
    rng = random.Random(seed)
    sentences = []
    for i in range(n_sentences):
        tokens: list[str] = []
        tags: list[str] = []

        def add_fillers(lo: int, hi: int) -> None:
            for _ in range(rng.randint(lo, hi)):
                tokens.append(rng.choice(FILLERS))
                tags.append("O")

        def add_mention(kind: str) -> None:
            if kind == "device":
                tokens.append(DEVICE_MARKER)
                tags.append("O")
                tokens.append(rng.choice(DEVICE_NAMES))
                tags.append(f"B-{device_label}")
                if rng.random() < suffix_rate:
                    tokens.append(DEVICE_SUFFIX)
                    tags.append(f"I-{device_label}")
            else:
                tokens.append(ANIMAL_MARKER)
                tags.append("O")
                tokens.append(rng.choice(ANIMAL_NAMES))
                tags.append(f"B-{animal_label}")

        add_fillers(2, 4)
        if rng.random() >= no_mention_rate:
            primary = "device" if i % 2 == 0 else "animal"
            add_mention(primary)
            add_fillers(1, 3)
            if rng.random() < second_mention_rate:
                add_mention(rng.choice(["device", "animal"]))
                add_fillers(0, 2)
        else:
            add_fillers(1, 3)
        sentences.append(LabeledSentence(tuple(tokens), tuple(tags)))
    return Corpus.build(sentences, label_set=tuple(sorted(labels)))

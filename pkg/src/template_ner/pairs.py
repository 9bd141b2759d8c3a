"""Training pair construction.

Every gold entity mention yields a positive (sentence, filled entity
template) pair; negative pairs fill the non-entity template with spans whose
coordinates match no gold entity, sampled corpus-wide at a configurable
multiple of the positive count.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .corpus import Corpus
from .templates import NONE_LABEL, LabelWordMap, TemplateSpec, fill

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class TrainingPair:
    source: tuple[str, ...]
    target: tuple[str, ...]
    polarity: str

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"bad polarity {self.polarity!r}")


@dataclass
class PairBuildResult:
    """Pairs plus bookkeeping so callers can see shortfalls instead of
    silently training on fewer negatives than requested.

    negative_spans records the sampled (sentence index, start, end)
    coordinates; serialization keeps only the token sequences, so this is
    the place to audit what was sampled.
    """

    pairs: list[TrainingPair]
    positive_count: int
    negative_requested: int
    negative_count: int
    warnings: tuple[str, ...] = field(default_factory=tuple)
    negative_spans: list[tuple[int, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[TrainingPair]:
        return iter(self.pairs)


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def build_training_pairs(
    corpus: Corpus,
    template: TemplateSpec,
    words: LabelWordMap,
    neg_ratio: float = 1.5,
    max_span_len: int = 8,
    seed: int = 0,
) -> PairBuildResult:
    """Build shuffled positive and negative training pairs.

    Negatives are sampled uniformly without replacement from all spans of
    length <= max_span_len whose (start, end) equals no gold span in their
    sentence; partial overlaps with gold entities stay eligible so the scorer
    learns to reject boundary-wrong spans. The negative count is
    round(neg_ratio * positives), rounding half up.
    """
    if neg_ratio < 0:
        raise ValueError("neg_ratio must be >= 0")
    if max_span_len < 1:
        raise ValueError("max_span_len must be >= 1")

    positives: list[TrainingPair] = []
    pool: list[tuple[int, int, int]] = []
    for sent_idx, sent in enumerate(corpus):
        gold = sent.entity_spans()
        gold_coords = {(s.start, s.end) for s in gold}
        for span in gold:
            filled = fill(template, sent.tokens[span.start : span.end], span.label, words)
            positives.append(TrainingPair(sent.tokens, filled.tokens, POSITIVE))
        n = len(sent)
        for start in range(n):
            for end in range(start + 1, min(start + max_span_len, n) + 1):
                if (start, end) not in gold_coords:
                    pool.append((sent_idx, start, end))

    warnings: list[str] = []
    if not positives:
        if neg_ratio > 0:
            warnings.append("corpus has no gold mentions; no pairs were built")
        return PairBuildResult([], 0, 0, 0, tuple(warnings))

    requested = round_half_up(neg_ratio * len(positives))
    rng = random.Random(seed)
    if requested >= len(pool):
        chosen = list(pool)
        if requested > len(pool):
            warnings.append(
                f"negative shortfall: requested {requested}, "
                f"only {len(pool)} eligible spans"
            )
    else:
        chosen = rng.sample(pool, requested)

    negatives = []
    for sent_idx, start, end in chosen:
        sent = corpus.sentences[sent_idx]
        filled = fill(template, sent.tokens[start:end], NONE_LABEL, words)
        negatives.append(TrainingPair(sent.tokens, filled.tokens, NEGATIVE))

    pairs = positives + negatives
    rng.shuffle(pairs)
    return PairBuildResult(
        pairs, len(positives), requested, len(negatives), tuple(warnings),
        negative_spans=chosen,
    )


def write_pairs(pairs: Sequence[TrainingPair], path) -> None:
    """One pair per line: source tokens TAB target tokens TAB polarity."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                f"{' '.join(pair.source)}\t{' '.join(pair.target)}\t{pair.polarity}\n"
            )


def read_pairs(path) -> list[TrainingPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}: line {line_no}: expected 3 tab-separated fields")
            src, tgt, polarity = parts
            pairs.append(TrainingPair(tuple(src.split()), tuple(tgt.split()), polarity))
    return pairs

"""Span-ranking inference.

Enumerate candidate spans, score every (span, entity type) template plus the
non-entity template with a generative scorer, label each span by its best
template, then resolve overlaps greedily by score so the output is a set of
disjoint entities.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import EntitySpan
from .errors import ProtocolError, ScorerError, TransportError
from .scorer import EOS, GenerativeScorer
from .templates import NONE_LABEL, LabelWordMap, TemplateSpec, fill


@dataclass
class DecodeConfig:
    template: TemplateSpec
    words: LabelWordMap
    max_span_len: int = 8
    # Divide template scores by their token count before ranking. Off by
    # default: raw summed log-probabilities are the reference behavior.
    length_normalize: bool = False

    def __post_init__(self):
        if self.max_span_len < 1:
            raise ValueError("max_span_len must be >= 1")


@dataclass(frozen=True)
class ScoredCandidate:
    """One candidate span with its winning label and all template scores."""

    start: int
    end: int
    label: str
    score: float
    per_label_scores: Mapping[str, float] = field(hash=False)

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "ScoredCandidate") -> bool:
        return self.start < other.end and other.start < self.end

    def to_span(self) -> EntitySpan:
        if self.label == NONE_LABEL:
            raise ValueError("non-entity candidate has no entity span")
        return EntitySpan(self.start, self.end, self.label)


def enumerate_spans(n: int, max_span_len: int = 8) -> list[tuple[int, int]]:
    """All (start, end) spans of length 1..min(max_span_len, n), ordered by
    start then length."""
    if n < 1:
        raise ValueError("sentence length must be >= 1")
    if max_span_len < 1:
        raise ValueError("max_span_len must be >= 1")
    spans = []
    for start in range(n):
        for end in range(start + 1, min(start + max_span_len, n) + 1):
            spans.append((start, end))
    return spans


def _tie_word(label: str, words: LabelWordMap | None) -> str:
    if words is not None and label in words:
        return words.word(label)
    return label


def classify_span(
    scorer: GenerativeScorer,
    tokens: Sequence[str],
    span: tuple[int, int],
    config: DecodeConfig,
) -> ScoredCandidate:
    """Score every entity-type template and the non-entity template for one
    span and pick the argmax.

    Exact ties resolve to the lexicographically smaller label word; the
    non-entity sentinel sorts before every word, so score ties against it
    stay non-entities.

    Raw scores are summed log-probabilities, so a constant per-token shift
    leaves the argmax unchanged only when all of a span's templates have
    equal token length; across unequal lengths longer templates absorb more
    of the shift. length_normalize trades that bias for a per-token mean.
    """
    start, end = span
    if not (0 <= start < end <= len(tokens)):
        raise ValueError(f"span ({start}, {end}) outside sentence of length {len(tokens)}")
    span_tokens = tuple(tokens[start:end])
    labels = list(config.words.labels) + [NONE_LABEL]
    targets = [
        tuple(fill(config.template, span_tokens, label, config.words).tokens) + (EOS,)
        for label in labels
    ]
    try:
        scores = scorer.score_targets(tokens, targets)
    except (ScorerError, TransportError, ProtocolError) as exc:
        # keep the error class, add which span was being scored
        raise type(exc)(f"scoring span ({start}, {end}) failed: {exc}") from exc
    per_label: dict[str, float] = {}
    for label, target, score in zip(labels, targets, scores):
        value = score.total
        if config.length_normalize:
            value /= len(target)
        per_label[label] = value
    best = min(
        per_label.items(),
        key=lambda kv: (-kv[1], _tie_word(kv[0], config.words)),
    )
    return ScoredCandidate(start, end, best[0], best[1], per_label)


def resolve_overlaps(
    candidates: Sequence[ScoredCandidate],
    words: LabelWordMap | None = None,
) -> list[ScoredCandidate]:
    """Greedy selection by descending score; a candidate is kept iff it
    overlaps no already-kept one. Ties break toward earlier start, then
    shorter span, then lexicographic label word. Result sorted by start."""
    ranked = sorted(
        candidates,
        key=lambda c: (-c.score, c.start, c.length, _tie_word(c.label, words)),
    )
    kept: list[ScoredCandidate] = []
    for cand in ranked:
        if not any(cand.overlaps(k) for k in kept):
            kept.append(cand)
    kept.sort(key=lambda c: c.start)
    return kept


def decode_sentence_candidates(
    scorer: GenerativeScorer,
    tokens: Sequence[str],
    config: DecodeConfig,
) -> list[ScoredCandidate]:
    """Kept entity candidates (with scores) for one sentence, sorted by start."""
    candidates = [
        classify_span(scorer, tokens, span, config)
        for span in enumerate_spans(len(tokens), config.max_span_len)
    ]
    entity_candidates = [c for c in candidates if c.label != NONE_LABEL]
    return resolve_overlaps(entity_candidates, config.words)


def decode_sentence(
    scorer: GenerativeScorer,
    tokens: Sequence[str],
    config: DecodeConfig,
) -> list[EntitySpan]:
    return [c.to_span() for c in decode_sentence_candidates(scorer, tokens, config)]


def decode_corpus(
    scorer: GenerativeScorer,
    sentences: Sequence[Sequence[str]],
    config: DecodeConfig,
    workers: int = 1,
) -> list[list[ScoredCandidate]]:
    """Decode many token sequences. The worker count only parallelizes
    sentence scoring; output is identical for any value."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return [decode_sentence_candidates(scorer, toks, config) for toks in sentences]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda toks: decode_sentence_candidates(scorer, toks, config), sentences)
        )


def ensemble_decode(
    model_outputs: Sequence[Sequence[tuple[EntitySpan, float]]],
) -> list[EntitySpan]:
    """Entity-level voting across models.

    An exact (start, end, label) entity survives iff predicted by a strict
    majority of models. Should surviving entities overlap (possible only
    with overlapping per-model inputs), higher vote count wins, then larger
    summed score, then the earlier, shorter, lexicographically smaller one.
    """
    if not model_outputs:
        raise ValueError("need at least one model output")
    n_models = len(model_outputs)
    votes: dict[EntitySpan, int] = {}
    score_sums: dict[EntitySpan, float] = {}
    for output in model_outputs:
        seen_here: dict[EntitySpan, float] = {}
        for span, score in output:
            # A model voting twice for the same entity counts once; keep its
            # best score.
            if span not in seen_here or score > seen_here[span]:
                seen_here[span] = score
        for span, score in seen_here.items():
            votes[span] = votes.get(span, 0) + 1
            score_sums[span] = score_sums.get(span, 0.0) + score
    majority = n_models // 2 + 1
    survivors = [span for span, count in votes.items() if count >= majority]
    survivors.sort(
        key=lambda s: (-votes[s], -score_sums[s], s.start, s.length, s.label)
    )
    kept: list[EntitySpan] = []
    for span in survivors:
        if not any(span.overlaps(k) for k in kept):
            kept.append(span)
    kept.sort(key=lambda s: s.start)
    return kept

"""BIO-tagged corpus handling.

Parsing and serialization of CoNLL-style files, conversion between tag
sequences and entity spans, corpus statistics, and the sentence-sampling
protocols used to build few-shot training sets.
"""

from __future__ import annotations

import io
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .errors import BioError, ConllParseError

O_TAG = "O"
DOCSTART = "-DOCSTART-"


def _split_tag(tag: str) -> tuple[str, str | None]:
    """Split a BIO tag into (prefix, label); 'O' yields ('O', None)."""
    if tag == O_TAG:
        return O_TAG, None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        return tag[0], tag[2:]
    raise BioError(f"malformed BIO tag {tag!r}")


def validate_bio(tags: Sequence[str]) -> None:
    """Raise BioError unless tags form a strict BIO sequence.

    Strict means every I-<label> continues a preceding B-<label> or
    I-<label> of the same label.
    """
    prev_label: str | None = None
    for i, tag in enumerate(tags):
        prefix, label = _split_tag(tag)
        if prefix == "I" and label != prev_label:
            raise BioError(
                f"I-{label} at position {i} does not continue a {label} entity"
            )
        prev_label = label if prefix != O_TAG else None


@dataclass(frozen=True, order=True)
class EntitySpan:
    """Half-open token span [start, end) carrying an entity label."""

    start: int
    end: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class LabeledSentence:
    """Token sequence with a strict-BIO tag sequence of equal length."""

    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.tokens:
            raise ValueError("sentence must contain at least one token")
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        validate_bio(self.tags)

    def __len__(self) -> int:
        return len(self.tokens)

    def entity_spans(self) -> list[EntitySpan]:
        return spans_from_bio(self.tags)

    def mention_counts(self) -> Counter:
        return Counter(s.label for s in self.entity_spans())


def spans_from_bio(tags: Sequence[str]) -> list[EntitySpan]:
    """Convert a strict BIO tag sequence into sorted, disjoint entity spans."""
    validate_bio(tags)
    spans: list[EntitySpan] = []
    start: int | None = None
    label: str | None = None
    for i, tag in enumerate(tags):
        prefix, tag_label = _split_tag(tag)
        if prefix == "B":
            if start is not None:
                spans.append(EntitySpan(start, i, label))
            start, label = i, tag_label
        elif prefix == O_TAG and start is not None:
            spans.append(EntitySpan(start, i, label))
            start = None
    if start is not None:
        spans.append(EntitySpan(start, len(tags), label))
    return spans


def bio_from_spans(spans: Sequence[EntitySpan], length: int) -> list[str]:
    """Exact inverse of spans_from_bio for disjoint spans within [0, length)."""
    tags = [O_TAG] * length
    for span in sorted(spans):
        if span.end > length:
            raise ValueError(f"span {span} exceeds sentence length {length}")
        if any(tags[i] != O_TAG for i in range(span.start, span.end)):
            raise ValueError(f"span {span} overlaps another span")
        tags[span.start] = f"B-{span.label}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.label}"
    return tags


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of labeled sentences plus an ordered label set.

    The label set is either inferred (sorted) from the tags or declared
    explicitly, in which case it must be a superset of the labels that occur.
    """

    sentences: tuple[LabeledSentence, ...]
    label_set: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "label_set", tuple(self.label_set))
        occurring = {s.label for sent in self.sentences for s in sent.entity_spans()}
        missing = occurring - set(self.label_set)
        if missing:
            raise ValueError(f"labels occur in tags but not in label_set: {sorted(missing)}")

    @classmethod
    def build(
        cls,
        sentences: Iterable[LabeledSentence],
        label_set: Sequence[str] | None = None,
    ) -> "Corpus":
        sentences = tuple(sentences)
        if label_set is None:
            occurring = {s.label for sent in sentences for s in sent.entity_spans()}
            label_set = tuple(sorted(occurring))
        return cls(sentences, tuple(label_set))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[LabeledSentence]:
        return iter(self.sentences)

    def gold_spans(self) -> list[list[EntitySpan]]:
        return [sent.entity_spans() for sent in self.sentences]


@dataclass
class CorpusStats:
    sentence_count: int
    mention_count_per_label: dict[str, int]
    entity_type_count: int


def parse_conll(
    source: str | IO[str] | Iterable[str],
    *,
    skip_docstart: bool = True,
) -> Corpus:
    """Parse CoNLL-style text: one token per line, whitespace-separated
    columns with the BIO tag last, blank line between sentences.

    BIO validity is checked while reading so errors carry line numbers.
    Single-token -DOCSTART- sentences are dropped unless skip_docstart is
    False.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    sentences: list[LabeledSentence] = []
    tokens: list[str] = []
    tags: list[str] = []
    prev_label: str | None = None

    def flush():
        nonlocal tokens, tags, prev_label
        if tokens:
            if not (skip_docstart and tokens[0] == DOCSTART and len(tokens) == 1):
                sentences.append(LabeledSentence(tuple(tokens), tuple(tags)))
        tokens, tags = [], []
        prev_label = None

    line_no = 0
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        cols = line.split()
        if len(cols) < 2:
            raise ConllParseError(
                f"expected token and tag columns, got {line!r}", line_no
            )
        token, tag = cols[0], cols[-1]
        try:
            prefix, label = _split_tag(tag)
        except BioError as exc:
            raise ConllParseError(str(exc), line_no) from exc
        if prefix == "I" and label != prev_label:
            raise ConllParseError(
                f"I-{label} does not continue a {label} entity", line_no
            )
        prev_label = label if prefix != O_TAG else None
        tokens.append(token)
        tags.append(tag)
    flush()
    return Corpus.build(sentences)


def read_conll(path, **kwargs) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_conll(fh, **kwargs)


def to_conll(corpus: Corpus) -> str:
    """Serialize as 'token SPACE tag' lines with blank lines between sentences."""
    blocks = [
        "\n".join(f"{tok} {tag}" for tok, tag in zip(sent.tokens, sent.tags))
        for sent in corpus
    ]
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def write_conll(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_conll(corpus))


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Full-scan counts: sentences, mentions per label, nonzero label types."""
    counts = {label: 0 for label in corpus.label_set}
    for sent in corpus:
        for span in sent.entity_spans():
            counts[span.label] += 1
    nonzero = sum(1 for c in counts.values() if c > 0)
    return CorpusStats(len(corpus), counts, nonzero)


def format_stats(stats: CorpusStats) -> str:
    lines = [f"sentences: {stats.sentence_count}"]
    for label, count in sorted(stats.mention_count_per_label.items()):
        lines.append(f"mentions[{label}]: {count}")
    lines.append(f"entity_types: {stats.entity_type_count}")
    return "\n".join(lines)


def _greedy_fill(
    corpus: Corpus,
    targets: Mapping[str, int],
    seed: int,
) -> tuple[list[int], dict[str, int]]:
    """Greedy sentence selection shared by the two sampling protocols.

    Labels are visited in deterministic (label_set) order; sentences in a
    seed-shuffled order. A sentence containing an under-target label is kept
    whole, and every mention it carries counts toward its label's target.
    Sentences without any entity mention are never selected.
    """
    mention_counts = [sent.mention_counts() for sent in corpus]
    order = list(range(len(corpus)))
    random.Random(seed).shuffle(order)
    achieved = {label: 0 for label in corpus.label_set}
    kept: list[int] = []
    kept_set: set[int] = set()
    for label in corpus.label_set:
        target = targets.get(label, 0)
        if achieved[label] >= target:
            continue
        for idx in order:
            if achieved[label] >= target:
                break
            if idx in kept_set or mention_counts[idx][label] == 0:
                continue
            kept.append(idx)
            kept_set.add(idx)
            for lab, n in mention_counts[idx].items():
                achieved[lab] += n
    return kept, achieved


def sample_few_shot(corpus: Corpus, k: int, seed: int) -> Corpus:
    """Sub-corpus with roughly k entity mentions per type.

    Types with fewer than k mentions contribute all of them. Mentions carried
    along by a kept sentence count toward their own type's quota, so counts
    can exceed k. Deterministic for a fixed seed.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    targets = {label: k for label in corpus.label_set}
    kept, _ = _greedy_fill(corpus, targets, seed)
    return Corpus.build(
        (corpus.sentences[i] for i in kept), label_set=corpus.label_set
    )


@dataclass
class DownsampleResult:
    """Downsampled corpus plus the achieved per-label mention counts.

    overshoot holds, for each quota label, how far co-occurrence pushed the
    achieved count past its quota (only positive excesses are listed).
    """

    corpus: Corpus
    achieved: dict[str, int]
    overshoot: dict[str, int] = field(default_factory=dict)


def downsample_in_domain(
    corpus: Corpus, quotas: Mapping[str, int], seed: int
) -> DownsampleResult:
    """Reduce per-label mention counts toward the given quotas.

    Labels absent from quotas get no quota of their own but still accumulate
    carried-along mentions. Quota overshoot happens only through
    co-occurrence inside a kept sentence and is reported, never hidden.
    """
    unknown = set(quotas) - set(corpus.label_set)
    if unknown:
        raise ValueError(f"unknown labels in quotas: {sorted(unknown)}")
    for label, quota in quotas.items():
        if quota < 0:
            raise ValueError(f"negative quota for {label}")
    kept, achieved = _greedy_fill(corpus, quotas, seed)
    sub = Corpus.build((corpus.sentences[i] for i in kept), label_set=corpus.label_set)
    overshoot = {
        label: achieved[label] - quota
        for label, quota in quotas.items()
        if achieved[label] > quota
    }
    return DownsampleResult(sub, achieved, overshoot)


def relabel(corpus: Corpus, mapping: Mapping[str, str]) -> Corpus:
    """Rename entity labels throughout a corpus (tags and label set)."""
    sentences = []
    for sent in corpus:
        tags = []
        for tag in sent.tags:
            prefix, label = _split_tag(tag)
            if label is not None and label in mapping:
                tags.append(f"{prefix}-{mapping[label]}")
            else:
                tags.append(tag)
        sentences.append(LabeledSentence(sent.tokens, tuple(tags)))
    label_set = tuple(
        dict.fromkeys(mapping.get(label, label) for label in corpus.label_set)
    )
    return Corpus.build(sentences, label_set=label_set)

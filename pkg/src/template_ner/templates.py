"""Statement templates and the label-to-word mapping.

A template is a token pattern with a candidate-span slot and, for the entity
variant, an entity-type slot. Filling splices token sequences verbatim into
the slots; no article agreement or other rewriting is applied, so the filled
text matches the training targets exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import TemplateError

NONE_LABEL = "<none>"
SPAN_SLOT = "{span}"
TYPE_SLOT = "{type}"


@dataclass(frozen=True)
class TemplateSpec:
    """A named pair of patterns: one for entity statements, one for the
    non-entity statement. Slots must appear as standalone tokens."""

    name: str
    entity_pattern: str
    none_pattern: str
    reference_dev_f1: float | None = None

    def __post_init__(self):
        ent = self.entity_tokens()
        non = self.none_tokens()
        if ent.count(SPAN_SLOT) != 1 or ent.count(TYPE_SLOT) != 1:
            raise TemplateError(
                f"entity pattern needs exactly one {SPAN_SLOT} and one {TYPE_SLOT}: "
                f"{self.entity_pattern!r}"
            )
        if non.count(SPAN_SLOT) != 1 or TYPE_SLOT in non:
            raise TemplateError(
                f"none pattern needs exactly one {SPAN_SLOT} and no {TYPE_SLOT}: "
                f"{self.none_pattern!r}"
            )

    def entity_tokens(self) -> tuple[str, ...]:
        return tuple(self.entity_pattern.split())

    def none_tokens(self) -> tuple[str, ...]:
        return tuple(self.none_pattern.split())


@dataclass(frozen=True)
class FilledTemplate:
    """A pattern realized for one (span, label) pair."""

    tokens: tuple[str, ...]
    span_text: tuple[str, ...]
    label: str


class LabelWordMap:
    """One-to-one mapping from entity labels to natural-language words.

    Words may be multi-token ("sports team"); filling splices the pieces.
    """

    def __init__(self, entries: Mapping[str, str]):
        entries = dict(entries)
        for label, word in entries.items():
            if label == NONE_LABEL:
                raise TemplateError(f"{NONE_LABEL} is reserved and cannot be mapped")
            if not word or not word.strip():
                raise TemplateError(f"empty label word for {label!r}")
        seen: dict[str, str] = {}
        for label, word in entries.items():
            if word in seen:
                raise TemplateError(
                    f"labels {seen[word]!r} and {label!r} both map to {word!r}"
                )
            seen[word] = label
        self._entries = entries

    def __contains__(self, label: str) -> bool:
        return label in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelWordMap) and self._entries == other._entries

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def word(self, label: str) -> str:
        try:
            return self._entries[label]
        except KeyError:
            raise TemplateError(f"no label word for {label!r}") from None

    def word_tokens(self, label: str) -> tuple[str, ...]:
        return tuple(self.word(label).split())

    def items(self):
        return self._entries.items()

    def merged(self, overrides: Mapping[str, str]) -> "LabelWordMap":
        return LabelWordMap({**self._entries, **overrides})


# Conventional words for the common newswire labels; anything else is
# derived by lowercasing and turning separators into spaces.
_KNOWN_LABEL_WORDS = {
    "LOC": "location",
    "PER": "person",
    "ORG": "organization",
    "MISC": "miscellaneous",
}


def default_label_words(label_set: Sequence[str]) -> LabelWordMap:
    entries = {}
    for label in label_set:
        word = _KNOWN_LABEL_WORDS.get(label)
        if word is None:
            word = re.sub(r"[_\-.]+", " ", label.lower()).strip()
        entries[label] = word
    return LabelWordMap(entries)


def fill(
    template: TemplateSpec,
    span_tokens: Sequence[str],
    label: str,
    words: LabelWordMap,
) -> FilledTemplate:
    """Fill a template with a candidate span and a label (or NONE_LABEL)."""
    span_tokens = tuple(span_tokens)
    if not span_tokens:
        raise TemplateError("candidate span must contain at least one token")
    if label == NONE_LABEL:
        pattern = template.none_tokens()
        substitutions = {SPAN_SLOT: span_tokens}
    else:
        pattern = template.entity_tokens()
        substitutions = {SPAN_SLOT: span_tokens, TYPE_SLOT: words.word_tokens(label)}
    out: list[str] = []
    for tok in pattern:
        out.extend(substitutions.get(tok, (tok,)))
    return FilledTemplate(tuple(out), span_tokens, label)


def match_filled(
    template: TemplateSpec,
    tokens: Sequence[str],
    words: LabelWordMap,
) -> FilledTemplate | None:
    """Inverse of fill: recover (span, label) from a filled token sequence.

    Entity patterns are tried label by label (in map order) before the none
    pattern; returns None when nothing matches.
    """
    tokens = tuple(tokens)
    for label in list(words.labels) + [NONE_LABEL]:
        if label == NONE_LABEL:
            pattern = template.none_tokens()
        else:
            pattern = list(template.entity_tokens())
            idx = pattern.index(TYPE_SLOT)
            pattern[idx : idx + 1] = words.word_tokens(label)
            pattern = tuple(pattern)
        slot = pattern.index(SPAN_SLOT)
        prefix, suffix = pattern[:slot], pattern[slot + 1 :]
        span_len = len(tokens) - len(prefix) - len(suffix)
        if span_len < 1:
            continue
        span = tokens[len(prefix) : len(prefix) + span_len]
        if tokens[: len(prefix)] == prefix and tokens[len(prefix) + span_len :] == suffix:
            return FilledTemplate(tokens, span, label)
    return None


def builtin_templates() -> tuple[TemplateSpec, ...]:
    """The four built-in template pairs, best-performing first.

    reference_dev_f1 records the newswire dev F1 each pair achieved in the
    full-scale reference experiments; the values are metadata, not targets.
    The fourth none pattern reads "should tagged as" by design; do not add
    the missing "be", golden fixtures depend on the exact wording.
    """
    return (
        TemplateSpec(
            "is-a-entity",
            "{span} is a {type} entity",
            "{span} is not a named entity",
            reference_dev_f1=95.27,
        ),
        TemplateSpec(
            "entity-type-of",
            "The entity type of {span} is {type}",
            "The entity type of {span} is none entity",
            reference_dev_f1=95.15,
        ),
        TemplateSpec(
            "belongs-to-category",
            "{span} belongs to {type} category",
            "{span} belongs to none category",
            reference_dev_f1=88.42,
        ),
        TemplateSpec(
            "should-be-tagged",
            "{span} should be tagged as {type}",
            "{span} should tagged as none entity",
            reference_dev_f1=76.80,
        ),
    )


def get_builtin_template(name: str) -> TemplateSpec:
    for spec in builtin_templates():
        if spec.name == name:
            return spec
    known = ", ".join(t.name for t in builtin_templates())
    raise TemplateError(f"unknown template {name!r} (built-ins: {known})")


def load_template_config(path) -> tuple[tuple[TemplateSpec, ...], dict[str, str]]:
    """Load custom templates and label-word overrides from a JSON file.

    Schema: {"templates": [{"name", "entity_pattern", "none_pattern"}, ...],
             "label_words": {"LABEL": "word", ...}}
    Both keys are optional.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise TemplateError(f"template config must be a JSON object: {path}")
    specs = []
    for entry in raw.get("templates", []):
        try:
            specs.append(
                TemplateSpec(
                    entry["name"], entry["entity_pattern"], entry["none_pattern"]
                )
            )
        except KeyError as exc:
            raise TemplateError(f"template entry missing field {exc}") from None
    overrides = raw.get("label_words", {})
    if not isinstance(overrides, dict):
        raise TemplateError("label_words must be an object of label: word pairs")
    return tuple(specs), dict(overrides)

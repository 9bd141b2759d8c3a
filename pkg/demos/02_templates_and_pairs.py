"""Templates, label words, and training-pair construction.

Every gold mention becomes a positive (sentence, filled template) pair;
non-entity spans become negatives at 1.5x the positive count.

Run with: python3 demos/02_templates_and_pairs.py
"""

from template_ner import (
    NONE_LABEL,
    build_training_pairs,
    builtin_templates,
    default_label_words,
    fill,
    parse_conll,
)

words = default_label_words(["LOC", "PER", "ORG", "MISC"])
print("label words:", dict(words.items()))

print("\nthe four built-in templates (reference dev F1 from the recorded")
print("full-scale sweep; template choice is a first-order factor):")
for spec in builtin_templates():
    print(f"  {spec.name:22s} {spec.entity_pattern!r:45s} ref {spec.reference_dev_f1}")

template = builtin_templates()[0]
print("\nfilling the best template:")
for span, label in ((("Bangkok",), "LOC"), (("in", "Bangkok"), "ORG"),
                    (("ACL",), NONE_LABEL)):
    filled = fill(template, span, label, words)
    print(f"  {label:8s} -> {' '.join(filled.tokens)}")

corpus = parse_conll(
    "ACL O\nwill O\nbe O\nheld O\nin O\nBangkok B-LOC\n\n"
    "Alice B-PER\nvisited O\nParis B-LOC\n"
)
result = build_training_pairs(corpus, template, default_label_words(corpus.label_set), seed=0)
print(f"\nbuilt {len(result)} pairs: {result.positive_count} positive, "
      f"{result.negative_count} negative (= round(1.5 x positives))")
for pair in list(result)[:6]:
    print(f"  [{pair.polarity:8s}] {' '.join(pair.source):32s} => {' '.join(pair.target)}")

"""Corpus handling: parsing CoNLL text, spans vs tags, statistics, sampling.

Run with: python3 demos/01_corpus_basics.py
"""

from template_ner import (
    bio_from_spans,
    corpus_stats,
    downsample_in_domain,
    format_stats,
    parse_conll,
    sample_few_shot,
    spans_from_bio,
    to_conll,
)

TEXT = """\
ACL O
will O
be O
held O
in O
Bangkok B-LOC

Alice B-PER
Smith I-PER
visited O
the O
Grand B-LOC
Palace I-LOC

Nothing O
here O
"""

corpus = parse_conll(TEXT)
print(f"parsed {len(corpus)} sentences, labels: {corpus.label_set}")

sentence = corpus.sentences[1]
print("\ntokens:", " ".join(sentence.tokens))
for span in sentence.entity_spans():
    print(f"  [{span.start}, {span.end}) {span.label}:",
          " ".join(sentence.tokens[span.start:span.end]))

# spans and tags are exact inverses
tags = list(sentence.tags)
assert bio_from_spans(spans_from_bio(tags), len(tags)) == tags
print("\nround trip tags -> spans -> tags holds")

print("\ncorpus statistics")
print(format_stats(corpus_stats(corpus)))

# few-shot sampling: about k mentions per type, all of them when rarer
few = sample_few_shot(corpus, k=1, seed=7)
print(f"\nk=1 few-shot sample keeps {len(few)} sentences:")
print(to_conll(few))

# quota-based downsampling reports what it achieved
result = downsample_in_domain(corpus, {"LOC": 1, "PER": 0}, seed=7)
print(f"downsample to LOC<=1, PER=0: achieved {result.achieved}, "
      f"overshoot {result.overshoot}")

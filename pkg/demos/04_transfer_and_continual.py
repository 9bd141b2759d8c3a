"""Transfer to a new label set, and what it costs the old domain.

Because labels enter the model as natural words in the target sentence
rather than as output-layer classes, fine-tuning on a new domain needs no
architecture change: new label words simply extend the shared vocabulary.
The same mechanism chains across domains (continual learning); decoding the
source domain afterwards shows how much was forgotten.

Run with: python3 demos/04_transfer_and_continual.py
"""

import copy

from template_ner import (
    DecodeConfig,
    TinySeq2Seq,
    TrainConfig,
    build_training_pairs,
    builtin_templates,
    decode_corpus,
    default_label_words,
    evaluate,
    fine_tune,
    fit,
    relabel,
)
from template_ner.synthetic import synthetic_corpus

template = builtin_templates()[0]


def f1(model, corpus, words):
    decoded = decode_corpus(model, [s.tokens for s in corpus], DecodeConfig(template, words))
    predicted = [[c.to_span() for c in sent] for sent in decoded]
    return evaluate(predicted, corpus.gold_spans()).f1


# source domain
src_train = synthetic_corpus(250, seed=21)
src_test = synthetic_corpus(40, seed=109)
src_words = default_label_words(src_train.label_set)
src_pairs = build_training_pairs(src_train, template, src_words, seed=1)
model = TinySeq2Seq.from_pairs(src_pairs.pairs, seed=1)
fit(model, src_pairs.pairs, TrainConfig(epochs=8, batch_size=8, learning_rate=2e-3, seed=1))
print(f"source domain {src_train.label_set}: F1 {f1(model, src_test, src_words):.3f}")

# target domain: same world, different label names, only 20 sentences
mapping = {"DEVICE": "MACHINE", "ANIMAL": "CREATURE"}
tgt_train = relabel(synthetic_corpus(20, seed=301), mapping)
tgt_test = relabel(synthetic_corpus(40, seed=404), mapping)
tgt_words = default_label_words(tgt_train.label_set)
tgt_pairs = build_training_pairs(tgt_train, template, tgt_words, seed=2)
budget = TrainConfig(epochs=20, batch_size=8, learning_rate=2e-3, warmup_steps=20, seed=2)

scratch = TinySeq2Seq.from_pairs(tgt_pairs.pairs, seed=2)
fit(scratch, tgt_pairs.pairs, budget)
print(f"target from scratch (20 sentences):   F1 {f1(scratch, tgt_test, tgt_words):.3f}")

tuned = copy.deepcopy(model)
added = tuned.extend_vocab(["machine", "creature"], seed=2)
fine_tune(tuned, tgt_pairs.pairs, budget)
print(f"target fine-tuned from source:        F1 {f1(tuned, tgt_test, tgt_words):.3f} "
      f"(vocab grew by {len(added)} words before tuning)")

# continual learning: how much did the source domain degrade?
print(f"source domain after target tuning:    F1 {f1(tuned, src_test, src_words):.3f}")

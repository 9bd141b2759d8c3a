"""Entity-level voting across models, and frequency-bucket evaluation.

Three scorers trained with different seeds each decode the test set; an
exact (span, label) prediction survives only with a strict majority of
votes. The evaluation then breaks F1 down by how often each entity type was
seen in training (high / mid / low frequency tertiles).

Run with: python3 demos/05_ensemble_and_buckets.py
"""

from template_ner import (
    DecodeConfig,
    TinySeq2Seq,
    TrainConfig,
    build_training_pairs,
    builtin_templates,
    decode_corpus,
    default_label_words,
    ensemble_decode,
    evaluate,
    evaluate_with_buckets,
    fit,
    format_report,
)
from template_ner.synthetic import synthetic_corpus

template = builtin_templates()[0]
train = synthetic_corpus(120, seed=31)
test = synthetic_corpus(30, seed=77)
words = default_label_words(train.label_set)
pairs = build_training_pairs(train, template, words, seed=3)
config = DecodeConfig(template, words)

per_model = []
for seed in (0, 1, 2):
    model = TinySeq2Seq.from_pairs(pairs.pairs, seed=seed)
    fit(model, pairs.pairs,
        TrainConfig(epochs=10, batch_size=8, learning_rate=2e-3, seed=seed))
    decoded = decode_corpus(model, [s.tokens for s in test], config)
    per_model.append(decoded)
    predicted = [[c.to_span() for c in sent] for sent in decoded]
    print(f"model seed {seed}: F1 {evaluate(predicted, test.gold_spans()).f1:.3f}")

ensembled = []
for sent_idx in range(len(test)):
    votes = [
        [(c.to_span(), c.score) for c in decoded[sent_idx]]
        for decoded in per_model
    ]
    ensembled.append(ensemble_decode(votes))
print(f"3-model vote:  F1 {evaluate(ensembled, test.gold_spans()).f1:.3f}")

report = evaluate_with_buckets(ensembled, test.gold_spans(), train)
print("\nwith per-type and frequency-bucket breakdown:")
print(format_report(report))

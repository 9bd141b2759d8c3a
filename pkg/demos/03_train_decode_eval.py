"""End to end on a synthetic language: pairs -> train -> decode -> evaluate.

Uses a reduced budget so the demo finishes in about a minute; the test
suite's acceptance run uses the full 500-sentence setup.

Run with: python3 demos/03_train_decode_eval.py
"""

import time

from template_ner import (
    DecodeConfig,
    TinySeq2Seq,
    TrainConfig,
    build_training_pairs,
    builtin_templates,
    decode_corpus,
    default_label_words,
    evaluate,
    fit,
    format_report,
)
from template_ner.synthetic import synthetic_corpus

train = synthetic_corpus(250, seed=21)
test = synthetic_corpus(50, seed=109)
template = builtin_templates()[0]
words = default_label_words(train.label_set)
print(f"train: {len(train)} sentences, test: {len(test)}, labels {train.label_set}")

pairs = build_training_pairs(train, template, words, seed=7)
print(f"pairs: {pairs.positive_count} positive + {pairs.negative_count} negative")

model = TinySeq2Seq.from_pairs(pairs.pairs, seed=0)
config = TrainConfig(epochs=8, batch_size=8, learning_rate=2e-3, seed=0)
started = time.perf_counter()
stats = fit(model, pairs.pairs, config)
print(f"trained {config.epochs} epochs in {time.perf_counter() - started:.0f}s; "
      f"loss {stats.epoch_losses[0]:.3f} -> {stats.final_loss:.3f}")

decode_config = DecodeConfig(template, words)
decoded = decode_corpus(model, [s.tokens for s in test], decode_config, workers=2)

print("\nsample decisions (score = summed log-probability of the template):")
for sent, cands in list(zip(test, decoded))[:4]:
    print(" ", " ".join(sent.tokens))
    for c in cands:
        print(f"    [{c.start},{c.end}) {c.label:8s} score {c.score:8.3f}")

predicted = [[c.to_span() for c in sent] for sent in decoded]
print("\n" + format_report(evaluate(predicted, test.gold_spans())))

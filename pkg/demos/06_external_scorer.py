"""Scoring through the wire protocol instead of in process.

The engine only ever needs per-token log-probabilities of a target given a
source, so any generative scorer reachable over the line protocol can stand
in for the built-in model: the sidecar in adapter/ wraps either an exported
checkpoint (loopback, shown here) or a pretrained subword seq2seq model.

Run with: python3 demos/06_external_scorer.py
(requires the adapter package: pip install -e ./adapter)
"""

import shlex
import subprocess
import sys
import tempfile
from pathlib import Path

from template_ner import (
    ExternalScorer,
    TinySeq2Seq,
    TrainConfig,
    build_training_pairs,
    builtin_templates,
    default_label_words,
    fit,
)
from template_ner.synthetic import synthetic_corpus

if subprocess.run([sys.executable, "-c", "import scorer_adapter"],
                  capture_output=True).returncode != 0:
    sys.exit("scorer_adapter is not installed; run: pip install -e ./adapter")

train = synthetic_corpus(60, seed=5)
template = builtin_templates()[0]
words = default_label_words(train.label_set)
pairs = build_training_pairs(train, template, words, seed=5)
model = TinySeq2Seq.from_pairs(pairs.pairs, embed_dim=24, hidden_dim=32, seed=5)
fit(model, pairs.pairs, TrainConfig(epochs=3, batch_size=8, learning_rate=2e-3, seed=5))

with tempfile.TemporaryDirectory() as tmp:
    ckpt = Path(tmp) / "demo.ckpt"
    model.save(ckpt)
    endpoint = (f"{shlex.quote(sys.executable)} -m scorer_adapter "
                f"--checkpoint {shlex.quote(str(ckpt))}")
    print(f"endpoint: {endpoint}\n")

    source = train.sentences[0].tokens
    targets = [
        list(train.sentences[0].tokens[:2]) + ["is", "not", "a", "named", "entity"],
        ["install", "is", "a", "device", "entity"],
    ]
    with ExternalScorer(endpoint, timeout=30) as scorer:
        for target in targets:
            remote = scorer.score_target(source, target)
            local = model.score_target(source, target)
            drift = max(
                abs(a - b)
                for a, b in zip(remote.token_logprobs, local.token_logprobs)
            )
            print(f"target: {' '.join(target)}")
            print(f"  remote total {remote.total:.6f}, local total "
                  f"{local.total:.6f}, max per-token drift {drift:.1e}")
print("\nloopback scoring matches the in-process model.")

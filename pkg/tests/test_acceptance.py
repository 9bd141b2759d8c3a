"""Acceptance suite: one test per release criterion.

Each test prints a PASS line (visible with `pytest -s`) after its assertions
hold, including the measured runtime where the criterion bounds one. The
expensive synthetic end-to-end model is built once per session and shared by
the end-to-end, transfer, and determinism criteria.
"""

import copy
import itertools
import math
import os
import random
import time
from dataclasses import dataclass

import numpy as np
import pytest

from template_ner.corpus import (
    Corpus,
    EntitySpan,
    LabeledSentence,
    bio_from_spans,
    corpus_stats,
    read_conll,
    spans_from_bio,
)
from template_ner.decoder import (
    DecodeConfig,
    ScoredCandidate,
    decode_corpus,
    ensemble_decode,
    enumerate_spans,
    resolve_overlaps,
)
from template_ner.evaluation import evaluate
from template_ner.pairs import TrainingPair, build_training_pairs, round_half_up
from template_ner.scorer import (
    EOS,
    TinySeq2Seq,
    TrainConfig,
    fine_tune,
    fit,
    loss,
)
from template_ner.synthetic import synthetic_corpus
from template_ner.templates import builtin_templates, default_label_words
from tests.test_corpus import random_bio


def report(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE PASS: {name}{suffix}")


# -- shared end-to-end fixture ---------------------------------------------------

E2E_TEMPLATE = builtin_templates()[0]
E2E_CONFIG = TrainConfig(epochs=8, batch_size=8, learning_rate=2e-3, seed=1)


@dataclass
class E2ESetup:
    train: Corpus
    test: Corpus
    words: object
    model: TinySeq2Seq
    decode_config: DecodeConfig
    build_seconds: float


@pytest.fixture(scope="session")
def e2e(tmp_path_factory) -> E2ESetup:
    started = time.perf_counter()
    train = synthetic_corpus(500, seed=21)
    test = synthetic_corpus(100, seed=109)
    words = default_label_words(train.label_set)
    pairs = build_training_pairs(train, E2E_TEMPLATE, words, seed=1)
    model = TinySeq2Seq.from_pairs(pairs.pairs, seed=1)
    fit(model, pairs.pairs, E2E_CONFIG)
    return E2ESetup(
        train, test, words, model,
        DecodeConfig(E2E_TEMPLATE, words),
        time.perf_counter() - started,
    )


class TestBioRoundTrip:
    def test_ten_thousand_random_sequences(self):
        started = time.perf_counter()
        rng = random.Random(20240)
        for _ in range(10_000):
            tags = random_bio(rng, max_len=40, n_labels=6)
            spans = spans_from_bio(tags)
            assert bio_from_spans(spans, len(tags)) == list(tags)
            assert spans_from_bio(bio_from_spans(spans, len(tags))) == spans
        elapsed = time.perf_counter() - started
        assert elapsed < 5.0
        report("BIO round-trip, 10k sequences", f"{elapsed:.2f}s")


class TestEnumerationCounts:
    def test_closed_form_all_lengths(self):
        started = time.perf_counter()
        for n in range(1, 65):
            expected = sum(n - l + 1 for l in range(1, min(8, n) + 1))
            assert len(enumerate_spans(n, 8)) == expected
        assert len(enumerate_spans(10, 8)) == 52
        elapsed = time.perf_counter() - started
        assert elapsed < 1.0
        report("span enumeration matches closed form for n=1..64", f"{elapsed:.2f}s")


class TestNegativeRatio:
    def test_exact_for_all_positive_counts(self):
        words = default_label_words(["PER"])
        for positives in range(1, 201):
            sentences = [
                LabeledSentence(
                    tuple(f"w{j}" for j in range(9)) + (f"name{i}",),
                    ("O",) * 9 + ("B-PER",),
                )
                for i in range(positives)
            ]
            corpus = Corpus.build(sentences)
            result = build_training_pairs(
                corpus, E2E_TEMPLATE, words, neg_ratio=1.5, seed=positives
            )
            assert result.positive_count == positives
            assert result.negative_count == round_half_up(1.5 * positives)
            assert result.negative_count == (3 * positives + 1) // 2
        report("negative count == round(1.5 x positives) for P=1..200")


class TestGradientCheck:
    def test_finite_differences_all_groups(self):
        started = time.perf_counter()
        pairs = [
            TrainingPair(("the", "cat", "sat"), ("cat", "sat"), "positive"),
            TrainingPair(("dog", "ran"), ("dog", "ran", "far"), "negative"),
            TrainingPair(("mat", "on", "sat"), ("mat",), "positive"),
        ]
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=5, hidden_dim=7, seed=3)
        encoded = [
            (model.vocab.encode(p.source), model.vocab.encode(list(p.target) + [EOS]))
            for p in pairs
        ]
        tokens = sum(len(t) for _, t in encoded)
        grads = None
        for src, tgt in encoded:
            _, g = model._pair_nll_and_grads(src, tgt)
            grads = g if grads is None else {k: grads[k] + g[k] for k in grads}
        grads = {k: v / tokens for k, v in grads.items()}

        def objective():
            model._invalidate_cache()
            return loss(model, pairs)

        rng = np.random.default_rng(7)
        eps = 1e-5
        checked = 0
        for name, arr in model.params.items():
            for _ in range(3):
                idx = tuple(rng.integers(0, s) for s in arr.shape)
                orig = arr[idx]
                arr[idx] = orig + eps
                up = objective()
                arr[idx] = orig - eps
                down = objective()
                arr[idx] = orig
                numeric = (up - down) / (2 * eps)
                analytic = grads[name][idx]
                rel = abs(numeric - analytic) / max(abs(numeric) + abs(analytic), 1e-6)
                assert rel < 1e-4, f"{name}{idx}: rel={rel}"
                checked += 1
        model._invalidate_cache()
        elapsed = time.perf_counter() - started
        assert checked >= 50
        assert elapsed < 30.0
        report(
            "analytic gradients match central differences",
            f"{checked} coordinates across {len(model.params)} groups, {elapsed:.2f}s",
        )


class TestOverlapResolutionOracle:
    def test_thousand_random_candidate_sets(self):
        rng = random.Random(512)
        words = default_label_words(["LOC", "ORG", "PER"])
        pairwise_cases = 0
        for case in range(1000):
            n_spans = rng.randint(2, 10)
            sentence_len = rng.randint(4, 14)
            cands = []
            for _ in range(n_spans):
                start = rng.randrange(sentence_len - 1)
                end = rng.randint(start + 1, min(start + 5, sentence_len))
                label = rng.choice(("LOC", "ORG", "PER"))
                score = round(rng.uniform(-12.0, 0.0), 6)
                cands.append(ScoredCandidate(start, end, label, score, {label: score}))
            kept = resolve_overlaps(cands, words)
            for a, b in itertools.combinations(kept, 2):
                assert not a.overlaps(b)
            kept_ids = {id(c) for c in kept}
            for cand in cands:
                if id(cand) in kept_ids:
                    continue
                blockers = [k for k in kept if k.overlaps(cand)]
                assert blockers
                assert max(k.score for k in blockers) >= cand.score
            # pairwise higher-score rule on every overlapping 2-candidate case
            a, b = cands[0], cands[1]
            if a.overlaps(b) and a.score != b.score:
                pairwise_cases += 1
                two = resolve_overlaps([a, b], words)
                assert len(two) == 1
                assert two[0].score == max(a.score, b.score)
        assert pairwise_cases > 100
        report(
            "overlap resolution oracle, 1000 random candidate sets",
            f"{pairwise_cases} pairwise sub-cases",
        )


class TestEndToEndSynthetic:
    def test_f1_on_held_out(self, e2e):
        started = time.perf_counter()
        decoded = decode_corpus(
            e2e.model, [s.tokens for s in e2e.test], e2e.decode_config
        )
        predicted = [[c.to_span() for c in sent] for sent in decoded]
        result = evaluate(predicted, e2e.test.gold_spans())
        elapsed = e2e.build_seconds + (time.perf_counter() - started)
        assert result.f1 >= 0.90
        assert elapsed < 300.0
        report(
            "synthetic end-to-end micro F1 >= 0.90",
            f"F1={result.f1:.4f} P={result.precision:.4f} R={result.recall:.4f}, "
            f"{elapsed:.0f}s incl. training",
        )

    def test_decode_deterministic(self, e2e):
        subset = [s.tokens for s in e2e.test.sentences[:15]]
        first = decode_corpus(e2e.model, subset, e2e.decode_config)
        second = decode_corpus(e2e.model, subset, e2e.decode_config, workers=3)
        assert first == second
        report("end-to-end decode deterministic and worker-invariant")


class TestTransferProperty:
    def test_finetune_beats_scratch_on_average(self, e2e):
        started = time.perf_counter()
        target_labels = ("MACHINE", "CREATURE")
        target_test = synthetic_corpus(80, seed=404, labels=target_labels)
        target_words = default_label_words(sorted(target_labels))
        decode_config = DecodeConfig(E2E_TEMPLATE, target_words)

        def f1_of(model):
            decoded = decode_corpus(
                model, [s.tokens for s in target_test], decode_config
            )
            predicted = [[c.to_span() for c in sent] for sent in decoded]
            return evaluate(predicted, target_test.gold_spans()).f1

        scratch_scores, tuned_scores = [], []
        for seed in (0, 1, 2):
            target_train = synthetic_corpus(20, seed=300 + seed, labels=target_labels)
            target_pairs = build_training_pairs(
                target_train, E2E_TEMPLATE, target_words, seed=seed
            )
            budget = TrainConfig(
                epochs=20, batch_size=8, learning_rate=2e-3, warmup_steps=20, seed=seed
            )
            scratch = TinySeq2Seq.from_pairs(target_pairs.pairs, seed=seed)
            fit(scratch, target_pairs.pairs, budget)
            scratch_scores.append(f1_of(scratch))

            tuned = copy.deepcopy(e2e.model)
            fine_tune(tuned, target_pairs.pairs, budget)
            tuned_scores.append(f1_of(tuned))

        mean_scratch = sum(scratch_scores) / len(scratch_scores)
        mean_tuned = sum(tuned_scores) / len(tuned_scores)
        elapsed = e2e.build_seconds + (time.perf_counter() - started)
        assert mean_tuned >= mean_scratch
        assert elapsed < 600.0
        report(
            "transfer beats from-scratch on 20-sentence target domain",
            f"finetuned={mean_tuned:.4f} scratch={mean_scratch:.4f} "
            f"over 3 seeds, {elapsed:.0f}s incl. source training",
        )


class TestTemplateSweep:
    def test_four_templates_produce_report(self):
        train = synthetic_corpus(200, seed=33)
        test = synthetic_corpus(50, seed=44)
        words = default_label_words(train.label_set)
        rows = []
        for template in builtin_templates():
            pairs = build_training_pairs(train, template, words, seed=2)
            model = TinySeq2Seq.from_pairs(pairs.pairs, seed=2)
            fit(model, pairs.pairs,
                TrainConfig(epochs=6, batch_size=8, learning_rate=2e-3, seed=2))
            decoded = decode_corpus(
                model, [s.tokens for s in test], DecodeConfig(template, words)
            )
            predicted = [[c.to_span() for c in sent] for sent in decoded]
            rows.append((template, evaluate(predicted, test.gold_spans()).f1))

        assert len(rows) == 4
        header = (
            f"{'Entity Template':40s} {'None-Entity Template':42s} "
            f"{'F1':>7s} {'Ref Dev F1':>11s}"
        )
        lines = [header]
        for template, f1 in rows:
            assert 0.0 <= f1 <= 1.0
            lines.append(
                f"{template.entity_pattern:40s} {template.none_pattern:42s} "
                f"{f1:7.4f} {template.reference_dev_f1:11.2f}"
            )
        table = "\n".join(lines)
        assert [t.reference_dev_f1 for t, _ in rows] == [95.27, 95.15, 88.42, 76.80]
        print("\n" + table)
        report(
            "template sweep over the four built-ins",
            "synthetic F1s: " + ", ".join(f"{f1:.3f}" for _, f1 in rows),
        )


class TestEnsembleVoting:
    def test_strict_majority_fixtures(self):
        a = EntitySpan(0, 1, "LOC")
        b = EntitySpan(2, 4, "ORG")
        c = EntitySpan(5, 6, "PER")
        outputs = [
            [(a, -1.0), (b, -2.0)],
            [(a, -1.2), (c, -0.5)],
            [(b, -2.2)],
        ]
        kept = ensemble_decode(outputs)
        # a and b have 2/3 votes, c only 1/3
        assert kept == [a, b]

        assert ensemble_decode([[(a, -1.0), (c, -3.0)]]) == [a, c]
        report("entity-level majority voting keeps exactly strict-majority entities")


CONLL03_DIR = os.environ.get("TEMPLATE_NER_CONLL03_DIR", "data/conll03")


class TestConll03Stats:
    @pytest.mark.skipif(
        not (os.path.exists(os.path.join(CONLL03_DIR, "train.conll"))
             and os.path.exists(os.path.join(CONLL03_DIR, "test.conll"))),
        reason="CoNLL03 data not present",
    )
    def test_dataset_magnitudes(self):
        train = read_conll(os.path.join(CONLL03_DIR, "train.conll"))
        test = read_conll(os.path.join(CONLL03_DIR, "test.conll"))
        train_stats = corpus_stats(train)
        test_stats = corpus_stats(test)
        assert train_stats.entity_type_count == 4
        assert round(train_stats.sentence_count / 1000, 1) == pytest.approx(12.7, abs=2.0)
        assert round(test_stats.sentence_count / 1000, 1) == pytest.approx(3.2, abs=0.6)
        report("CoNLL03 statistics match recorded magnitudes")

import math
import random

import numpy as np
import pytest

from template_ner.errors import ScorerError
from template_ner.pairs import TrainingPair
from template_ner.scorer import (
    EOS,
    REFERENCE_OPTIMIZER_SETTINGS,
    TargetScore,
    TinySeq2Seq,
    TrainConfig,
    Vocab,
    fine_tune,
    fit,
    loss,
)

TOKENS = ["the", "cat", "sat", "on", "mat", "dog", "ran", "far"]


def small_model(seed=3, embed_dim=5, hidden_dim=7):
    vocab = Vocab.build([TOKENS])
    return TinySeq2Seq(vocab, embed_dim=embed_dim, hidden_dim=hidden_dim, seed=seed)


# -- independent forward-pass oracle ------------------------------------------
# Pure-Python reimplementation of the forward pass using lists and math.exp
# only. Kept deliberately separate from the numpy code path it checks.


def oracle_score(model, source, target):
    p = {k: v.tolist() for k, v in model.params.items()}
    dh = model.hidden_dim

    def matvec(vec, mat):
        cols = len(mat[0])
        return [sum(vec[i] * mat[i][j] for i in range(len(vec))) for j in range(cols)]

    def add(*vecs):
        return [sum(vals) for vals in zip(*vecs)]

    def sigmoid(v):
        return [1.0 / (1.0 + math.exp(-x)) for x in v]

    def tanh(v):
        return [math.tanh(x) for x in v]

    def mul(a, b):
        return [x * y for x, y in zip(a, b)]

    def gru(side, x, h):
        z = sigmoid(add(matvec(x, p[f"{side}_Wz"]), matvec(h, p[f"{side}_Uz"]), p[f"{side}_bz"]))
        r = sigmoid(add(matvec(x, p[f"{side}_Wr"]), matvec(h, p[f"{side}_Ur"]), p[f"{side}_br"]))
        hb = tanh(add(matvec(x, p[f"{side}_Wh"]), matvec(mul(r, h), p[f"{side}_Uh"]), p[f"{side}_bh"]))
        return [(1.0 - zi) * hi + zi * hbi for zi, hi, hbi in zip(z, h, hb)]

    src_ids = model.vocab.encode(source)
    tgt_ids = model.vocab.encode(target)
    h = [0.0] * dh
    states = []
    for tok in src_ids:
        h = gru("enc", p["emb"][tok], h)
        states.append(h)
    keys = [matvec(s, p["att_Wk"]) for s in states]

    d = states[-1]
    prev = model.vocab.bos_id
    out = []
    for y in tgt_ids:
        d = gru("dec", p["emb"][prev], d)
        q = matvec(d, p["att_Wq"])
        energy = [sum(k[i] * q[i] for i in range(dh)) / math.sqrt(dh) for k in keys]
        m = max(energy)
        weights = [math.exp(e - m) for e in energy]
        total = sum(weights)
        alpha = [w / total for w in weights]
        ctx = [sum(alpha[t] * states[t][i] for t in range(len(states))) for i in range(dh)]
        g = tanh(add(matvec(d + ctx, p["comb_W"]), p["comb_b"]))
        logits = add(matvec(g, p["out_W"]), p["out_b"])
        mx = max(logits)
        logz = mx + math.log(sum(math.exp(v - mx) for v in logits))
        out.append(logits[y] - logz)
        prev = y
    return out


class TestScoreTarget:
    def test_uniform_when_output_layer_zero(self):
        model = small_model()
        model.params["out_W"][:] = 0.0
        model.params["out_b"][:] = 0.0
        vocab_size = len(model.vocab)
        score = model.score_target(["the", "cat"], ["sat", "on", "mat"])
        assert len(score.token_logprobs) == 3
        for lp in score.token_logprobs:
            assert lp == pytest.approx(math.log(1.0 / vocab_size), abs=1e-12)
        assert score.total == pytest.approx(3 * math.log(1.0 / vocab_size), abs=1e-12)

    def test_empty_target_scores_zero(self):
        model = small_model()
        score = model.score_target(["the"], [])
        assert score.token_logprobs == [] and score.total == 0.0

    def test_matches_forward_oracle(self):
        model = small_model(seed=17)
        cases = [
            (["the", "cat", "sat"], ["dog", "ran"]),
            (["mat"], ["the", "cat", "sat", "on"]),
            (["dog", "ran", "far", "far"], ["far"]),
        ]
        for source, target in cases:
            got = model.score_target(source, target)
            want = oracle_score(model, source, target)
            assert got.token_logprobs == pytest.approx(want, abs=1e-9)

    def test_unknown_tokens_map_to_unk(self):
        model = small_model()
        a = model.score_target(["the", "zzz"], ["cat", "qqq"])
        b = model.score_target(["the", "<unk>"], ["cat", "<unk>"])
        assert a.token_logprobs == b.token_logprobs

    def test_total_is_plain_sum(self):
        model = small_model(seed=4)
        score = model.score_target(TOKENS[:4], TOKENS[2:7])
        assert score.total == sum(score.token_logprobs)

    def test_per_token_values_nonpositive(self):
        model = small_model(seed=9)
        score = model.score_target(TOKENS, TOKENS[::-1])
        assert all(lp <= 0.0 for lp in score.token_logprobs)

    def test_empty_source_rejected(self):
        with pytest.raises(ScorerError):
            small_model().score_target([], ["cat"])

    def test_batch_matches_single_calls(self):
        model = small_model(seed=6)
        targets = [["cat"], ["cat", "sat"], [], ["dog", "ran", "far"]]
        batched = model.score_targets(["the", "mat"], targets)
        for target, got in zip(targets, batched):
            single = model.score_target(["the", "mat"], target)
            assert got.token_logprobs == pytest.approx(single.token_logprobs, abs=1e-9)

    def test_distributions_normalized(self):
        model = small_model(seed=2)
        dist = model.token_distributions(["the", "cat"], ["sat", "mat", "dog"])
        sums = dist.sum(axis=1)
        assert np.all(np.abs(sums - 1.0) < 1e-9)

    def test_teacher_forcing_prefix_invariance(self):
        model = small_model(seed=5)
        source = ["the", "cat", "sat"]
        base = model.score_target(source, ["dog", "ran", "far", "mat"])
        perturbed = model.score_target(source, ["dog", "ran", "the", "mat"])
        # positions before the perturbation are bitwise identical
        assert base.token_logprobs[:2] == perturbed.token_logprobs[:2]
        assert base.token_logprobs[2:] != perturbed.token_logprobs[2:]

    def test_concurrent_scoring_deterministic(self):
        from concurrent.futures import ThreadPoolExecutor

        model = small_model(seed=8)
        jobs = [(TOKENS[i % 5 :], TOKENS[: 2 + i % 4]) for i in range(24)]
        expected = [model.score_target(s, t).total for s, t in jobs]
        with ThreadPoolExecutor(max_workers=6) as pool:
            got = list(pool.map(lambda job: model.score_target(*job).total, jobs))
        assert got == expected


def tiny_pairs():
    return [
        TrainingPair(("the", "cat", "sat"), ("cat", "sat"), "positive"),
        TrainingPair(("dog", "ran"), ("dog", "ran", "far"), "negative"),
        TrainingPair(("mat", "on"), ("mat",), "positive"),
    ]


class TestLoss:
    def test_single_pair_equals_negated_score(self):
        model = small_model(seed=11)
        pair = tiny_pairs()[0]
        value = loss(model, [pair], normalization="sum", append_eos=False)
        score = model.score_target(pair.source, pair.target)
        assert value == -score.total

    def test_eos_appended_by_default(self):
        model = small_model(seed=11)
        pair = tiny_pairs()[0]
        value = loss(model, [pair], normalization="sum")
        score = model.score_target(pair.source, list(pair.target) + [EOS])
        assert value == pytest.approx(-score.total, abs=1e-12)

    def test_duplicated_batch_same_mean(self):
        model = small_model(seed=12)
        batch = tiny_pairs()
        once = loss(model, batch)
        twice = loss(model, batch + batch)
        assert twice == pytest.approx(once, abs=1e-12)

    def test_nonnegative(self):
        model = small_model(seed=13)
        assert loss(model, tiny_pairs()) >= 0.0

    def test_matches_oracle(self):
        model = small_model(seed=14)
        batch = tiny_pairs()
        total = 0.0
        tokens = 0
        for pair in batch:
            target = list(pair.target) + [EOS]
            total -= sum(oracle_score(model, pair.source, target))
            tokens += len(target)
        assert loss(model, batch) == pytest.approx(total / tokens, abs=1e-9)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            loss(small_model(), [])


class TestGradients:
    def test_gradcheck_all_parameter_groups(self):
        # Central finite differences; relative error < 1e-4 per sampled
        # coordinate. The acceptance suite repeats this with >= 50 samples.
        model = small_model(seed=3)
        batch = tiny_pairs()
        encoded = [
            (model.vocab.encode(p.source), model.vocab.encode(list(p.target) + [EOS]))
            for p in batch
        ]
        total_tokens = sum(len(t) for _, t in encoded)
        grads = None
        for src, tgt in encoded:
            _, g = model._pair_nll_and_grads(src, tgt)
            grads = g if grads is None else {k: grads[k] + g[k] for k in grads}
        grads = {k: v / total_tokens for k, v in grads.items()}

        def batch_loss():
            model._invalidate_cache()
            return loss(model, batch)

        rng = np.random.default_rng(0)
        eps = 1e-5
        for name, arr in model.params.items():
            for _ in range(3):
                idx = tuple(rng.integers(0, s) for s in arr.shape)
                orig = arr[idx]
                arr[idx] = orig + eps
                up = batch_loss()
                arr[idx] = orig - eps
                down = batch_loss()
                arr[idx] = orig
                numeric = (up - down) / (2 * eps)
                analytic = grads[name][idx]
                rel = abs(numeric - analytic) / max(abs(numeric) + abs(analytic), 1e-6)
                assert rel < 1e-4, f"{name}{idx}: numeric={numeric} analytic={analytic}"
        model._invalidate_cache()


def memorizable_pairs(n=50, seed=0):
    """Copy task over unique sources: target equals source, so the set is
    memorizable to arbitrarily low loss."""
    rng = random.Random(seed)
    vocab = [f"v{i}" for i in range(12)]
    sources = set()
    while len(sources) < n:
        sources.add(tuple(rng.choice(vocab) for _ in range(rng.randint(2, 5))))
    return [TrainingPair(src, src, "positive") for src in sorted(sources)]


class TestFit:
    def test_zero_epochs_identity(self):
        pairs = tiny_pairs()
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=5, seed=1)
        before = {k: v.copy() for k, v in model.params.items()}
        stats = fit(model, pairs, TrainConfig(epochs=0))
        assert stats.epoch_losses == [] and stats.final_loss is None
        for name, arr in model.params.items():
            assert np.array_equal(arr, before[name])

    def test_same_seed_bitwise_identical(self):
        pairs = memorizable_pairs(12, seed=5)
        runs = []
        for _ in range(2):
            model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=6, seed=7)
            fit(model, pairs, TrainConfig(epochs=3, batch_size=4, seed=7, warmup_steps=4))
            runs.append({k: v.copy() for k, v in model.params.items()})
        for name in runs[0]:
            assert np.array_equal(runs[0][name], runs[1][name]), name

    def test_memorization_loss_drop_and_monotonicity(self):
        pairs = memorizable_pairs(50, seed=1)
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=16, hidden_dim=32, seed=2)
        config = TrainConfig(epochs=200, batch_size=8, learning_rate=2.5e-3,
                             warmup_steps=20, seed=2)
        stats = fit(model, pairs, config)
        assert stats.final_loss < 0.1 * stats.epoch_losses[0]
        # non-increasing epoch means after warmup, 5% transient violations allowed
        steps_per_epoch = math.ceil(len(pairs) / config.batch_size)
        first_settled = max(1, math.ceil(config.warmup_steps / steps_per_epoch))
        settled = stats.epoch_losses[first_settled:]
        violations = sum(
            1 for a, b in zip(settled, settled[1:]) if b > a + 1e-12
        )
        assert violations <= 0.05 * (len(settled) - 1)

    def test_divergence_detected(self):
        pairs = tiny_pairs()
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=5, seed=1)
        model.params["out_b"][:] = np.nan
        with pytest.raises(ScorerError):
            fit(model, pairs, TrainConfig(epochs=1))

    def test_warmup_schedule_linear(self):
        from template_ner.scorer import _Adam

        config = TrainConfig(learning_rate=1e-2, warmup_steps=4)
        adam = _Adam({}, config)
        assert [adam.lr_at(s) for s in (1, 2, 4, 5, 100)] == [
            pytest.approx(2.5e-3),
            pytest.approx(5e-3),
            pytest.approx(1e-2),
            pytest.approx(1e-2),
            pytest.approx(1e-2),
        ]


class TestFineTune:
    def test_zero_epochs_identity(self):
        pairs = tiny_pairs()
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=5, seed=1)
        before = {k: v.copy() for k, v in model.params.items()}
        fine_tune(model, pairs, TrainConfig(epochs=0))
        for name, arr in model.params.items():
            assert np.array_equal(arr, before[name])

    def test_known_tokens_cause_no_resize(self):
        pairs = tiny_pairs()
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=5, seed=1)
        size = len(model.vocab)
        fine_tune(model, pairs, TrainConfig(epochs=1, warmup_steps=1))
        assert len(model.vocab) == size

    def test_new_tokens_extend_shared_vocab(self):
        pairs = tiny_pairs()
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=5, seed=1)
        size = len(model.vocab)
        new = [TrainingPair(("brand", "new"), ("brand", "word"), "positive")]
        fine_tune(model, new, TrainConfig(epochs=1, warmup_steps=1))
        assert len(model.vocab) == size + 3
        assert model.params["emb"].shape[0] == size + 3
        assert model.params["out_W"].shape[1] == size + 3

    def test_extension_preserves_old_scores_before_training(self):
        pairs = tiny_pairs()
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=5, seed=1)
        before = model.score_target(("the", "cat"), ("sat",))
        model.extend_vocab(["unseen1", "unseen2"], seed=0)
        after = model.score_target(("the", "cat"), ("sat",))
        # same logits for old tokens, but softmax runs over a larger vocab
        assert after.total <= before.total
        assert len(after.token_logprobs) == 1


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        pairs = memorizable_pairs(8, seed=3)
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=6, seed=9)
        fit(model, pairs, TrainConfig(epochs=2, batch_size=4, seed=9, warmup_steps=2))
        path = tmp_path / "model.ckpt"
        model.save(path)
        loaded = TinySeq2Seq.load(path)
        assert loaded.vocab.tokens == model.vocab.tokens
        assert loaded.embed_dim == model.embed_dim
        assert loaded.hidden_dim == model.hidden_dim
        for name, arr in model.params.items():
            assert np.array_equal(loaded.params[name], arr)
        # byte-identical re-save
        loaded.save(tmp_path / "again.ckpt")
        assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()

    def test_loaded_model_scores_identically(self, tmp_path):
        pairs = memorizable_pairs(8, seed=3)
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=4, hidden_dim=6, seed=9)
        path = tmp_path / "model.ckpt"
        model.save(path)
        loaded = TinySeq2Seq.load(path)
        src, tgt = pairs[0].source, pairs[0].target
        assert loaded.score_target(src, tgt).token_logprobs == model.score_target(src, tgt).token_logprobs

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"\x00\x01\x02not json\n1234")
        with pytest.raises(ScorerError):
            TinySeq2Seq.load(path)

    def test_truncated_rejected(self, tmp_path):
        pairs = memorizable_pairs(4, seed=1)
        model = TinySeq2Seq.from_pairs(pairs, embed_dim=3, hidden_dim=4, seed=0)
        path = tmp_path / "model.ckpt"
        model.save(path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 16])
        with pytest.raises(ScorerError):
            TinySeq2Seq.load(path)


class TestVocab:
    def test_sorted_and_reserved_first(self):
        vocab = Vocab.build([["b", "a"], ["c", "a"]])
        assert vocab.tokens[:4] == ("<pad>", "<unk>", "<s>", "</s>")
        assert vocab.tokens[4:] == ("a", "b", "c")

    def test_reference_settings_recorded(self):
        assert REFERENCE_OPTIMIZER_SETTINGS["bart"]["learning_rate"] == 2e-5
        assert REFERENCE_OPTIMIZER_SETTINGS["bart"]["batch_size"] == 64
        assert REFERENCE_OPTIMIZER_SETTINGS["bert"]["learning_rate"] == 1e-5
        assert REFERENCE_OPTIMIZER_SETTINGS["bert"]["batch_size"] == 32
        assert REFERENCE_OPTIMIZER_SETTINGS["bert"]["lr_decay_per_iteration"] == 0.05

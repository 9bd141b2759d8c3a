"""Generative scoring of target sequences given a source sentence.

The scoring contract: per-token conditional log-probabilities of a target
token sequence under teacher forcing, whose sum is the template score used
for ranking. The built-in realization is a small GRU encoder-decoder with
scaled dot-product attention, written in float64 numpy with hand-derived
gradients so training is exactly checkable against finite differences.

Targets are scored exactly as given. The training loop and the decoder both
append the end-of-sequence token to template realizations before scoring, so
scores stay comparable across templates of different lengths; `score_target`
itself never mutates its input.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ScorerError
from .pairs import TrainingPair

PAD = "<pad>"
UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"
RESERVED = (PAD, UNK, BOS, EOS)

CHECKPOINT_MAGIC = "tiny-seq2seq"
CHECKPOINT_VERSION = 1

# Optimizer settings used by the full-scale reference pipeline (pre-trained
# seq2seq backbone via the external-scorer path). Recorded for provenance;
# the desk-scale defaults in TrainConfig are tuned for the built-in model.
REFERENCE_OPTIMIZER_SETTINGS = {
    "bart": {"learning_rate": 2e-5, "batch_size": 64, "schedule": "linear warmup"},
    "bert": {"learning_rate": 1e-5, "batch_size": 32, "lr_decay_per_iteration": 0.05},
}


class Vocab:
    """Token <-> id table with reserved pad/unk/bos/eos entries."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[: len(RESERVED)] != RESERVED:
            raise ValueError(f"vocab must start with the reserved tokens {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocab contains duplicate tokens")
        self._tokens = tokens
        self._index = {tok: i for i, tok in enumerate(tokens)}

    @classmethod
    def build(cls, token_sequences: Iterable[Sequence[str]]) -> "Vocab":
        seen = set()
        for seq in token_sequences:
            seen.update(seq)
        ordinary = sorted(seen - set(RESERVED))
        return cls(RESERVED + tuple(ordinary))

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def bos_id(self) -> int:
        return self._index[BOS]

    @property
    def eos_id(self) -> int:
        return self._index[EOS]

    def id(self, token: str) -> int:
        return self._index.get(token, self._index[UNK])

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        unk = self._index[UNK]
        return [self._index.get(t, unk) for t in tokens]

    def extended(self, new_tokens: Sequence[str]) -> tuple["Vocab", tuple[str, ...]]:
        """New vocab with unseen tokens appended (sorted); returns the added ones."""
        added = tuple(sorted(set(new_tokens) - set(self._tokens)))
        if not added:
            return self, ()
        return Vocab(self._tokens + added), added


@dataclass
class TargetScore:
    """Per-token conditional log-probabilities and their plain sum."""

    token_logprobs: list[float]
    total: float


@runtime_checkable
class GenerativeScorer(Protocol):
    def score_target(self, source: Sequence[str], target: Sequence[str]) -> TargetScore:
        ...

    def score_targets(
        self, source: Sequence[str], targets: Sequence[Sequence[str]]
    ) -> list[TargetScore]:
        ...


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _param_shapes(vocab_size: int, embed_dim: int, hidden_dim: int) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {"emb": (vocab_size, embed_dim)}
    for side in ("enc", "dec"):
        for gate in ("z", "r", "h"):
            shapes[f"{side}_W{gate}"] = (embed_dim, hidden_dim)
            shapes[f"{side}_U{gate}"] = (hidden_dim, hidden_dim)
            shapes[f"{side}_b{gate}"] = (hidden_dim,)
    shapes["att_Wq"] = (hidden_dim, hidden_dim)
    shapes["att_Wk"] = (hidden_dim, hidden_dim)
    shapes["comb_W"] = (2 * hidden_dim, hidden_dim)
    shapes["comb_b"] = (hidden_dim,)
    shapes["out_W"] = (hidden_dim, vocab_size)
    shapes["out_b"] = (vocab_size,)
    return shapes


class TinySeq2Seq:
    """Single-layer GRU encoder and decoder with scaled dot-product attention.

    All parameters are float64. The decoder starts from the final encoder
    state, conditions on BOS, and at each step attends over the encoder
    states; the attended context and the decoder state pass through a tanh
    combination layer before the shared-vocabulary output projection.
    """

    def __init__(self, vocab: Vocab, embed_dim: int = 64, hidden_dim: int = 128, seed: int = 0):
        if embed_dim < 1 or hidden_dim < 1:
            raise ValueError("dims must be positive")
        self.vocab = vocab
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        for name, shape in _param_shapes(len(vocab), embed_dim, hidden_dim).items():
            if name.endswith(("_bz", "_br", "_bh")) or name in ("comb_b", "out_b"):
                self.params[name] = np.zeros(shape)
            else:
                self.params[name] = rng.uniform(-0.1, 0.1, size=shape)
        self._enc_cache: dict[tuple[str, ...], tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def from_pairs(
        cls,
        pairs: Sequence[TrainingPair],
        embed_dim: int = 64,
        hidden_dim: int = 128,
        seed: int = 0,
    ) -> "TinySeq2Seq":
        vocab = Vocab.build(
            [p.source for p in pairs] + [p.target for p in pairs]
        )
        return cls(vocab, embed_dim, hidden_dim, seed)

    # -- forward ----------------------------------------------------------

    def _invalidate_cache(self) -> None:
        self._enc_cache = {}

    def _encode_ids(self, src_ids: Sequence[int]):
        p = self.params
        h = np.zeros(self.hidden_dim)
        states = np.empty((len(src_ids), self.hidden_dim))
        caches = []
        for t, tok in enumerate(src_ids):
            x = p["emb"][tok]
            h, cache = self._gru_step(x, h, "enc")
            states[t] = h
            caches.append(cache)
        return states, caches

    def _gru_step(self, x, h_prev, side: str):
        p = self.params
        z = _sigmoid(x @ p[f"{side}_Wz"] + h_prev @ p[f"{side}_Uz"] + p[f"{side}_bz"])
        r = _sigmoid(x @ p[f"{side}_Wr"] + h_prev @ p[f"{side}_Ur"] + p[f"{side}_br"])
        hb = np.tanh(
            x @ p[f"{side}_Wh"] + (r * h_prev) @ p[f"{side}_Uh"] + p[f"{side}_bh"]
        )
        h = (1.0 - z) * h_prev + z * hb
        return h, (x, h_prev, z, r, hb)

    def _encoder_states(self, source: Sequence[str]):
        """Cached (H, K) for a source sentence; K = H @ Wk."""
        key = tuple(source)
        hit = self._enc_cache.get(key)
        if hit is not None:
            return hit
        src_ids = self.vocab.encode(source)
        states, _ = self._encode_ids(src_ids)
        keys = states @ self.params["att_Wk"]
        if len(self._enc_cache) >= 64:
            try:
                self._enc_cache.pop(next(iter(self._enc_cache)), None)
            except (StopIteration, RuntimeError):  # concurrent eviction
                pass
        self._enc_cache[key] = (states, keys)
        return states, keys

    def score_target(self, source: Sequence[str], target: Sequence[str]) -> TargetScore:
        """Teacher-forced log-probabilities of target given source.

        Unknown tokens map to UNK; an empty target scores 0 by the empty-sum
        convention. Scores exactly the tokens given (no implicit EOS).
        """
        [out] = self.score_targets(source, [target])
        return out

    def score_targets(
        self, source: Sequence[str], targets: Sequence[Sequence[str]]
    ) -> list[TargetScore]:
        """Score several targets against one source, encoding it only once."""
        if not list(source):
            raise ScorerError("source sentence must be nonempty")
        p = self.params
        dh = self.hidden_dim
        states, keys = self._encoder_states(source)
        results: list[TargetScore] = [TargetScore([], 0.0) for _ in targets]
        todo = [
            (i, ids)
            for i, ids in ((i, self.vocab.encode(t)) for i, t in enumerate(targets))
            if ids
        ]
        if not todo:
            return results
        batch = len(todo)
        max_len = max(len(ids) for _, ids in todo)
        pad = self.vocab.pad_id
        tgt = np.full((batch, max_len), pad, dtype=np.int64)
        for row, (_, ids) in enumerate(todo):
            tgt[row, : len(ids)] = ids
        lengths = np.array([len(ids) for _, ids in todo])

        d = np.tile(states[-1], (batch, 1))
        prev = np.full(batch, self.vocab.bos_id, dtype=np.int64)
        scale = 1.0 / math.sqrt(dh)
        logprobs = np.zeros((batch, max_len))
        for c in range(max_len):
            x = p["emb"][prev]
            z = _sigmoid(x @ p["dec_Wz"] + d @ p["dec_Uz"] + p["dec_bz"])
            r = _sigmoid(x @ p["dec_Wr"] + d @ p["dec_Ur"] + p["dec_br"])
            hb = np.tanh(x @ p["dec_Wh"] + (r * d) @ p["dec_Uh"] + p["dec_bh"])
            d = (1.0 - z) * d + z * hb
            q = d @ p["att_Wq"]
            energy = (q @ keys.T) * scale
            energy -= energy.max(axis=1, keepdims=True)
            alpha = np.exp(energy)
            alpha /= alpha.sum(axis=1, keepdims=True)
            ctx = alpha @ states
            g = np.tanh(np.concatenate([d, ctx], axis=1) @ p["comb_W"] + p["comb_b"])
            logits = g @ p["out_W"] + p["out_b"]
            shifted = logits - logits.max(axis=1, keepdims=True)
            logz = np.log(np.exp(shifted).sum(axis=1))
            rows = np.arange(batch)
            logprobs[:, c] = shifted[rows, tgt[:, c]] - logz
            prev = tgt[:, c]
        for row, (i, ids) in enumerate(todo):
            per_token = [float(v) for v in logprobs[row, : len(ids)]]
            results[i] = TargetScore(per_token, float(sum(per_token)))
        return results

    def token_distributions(
        self, source: Sequence[str], target: Sequence[str]
    ) -> np.ndarray:
        """Full next-token probability vector at every decoder step
        (introspection helper; rows sum to 1)."""
        if not list(target):
            return np.zeros((0, len(self.vocab)))
        p = self.params
        states, keys = self._encoder_states(source)
        tgt_ids = self.vocab.encode(target)
        d = states[-1].copy()
        prev = self.vocab.bos_id
        scale = 1.0 / math.sqrt(self.hidden_dim)
        rows = []
        for y in tgt_ids:
            x = p["emb"][prev]
            d, _ = self._gru_step(x, d, "dec")
            q = d @ p["att_Wq"]
            energy = keys @ q * scale
            energy -= energy.max()
            alpha = np.exp(energy)
            alpha /= alpha.sum()
            ctx = alpha @ states
            g = np.tanh(np.concatenate([d, ctx]) @ p["comb_W"] + p["comb_b"])
            logits = g @ p["out_W"] + p["out_b"]
            shifted = logits - logits.max()
            probs = np.exp(shifted)
            probs /= probs.sum()
            rows.append(probs)
            prev = y
        return np.stack(rows)

    # -- loss and gradients -------------------------------------------------

    def _pair_nll_and_grads(self, src_ids: Sequence[int], tgt_ids: Sequence[int]):
        """Summed NLL of one (source, target) id pair and its parameter
        gradients. Target ids must be nonempty."""
        p = self.params
        dh = self.hidden_dim
        scale = 1.0 / math.sqrt(dh)
        states, enc_caches = self._encode_ids(src_ids)
        keys = states @ p["att_Wk"]

        d = states[-1]
        prev_ids = [self.vocab.bos_id] + list(tgt_ids[:-1])
        dec_caches = []
        nll = 0.0
        for prev_tok, y in zip(prev_ids, tgt_ids):
            x = p["emb"][prev_tok]
            d, gru_cache = self._gru_step(x, d, "dec")
            q = d @ p["att_Wq"]
            energy = keys @ q * scale
            energy -= energy.max()
            alpha = np.exp(energy)
            alpha /= alpha.sum()
            ctx = alpha @ states
            u = np.concatenate([d, ctx])
            g = np.tanh(u @ p["comb_W"] + p["comb_b"])
            logits = g @ p["out_W"] + p["out_b"]
            shifted = logits - logits.max()
            expv = np.exp(shifted)
            probs = expv / expv.sum()
            nll -= float(shifted[y] - math.log(expv.sum()))
            dec_caches.append((prev_tok, y, d, gru_cache, q, alpha, u, g, probs))

        grads = {name: np.zeros_like(arr) for name, arr in p.items()}
        d_states = np.zeros_like(states)
        d_keys = np.zeros_like(keys)
        dd_next = np.zeros(dh)
        for prev_tok, y, d_c, gru_cache, q, alpha, u, g, probs in reversed(dec_caches):
            dlogits = probs.copy()
            dlogits[y] -= 1.0
            grads["out_W"] += np.outer(g, dlogits)
            grads["out_b"] += dlogits
            dg = p["out_W"] @ dlogits
            da = dg * (1.0 - g * g)
            grads["comb_W"] += np.outer(u, da)
            grads["comb_b"] += da
            du = p["comb_W"] @ da
            dd = du[:dh] + dd_next
            dctx = du[dh:]
            dalpha = states @ dctx
            d_states += np.outer(alpha, dctx)
            denergy = alpha * (dalpha - float(alpha @ dalpha))
            dq = (keys.T @ denergy) * scale
            d_keys += np.outer(denergy, q) * scale
            grads["att_Wq"] += np.outer(d_c, dq)
            dd += p["att_Wq"] @ dq
            dx, dd_prev = self._gru_backward(gru_cache, dd, grads, "dec")
            grads["emb"][prev_tok] += dx
            dd_next = dd_prev
        d_states[-1] += dd_next

        grads["att_Wk"] += states.T @ d_keys
        d_states += d_keys @ p["att_Wk"].T

        dh_next = np.zeros(dh)
        for t in range(len(src_ids) - 1, -1, -1):
            dh_vec = d_states[t] + dh_next
            dx, dh_prev = self._gru_backward(enc_caches[t], dh_vec, grads, "enc")
            grads["emb"][src_ids[t]] += dx
            dh_next = dh_prev
        return nll, grads

    def _gru_backward(self, cache, dh, grads, side: str):
        p = self.params
        x, h_prev, z, r, hb = cache
        dz = dh * (hb - h_prev)
        dhb = dh * z
        dh_prev = dh * (1.0 - z)
        dab = dhb * (1.0 - hb * hb)
        grads[f"{side}_Wh"] += np.outer(x, dab)
        grads[f"{side}_bh"] += dab
        grads[f"{side}_Uh"] += np.outer(r * h_prev, dab)
        drh = p[f"{side}_Uh"] @ dab
        dr = drh * h_prev
        dh_prev += drh * r
        dx = p[f"{side}_Wh"] @ dab
        daz = dz * z * (1.0 - z)
        grads[f"{side}_Wz"] += np.outer(x, daz)
        grads[f"{side}_bz"] += daz
        grads[f"{side}_Uz"] += np.outer(h_prev, daz)
        dh_prev += p[f"{side}_Uz"] @ daz
        dx += p[f"{side}_Wz"] @ daz
        dar = dr * r * (1.0 - r)
        grads[f"{side}_Wr"] += np.outer(x, dar)
        grads[f"{side}_br"] += dar
        grads[f"{side}_Ur"] += np.outer(h_prev, dar)
        dh_prev += p[f"{side}_Ur"] @ dar
        dx += p[f"{side}_Wr"] @ dar
        return dx, dh_prev

    # -- vocab growth --------------------------------------------------------

    def extend_vocab(self, new_tokens: Sequence[str], seed: int = 0) -> tuple[str, ...]:
        """Append rows for unseen tokens to the embedding and output layers.

        Tokens already present cause no resize. New embedding and output
        columns are freshly initialized; new output biases start at zero.
        """
        vocab, added = self.vocab.extended(new_tokens)
        if not added:
            return ()
        rng = np.random.default_rng(seed)
        k = len(added)
        self.vocab = vocab
        self.params["emb"] = np.vstack(
            [self.params["emb"], rng.uniform(-0.1, 0.1, size=(k, self.embed_dim))]
        )
        self.params["out_W"] = np.hstack(
            [self.params["out_W"], rng.uniform(-0.1, 0.1, size=(self.hidden_dim, k))]
        )
        self.params["out_b"] = np.concatenate([self.params["out_b"], np.zeros(k)])
        self._invalidate_cache()
        return added

    # -- checkpoint io --------------------------------------------------------

    def save(self, path) -> None:
        """Versioned container: one JSON header line (format, dims, vocab,
        tensor table) followed by the tensors as row-major little-endian
        float64 bytes in table order. Round-trips bit-exactly."""
        names = sorted(self.params)
        header = {
            "format": CHECKPOINT_MAGIC,
            "version": CHECKPOINT_VERSION,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "vocab": list(self.vocab.tokens),
            "tensors": [[name, list(self.params[name].shape)] for name in names],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, ensure_ascii=False).encode("utf-8"))
            fh.write(b"\n")
            for name in names:
                fh.write(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TinySeq2Seq":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            try:
                header = json.loads(header_line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ScorerError(f"not a checkpoint file: {path}") from exc
            if header.get("format") != CHECKPOINT_MAGIC:
                raise ScorerError(f"not a {CHECKPOINT_MAGIC} checkpoint: {path}")
            if header.get("version") != CHECKPOINT_VERSION:
                raise ScorerError(
                    f"unsupported checkpoint version {header.get('version')}"
                )
            model = cls.__new__(cls)
            model.vocab = Vocab(header["vocab"])
            model.embed_dim = int(header["embed_dim"])
            model.hidden_dim = int(header["hidden_dim"])
            model.params = {}
            model._enc_cache = {}
            expected = _param_shapes(len(model.vocab), model.embed_dim, model.hidden_dim)
            for name, shape in header["tensors"]:
                shape = tuple(shape)
                if expected.get(name) != shape:
                    raise ScorerError(f"unexpected tensor {name} {shape} in {path}")
                count = int(np.prod(shape))
                raw = fh.read(count * 8)
                if len(raw) != count * 8:
                    raise ScorerError(f"truncated checkpoint: {path}")
                model.params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
            if set(model.params) != set(expected):
                raise ScorerError(f"checkpoint missing tensors: {path}")
        return model


# -- loss and training ---------------------------------------------------------


def _target_with_eos(target: Sequence[str]) -> list[str]:
    return list(target) + [EOS]


def loss(
    model: TinySeq2Seq,
    batch: Sequence[TrainingPair],
    normalization: str = "token_mean",
    append_eos: bool = True,
) -> float:
    """Negative log-likelihood of a batch of training pairs.

    token_mean divides the summed NLL by the number of scored target tokens
    (the training objective); "sum" leaves the raw summed NLL, which for a
    single pair equals the negated score_target total.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    if normalization not in ("token_mean", "sum"):
        raise ValueError(f"unknown normalization {normalization!r}")
    total = 0.0
    tokens = 0
    for pair in batch:
        target = _target_with_eos(pair.target) if append_eos else list(pair.target)
        score = model.score_target(pair.source, target)
        total -= score.total
        tokens += len(target)
    if normalization == "token_mean":
        return total / tokens if tokens else 0.0
    return total


@dataclass
class TrainConfig:
    """Desk-scale training settings; see REFERENCE_OPTIMIZER_SETTINGS for the
    recorded full-scale presets."""

    learning_rate: float = 1e-3
    batch_size: int = 16
    warmup_steps: int = 100
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.warmup_steps < 0 or self.epochs < 0:
            raise ValueError("warmup_steps and epochs must be >= 0")


@dataclass
class TrainStats:
    epoch_losses: list[float] = field(default_factory=list)
    final_loss: float | None = None
    wall_time_s: float = 0.0


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.step = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def lr_at(self, step: int) -> float:
        cfg = self.config
        if cfg.warmup_steps > 0 and step <= cfg.warmup_steps:
            return cfg.learning_rate * step / cfg.warmup_steps
        return cfg.learning_rate

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        cfg = self.config
        self.step += 1
        lr = self.lr_at(self.step)
        b1c = 1.0 - cfg.beta1**self.step
        b2c = 1.0 - cfg.beta2**self.step
        for name in sorted(params):
            g = grads[name]
            self.m[name] = cfg.beta1 * self.m[name] + (1.0 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1.0 - cfg.beta2) * (g * g)
            m_hat = self.m[name] / b1c
            v_hat = self.v[name] / b2c
            params[name] -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def fit(
    model: TinySeq2Seq,
    pairs: Sequence[TrainingPair],
    config: TrainConfig,
) -> TrainStats:
    """Train in place with Adam and linear learning-rate warmup.

    Targets get EOS appended; the objective is token-mean NLL per batch.
    Deterministic for a fixed config seed (init, shuffle, and update order
    are all seeded or sorted). Raises ScorerError if the loss stops being
    finite.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pairs must be nonempty")
    encoded = [
        (model.vocab.encode(p.source), model.vocab.encode(_target_with_eos(p.target)))
        for p in pairs
    ]
    rng = random.Random(config.seed)
    adam = _Adam(model.params, config)
    stats = TrainStats()
    started = time.perf_counter()
    for _epoch in range(config.epochs):
        order = list(range(len(encoded)))
        rng.shuffle(order)
        epoch_nll = 0.0
        epoch_tokens = 0
        for lo in range(0, len(order), config.batch_size):
            chunk = order[lo : lo + config.batch_size]
            grads: dict[str, np.ndarray] | None = None
            batch_nll = 0.0
            batch_tokens = 0
            for idx in chunk:
                src_ids, tgt_ids = encoded[idx]
                nll, g = model._pair_nll_and_grads(src_ids, tgt_ids)
                batch_nll += nll
                batch_tokens += len(tgt_ids)
                if grads is None:
                    grads = g
                else:
                    for name in grads:
                        grads[name] += g[name]
            if not math.isfinite(batch_nll):
                raise ScorerError(
                    f"training diverged: non-finite loss at step {adam.step + 1}"
                )
            scale = 1.0 / batch_tokens
            for name in grads:
                grads[name] *= scale
            adam.update(model.params, grads)
            epoch_nll += batch_nll
            epoch_tokens += batch_tokens
        model._invalidate_cache()
        stats.epoch_losses.append(epoch_nll / epoch_tokens)
    stats.final_loss = stats.epoch_losses[-1] if stats.epoch_losses else None
    stats.wall_time_s = time.perf_counter() - started
    return stats


def fine_tune(
    model: TinySeq2Seq,
    pairs: Sequence[TrainingPair],
    config: TrainConfig,
    extend_vocab: bool = True,
) -> TrainStats:
    """Continue training an existing model on new pairs.

    Identical mechanics to fit, starting from the given parameters. With
    extend_vocab, tokens unseen by the model (typically new-domain label
    words) get fresh embedding and output rows; the output layer stays the
    shared vocabulary, so no per-label reshaping ever happens.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pairs must be nonempty")
    if extend_vocab:
        tokens: set[str] = set()
        for p in pairs:
            tokens.update(p.source)
            tokens.update(p.target)
        model.extend_vocab(sorted(tokens), seed=config.seed)
    return fit(model, pairs, config)

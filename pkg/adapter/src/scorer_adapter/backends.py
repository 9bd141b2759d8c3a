"""Scoring backends.

A backend turns (source tokens, target tokens) into one log-probability per
engine target token. Backends with their own subword vocabulary score the
subword pieces and aggregate piece log-probabilities back to engine tokens
by summation, which preserves the sequence total.
"""

from __future__ import annotations

from typing import Protocol, Sequence


class ScoringBackend(Protocol):
    def score(self, src: Sequence[str], tgt: Sequence[str]) -> list[float]:
        ...


def sum_by_group(values: Sequence[float], group_sizes: Sequence[int]) -> list[float]:
    """Collapse piece-level values to token-level sums.

    group_sizes[i] is the number of pieces the i-th engine token produced;
    the sizes must cover `values` exactly.
    """
    if sum(group_sizes) != len(values):
        raise ValueError(
            f"group sizes sum to {sum(group_sizes)} but got {len(values)} values"
        )
    if any(size < 1 for size in group_sizes):
        raise ValueError("every engine token needs at least one piece")
    out = []
    pos = 0
    for size in group_sizes:
        out.append(float(sum(values[pos : pos + size])))
        pos += size
    return out


class LoopbackBackend:
    """Scores with an exported built-in engine model (checkpoint file).

    The engine and this backend share the whitespace token space, so no
    subword aggregation happens; scores match in-process scoring exactly.
    """

    def __init__(self, checkpoint_path: str):
        from template_ner.scorer import TinySeq2Seq

        self._model = TinySeq2Seq.load(checkpoint_path)

    def score(self, src: Sequence[str], tgt: Sequence[str]) -> list[float]:
        return self._model.score_target(list(src), list(tgt)).token_logprobs


class SubwordSeq2SeqBackend:
    """Scores with a pretrained seq2seq language model via teacher forcing.

    Each engine token is tokenized to subword pieces in target context (a
    leading space before non-initial tokens); the piece log-probabilities
    under the forced decoding are summed per engine token. Reserved engine
    tokens ("<s>", "</s>", "<unk>", "<pad>") map to the backend's own
    specials. Requires the `hf` extra (transformers + torch).
    """

    RESERVED = {"<s>": "bos", "</s>": "eos", "<unk>": "unk", "<pad>": "pad"}

    def __init__(self, model_path: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_path)
        self._model = AutoModelForSeq2SeqLM.from_pretrained(model_path)
        self._model.eval()
        self._model.to(device)
        self._device = device

    def _token_pieces(self, token: str, first: bool) -> list[int]:
        special = self.RESERVED.get(token)
        if special is not None:
            token_id = getattr(self._tokenizer, f"{special}_token_id")
            if token_id is not None:
                return [token_id]
        text = token if first else " " + token
        return self._tokenizer.encode(text, add_special_tokens=False)

    def score(self, src: Sequence[str], tgt: Sequence[str]) -> list[float]:
        torch = self._torch
        groups = [self._token_pieces(tok, i == 0) for i, tok in enumerate(tgt)]
        label_ids = [piece for group in groups for piece in group]
        source_ids = self._tokenizer(" ".join(src), return_tensors="pt").input_ids
        labels = torch.tensor([label_ids])
        with torch.no_grad():
            logits = self._model(
                input_ids=source_ids.to(self._device),
                labels=labels.to(self._device),
            ).logits[0]
        logprobs = torch.log_softmax(logits.double(), dim=-1)
        piece_scores = [
            float(logprobs[pos, piece]) for pos, piece in enumerate(label_ids)
        ]
        return sum_by_group(piece_scores, [len(g) for g in groups])

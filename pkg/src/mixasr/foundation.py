"""Frozen-able encoder-decoder ASR foundation model.

A small transformer with the same special-token decoder interface as the
large pretrained speech models it stands in for: the decoder prefix is
[PREV, (soft prompt), SOT, LANGUAGE, TRANSCRIBE, NO_TIMESTAMP], prompt
slots sit strictly between PREV and SOT, and no prefix slot ever
contributes to the training loss. The encoder exposes a split point after
`insertion_index` blocks where a separator can multiply masks into the
mixed embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import Tensor
from .errors import ConfigError, ContextOverflow, ShapeError
from .nn import (
    DecoderBlock,
    EncoderBlock,
    Embedding,
    LayerNorm,
    Module,
    causal_bias,
    length_bias,
    param,
    sinusoids,
    zeros_param,
)

PREV = "<|prev|>"
SOT = "<|sot|>"
EOT = "<|eot|>"
TRANSCRIBE = "<|transcribe|>"
NO_TIMESTAMP = "<|notimestamps|>"
UNK = "<|unk|>"


def language_token(language: str) -> str:
    return f"<|{language}|>"


class Vocabulary:
    """Word-level token inventory plus the special decoder-prefix tokens."""

    def __init__(self, words: list[str], languages: tuple[str, ...] = ("en",)):
        if len(set(words)) != len(words):
            raise ConfigError("duplicate words in vocabulary")
        self.words = list(words)
        self.languages = tuple(languages)
        self._specials = [UNK, PREV, SOT, EOT, TRANSCRIBE, NO_TIMESTAMP]
        self._specials += [language_token(l) for l in self.languages]
        self._tokens = self.words + self._specials
        self._to_id = {tok: i for i, tok in enumerate(self._tokens)}

    @property
    def size(self) -> int:
        return len(self._tokens)

    def __len__(self) -> int:
        return self.size

    def id_of(self, token: str) -> int:
        return self._to_id[token]

    @property
    def unk_id(self) -> int:
        return self._to_id[UNK]

    @property
    def prev_id(self) -> int:
        return self._to_id[PREV]

    @property
    def sot_id(self) -> int:
        return self._to_id[SOT]

    @property
    def eot_id(self) -> int:
        return self._to_id[EOT]

    @property
    def transcribe_id(self) -> int:
        return self._to_id[TRANSCRIBE]

    @property
    def no_timestamp_id(self) -> int:
        return self._to_id[NO_TIMESTAMP]

    def language_id(self, language: str) -> int:
        tok = language_token(language)
        if tok not in self._to_id:
            raise ConfigError(f"language {language!r} not in vocabulary")
        return self._to_id[tok]

    def encode(self, text: str) -> list[int]:
        """Whitespace-tokenized word ids; unknown words map to UNK."""
        return [self._to_id.get(w, self.unk_id) for w in text.split()]

    def encode_target(self, text: str) -> list[int]:
        """Word ids with the EOT terminator appended (decoder target form)."""
        return self.encode(text) + [self.eot_id]

    def decode(self, ids) -> str:
        words = []
        for i in ids:
            tok = self._tokens[int(i)]
            if tok in self._specials or tok.startswith("<|"):
                continue
            words.append(tok)
        return " ".join(words)


@dataclass
class FoundationConfig:
    words: list[str] = field(default_factory=list)
    n_mels: int = 80
    n_encoder_blocks: int = 4
    n_decoder_blocks: int = 2
    channels: int = 64
    n_heads: int = 4
    insertion_index: int = 2
    max_input_seconds: float = 30.0
    fixed_window: bool = False
    sample_rate_hz: int = 16000
    languages: tuple = ("en",)
    language: str = "en"
    max_decoder_positions: int = 96
    dtype: str = "float32"

    def validate(self) -> None:
        if not 1 <= self.insertion_index < self.n_encoder_blocks:
            raise ConfigError(
                f"insertion_index {self.insertion_index} must be in "
                f"[1, {self.n_encoder_blocks})"
            )
        if self.channels % self.n_heads:
            raise ConfigError("channels must be divisible by n_heads")
        if self.language not in self.languages:
            raise ConfigError(f"language {self.language!r} not in {self.languages}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass
class DecoderPrefix:
    """Token layout [PREV, prompt x P, SOT, LANGUAGE, TRANSCRIBE, NO_TIMESTAMP]."""

    prompt_length: int = 4

    @property
    def length(self) -> int:
        return 5 + self.prompt_length

    def ids_before_prompt(self, vocab: Vocabulary) -> list[int]:
        return [vocab.prev_id]

    def ids_after_prompt(self, vocab: Vocabulary, language: str) -> list[int]:
        return [
            vocab.sot_id,
            vocab.language_id(language),
            vocab.transcribe_id,
            vocab.no_timestamp_id,
        ]


@dataclass
class GreedyResult:
    tokens: list[int]
    truncated: bool


class AudioEncoder(Module):
    def __init__(self, rng, config: FoundationConfig):
        c = config.channels
        dt = config.np_dtype
        self.conv1_w = param(rng, (c, config.n_mels, 3), (config.n_mels * 3) ** -0.5, dt)
        self.conv1_b = zeros_param((c,), dt)
        self.conv2_w = param(rng, (c, c, 3), (c * 3) ** -0.5, dt)
        self.conv2_b = zeros_param((c,), dt)
        self.blocks = [
            EncoderBlock(rng, c, config.n_heads, dt) for _ in range(config.n_encoder_blocks)
        ]
        self.ln_post = LayerNorm(c, dt)


class TextDecoder(Module):
    def __init__(self, rng, config: FoundationConfig, vocab_size: int):
        c = config.channels
        dt = config.np_dtype
        self.token_embedding = Embedding(rng, vocab_size, c, dt)
        self.pos_embedding = param(rng, (config.max_decoder_positions, c), 0.02, dt)
        self.blocks = [
            DecoderBlock(rng, c, config.n_heads, dt) for _ in range(config.n_decoder_blocks)
        ]
        self.ln = LayerNorm(c, dt)


class FoundationModel(Module):
    """Encoder-decoder ASR model with an encoder split point for a separator."""

    def __init__(self, config: FoundationConfig, vocab: Vocabulary, seed: int = 0):
        config.validate()
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF0)))
        self.config = config
        self.vocab = vocab
        self.encoder = AudioEncoder(rng, config)
        self.decoder = TextDecoder(rng, config, vocab.size)
        self._neg = -1e9

    # -- encoder ---------------------------------------------------------

    def encode_lower(self, features: np.ndarray, feat_lengths: np.ndarray | None = None):
        """Conv stem plus encoder blocks 1..insertion_index.

        features: (B, n_mels, T_feat) array; feat_lengths: valid frames per
        row (defaults to full). Returns (embedding (B, T_enc, C) tensor,
        enc_lengths (B,) array).
        """
        features = np.asarray(features)
        if features.ndim != 3 or features.shape[1] != self.config.n_mels:
            raise ShapeError(
                f"expected features (B, {self.config.n_mels}, T), got {features.shape}"
            )
        dt = self.config.np_dtype
        x = engine.astensor(features.astype(dt, copy=False))
        t_feat = features.shape[2]
        if feat_lengths is None:
            feat_lengths = np.full(features.shape[0], t_feat, dtype=np.int64)
        enc_lengths = np.asarray(feat_lengths) // 2
        x = engine.gelu(engine.conv1d(x, self.encoder.conv1_w, self.encoder.conv1_b, 1, 1))
        x = engine.gelu(engine.conv1d(x, self.encoder.conv2_w, self.encoder.conv2_b, 2, 1))
        t_enc = t_feat // 2
        x = x[:, :, :t_enc]
        x = engine.transpose(x, (0, 2, 1))  # (B, T_enc, C)
        x = x + sinusoids(t_enc, self.config.channels, dt)
        bias = length_bias(enc_lengths, t_enc, dt, self._neg)
        for block in self.encoder.blocks[: self.config.insertion_index]:
            x = block(x, bias=bias)
        return x, enc_lengths

    def encode_upper(self, x, enc_lengths: np.ndarray):
        """Encoder blocks insertion_index+1..n plus final normalization."""
        if x.shape[-1] != self.config.channels:
            raise ShapeError(
                f"expected {self.config.channels} channels, got {x.shape[-1]}"
            )
        bias = length_bias(enc_lengths, x.shape[1], self.config.np_dtype, self._neg)
        for block in self.encoder.blocks[self.config.insertion_index:]:
            x = block(x, bias=bias)
        return self.encoder.ln_post(x)

    # -- decoder ---------------------------------------------------------

    def _prefix_embeddings(self, n: int, prompt=None):
        """Decoder prefix embeddings (n, 5 + P, C) with the prompt injected."""
        vocab = self.vocab
        prefix = DecoderPrefix(prompt_length=0 if prompt is None else prompt.length)
        before = np.asarray(prefix.ids_before_prompt(vocab))
        after = np.asarray(prefix.ids_after_prompt(vocab, self.config.language))
        w = self.decoder.token_embedding.weight
        e_before = engine.embedding(w, np.tile(before, (n, 1)))
        e_after = engine.embedding(w, np.tile(after, (n, 1)))
        if prompt is None or prompt.length == 0:
            return engine.concat([e_before, e_after], axis=1), prefix
        ones = np.ones((n, 1, 1), dtype=self.config.np_dtype)
        p = engine.mul(engine.reshape(prompt.embedding, (1, prompt.length, -1)), ones)
        return engine.concat([e_before, p, e_after], axis=1), prefix

    def _decoder_forward(self, embeds, enc, enc_lengths):
        dt = self.config.np_dtype
        n, length, _ = embeds.shape
        if length > self.config.max_decoder_positions:
            raise ContextOverflow(
                f"decoder input of {length} exceeds context "
                f"{self.config.max_decoder_positions}"
            )
        x = embeds + self.decoder.pos_embedding[:length]
        cb = causal_bias(length, dt, self._neg)
        xb = length_bias(enc_lengths, enc.shape[1], dt, self._neg)
        for block in self.decoder.blocks:
            x = block(x, enc, cb, cross_bias=xb)
        x = self.decoder.ln(x)
        return engine.matmul(x, engine.transpose(self.decoder.token_embedding.weight))

    def decoder_nll(
        self,
        enc,
        enc_lengths: np.ndarray,
        targets: list[list[int]],
        prompt=None,
        prefix_labels: np.ndarray | None = None,
    ):
        """Per-sequence teacher-forced NLL, averaged over target positions.

        Every prefix slot (PREV, prompt, SOT, language, task tokens)
        contributes exactly zero: prefix_labels, when given, fills those
        masked label positions and provably cannot change the result.
        targets must each end with EOT.
        """
        n = enc.shape[0]
        if len(targets) != n:
            raise ShapeError(f"{len(targets)} targets for {n} encoder rows")
        eot = self.vocab.eot_id
        for t in targets:
            if len(t) == 0 or t[-1] != eot:
                raise ShapeError("each target must end with EOT")
        prefix_emb, prefix = self._prefix_embeddings(n, prompt)
        q = prefix.length
        max_t = max(len(t) for t in targets)
        l_in = q + max_t - 1
        ids_in = np.full((n, max(max_t - 1, 0)), eot, dtype=np.int64)
        labels = np.full((n, l_in), eot, dtype=np.int64)
        mask = np.zeros((n, l_in))
        if prefix_labels is not None:
            pl = np.asarray(prefix_labels, dtype=np.int64)
            labels[:, : q - 1] = pl if pl.ndim == 2 else pl[None, :]
        for i, t in enumerate(targets):
            ids_in[i, : len(t) - 1] = t[:-1]
            labels[i, q - 1 : q - 1 + len(t)] = t
            mask[i, q - 1 : q - 1 + len(t)] = 1.0
        if max_t > 1:
            e_tgt = engine.embedding(self.decoder.token_embedding.weight, ids_in)
            embeds = engine.concat([prefix_emb, e_tgt], axis=1)
        else:
            embeds = prefix_emb
        logits = self._decoder_forward(embeds, enc, enc_lengths)
        return engine.masked_sequence_nll(logits, labels, mask)

    def decode_greedy(
        self,
        enc_row,
        enc_length: int,
        prompt=None,
        max_len: int = 32,
    ) -> GreedyResult:
        """Argmax decoding for one encoder-output row until EOT or max_len."""
        if enc_row.ndim == 2:
            enc = engine.reshape(enc_row, (1,) + tuple(enc_row.shape))
        else:
            enc = enc_row
        enc_lengths = np.asarray([enc_length])
        eot = self.vocab.eot_id
        emitted: list[int] = []
        prefix_emb, prefix = self._prefix_embeddings(1, prompt)
        limit = self.config.max_decoder_positions - prefix.length
        truncated = True
        for _ in range(min(max_len, limit)):
            if emitted:
                e = engine.embedding(
                    self.decoder.token_embedding.weight,
                    np.asarray(emitted, dtype=np.int64)[None, :],
                )
                embeds = engine.concat([prefix_emb, e], axis=1)
            else:
                embeds = prefix_emb
            logits = self._decoder_forward(embeds, enc, enc_lengths)
            nxt = int(np.argmax(logits.data[0, -1]))
            if nxt == eot:
                truncated = False
                break
            emitted.append(nxt)
        return GreedyResult(tokens=emitted, truncated=truncated)

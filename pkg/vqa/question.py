"""Question encoder: padded token ids -> context-aware token features T and pooled q."""
from dataclasses import dataclass
import math

import numpy as np

from .autograd import Tensor, masked_softmax, matmul, mean_pool
from .exceptions import DataError, DimensionError, UsageError
from .layers import EVAL, LayerNorm, WeightNormLinear, merge_heads, split_heads, xavier_uniform


@dataclass
class QuestionBatch:
    token_ids: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.token_ids.ndim != 2 or self.token_ids.shape != self.valid_mask.shape:
            raise DimensionError(f"token ids {self.token_ids.shape} and mask {self.valid_mask.shape} must be equal 2-D shapes")
        if not np.all(self.valid_mask.any(axis=1)):
            raise DataError("every question needs at least one valid token")
        if np.any(self.token_ids[~self.valid_mask] != 0):
            raise DataError("padding positions must carry id 0")

    @property
    def length(self):
        return self.token_ids.shape[1]

    @classmethod
    def pad(cls, sequences, length):
        """Right-pad id lists with 0 to ``length``."""
        ids = np.zeros((len(sequences), length), dtype=np.int64)
        mask = np.zeros((len(sequences), length), dtype=bool)
        for row, sequence in enumerate(sequences):
            if not 1 <= len(sequence) <= length:
                raise DataError(f"question of {len(sequence)} tokens does not fit length {length}")
            ids[row, :len(sequence)] = sequence
            mask[row, :len(sequence)] = True
        return cls(ids, mask)


@dataclass
class EncodedQuestion:
    token_features: Tensor  # batch x L x d
    pooled: Tensor  # batch x d
    valid_mask: np.ndarray


class QuestionEncoder:
    """
    Transformer encoder with learned positions. Padding is masked out of every
    attention and zeroed at the embedding, so padding ids never reach the output.
    """

    def __init__(self, store, config, vocab_size, rng, prefix='question'):
        self.config = config
        self.vocab_size = vocab_size
        d = config.d
        self.embedding = store.create(f"{prefix}.embedding", xavier_uniform(rng, vocab_size, d))
        self.position = store.create(f"{prefix}.position", xavier_uniform(rng, config.max_question_length, d))
        self.layers = []
        for index in range(config.layers):
            name = f"{prefix}.layer{index}"
            self.layers.append({
                'query': WeightNormLinear(store, f"{name}.attn.query", d, d, rng),
                'key': WeightNormLinear(store, f"{name}.attn.key", d, d, rng),
                'value': WeightNormLinear(store, f"{name}.attn.value", d, d, rng),
                'output': WeightNormLinear(store, f"{name}.attn.output", d, d, rng),
                'norm1': LayerNorm(store, f"{name}.norm1", d),
                'up': WeightNormLinear(store, f"{name}.ffn.up", d, config.hidden, rng),
                'down': WeightNormLinear(store, f"{name}.ffn.down", config.hidden, d, rng, dropout=config.dropout),
                'norm2': LayerNorm(store, f"{name}.norm2", d),
            })

    def self_attention(self, layer, x, valid_mask, ctx):
        heads = self.config.heads
        queries = split_heads(layer['query'](x, ctx), heads)
        keys = split_heads(layer['key'](x, ctx), heads)
        values = split_heads(layer['value'](x, ctx), heads)
        scores = matmul(queries, keys.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.config.head_dim))
        weights = masked_softmax(scores, valid_mask[:, None, None, :], axis=-1)
        return layer['output'](merge_heads(matmul(weights, values)), ctx), weights

    def encode(self, batch, ctx=EVAL):
        if batch.length > self.config.max_question_length:
            raise DimensionError(f"questions of length {batch.length} exceed max_question_length {self.config.max_question_length}")
        if np.any(batch.token_ids >= self.vocab_size) or np.any(batch.token_ids < 0):
            raise UsageError(f"token ids must lie in [0, {self.vocab_size})")
        mask = batch.valid_mask
        x = self.embedding[batch.token_ids] + self.position[:batch.length]
        x = x * mask[..., None].astype(np.float64)
        for layer in self.layers:
            attended, _ = self.self_attention(layer, x, mask, ctx)
            x = layer['norm1'](x + ctx.dropout(attended, self.config.dropout))
            expanded = layer['up'](x, ctx).relu()
            x = layer['norm2'](x + ctx.dropout(layer['down'](expanded, ctx), self.config.dropout))
        return EncodedQuestion(token_features=x, pooled=mean_pool(x, mask), valid_mask=mask)

"""
Dual encoder: the last user turn and the response are encoded by two separate LSTMs over a shared word embedding,
the concatenated final states go through a predictor ending in a sigmoid. Plain words only: no agent tags, entities
or side features.
"""
from __future__ import annotations
import logging
from typing import Dict, Iterable, Optional, Tuple
import numpy as np
from dialrank.allocation import ParameterAllocation
from dialrank.config import DualEncoderConfig, TextConfig, from_dict, to_dict
from dialrank.nodes.dense import MLP
from dialrank.nodes.misc import LabelNode
from dialrank.nodes.recurrent import EmbeddingNode, LSTMNode, pad_sequences
from dialrank.rankers.base import register
from dialrank.rankers.training import NetworkRanker, TrainingReport, fit_network
from dialrank.textproc import MAX_TOKENS, Vocabulary, build_vocab, words
from dialrank.tools import make_rng

log = logging.getLogger(__name__)


@register
class DualEncoderRanker(NetworkRanker):
    kind = 'dual_encoder'

    def __init__(self, vocab: Vocabulary, cfg: Optional[DualEncoderConfig] = None, seed: int = 42,
                 max_tokens: int = MAX_TOKENS):
        self.cfg = cfg or DualEncoderConfig()
        self.vocab = vocab
        self.seed = seed
        self.max_tokens = max_tokens
        self.alloc = ParameterAllocation()
        rng = make_rng(seed, 1)
        e, h = self.cfg.embedding_size, self.cfg.hidden_size
        self.inputs = LabelNode('last user turn, response\nplain words')
        self.embedding = EmbeddingNode(self.alloc, 'embedding', len(vocab), e, rng, self.inputs)
        self.context_encoder = LSTMNode(self.alloc, 'context_encoder', e, h, rng, self.embedding)
        self.response_encoder = LSTMNode(self.alloc, 'response_encoder', e, h, rng, self.embedding)
        self.concat = LabelNode('context state (+) response state\n{}'.format(2 * h), self.context_encoder)
        self.response_encoder.add_edge('next', self.concat)
        self.predictor = MLP(self.alloc, 'predictor', 2 * h, self.cfg.predictor, rng, self.concat)
        self.alloc.round_to_float32()
        self._ids_cache: Dict[str, Tuple[int, ...]] = {}
        self._cache = None

    def word_ids(self, text: str) -> Tuple[int, ...]:
        ids = self._ids_cache.get(text)
        if ids is None:
            ids = tuple(self.vocab.encode(words(text)[:self.max_tokens]))
            if len(self._ids_cache) > 500000:
                self._ids_cache.clear()
            self._ids_cache[text] = ids
        return ids

    def prepare(self, pairs) -> list:
        out = []
        for context, candidate in pairs:
            user = context.last_user_turn()
            out.append((self.word_ids(user.text) if user is not None else (), self.word_ids(candidate.text)))
        return out

    def forward(self, batch: list, train: bool = False, rng: np.random.Generator = None) -> np.ndarray:
        n = len(batch)
        ids, mask = pad_sequences([b[0] for b in batch] + [b[1] for b in batch])
        x = self.embedding.forward(ids)
        hc = self.context_encoder.forward(x[:n], mask[:n], keep_cache=train)
        hr = self.response_encoder.forward(x[n:], mask[n:], keep_cache=train)
        joint = np.concatenate([hc, hr], axis=1)
        drop = None
        if train and self.cfg.dropout > 0.0:
            keep = 1.0 - self.cfg.dropout
            drop = (rng.random(joint.shape) < keep) / keep
            joint = joint * drop
        self._cache = drop
        return self.predictor.forward(joint)

    def backward(self, dpred: np.ndarray):
        h = self.cfg.hidden_size
        d = self.predictor.backward(dpred)
        if self._cache is not None:
            d = d * self._cache
        dx_c = self.context_encoder.backward(d[:, :h])
        dx_r = self.response_encoder.backward(d[:, h:])
        self.embedding.backward(np.concatenate([dx_c, dx_r], axis=0))

    def checkpoint(self):
        header = {'hyperparameters': to_dict(self.cfg), 'vocabulary': list(self.vocab.tokens),
                  'max_tokens': self.max_tokens, 'seed': self.seed}
        return header, dict(self.alloc.params)

    @classmethod
    def from_checkpoint(cls, header, arrays) -> DualEncoderRanker:
        model = cls(Vocabulary(tuple(header['vocabulary'])), from_dict(DualEncoderConfig, header['hyperparameters']),
                    header.get('seed', 42), header.get('max_tokens', MAX_TOKENS))
        model.alloc.restore(arrays)
        return model


def dual_encoder_score(model: DualEncoderRanker, context, candidate) -> float:
    """
    Score of one pair. Only the last user turn of the context is read.
    """
    return model.score(context, candidate)


def dual_encoder_words(instances: Iterable, max_tokens: int = MAX_TOKENS):
    for inst in instances:
        user = inst.context.last_user_turn()
        if user is not None:
            yield words(user.text)[:max_tokens]
        yield words(inst.response.text)[:max_tokens]


def train_dual_encoder(dataset, cfg: Optional[DualEncoderConfig] = None, seed: int = 42,
                       text_cfg: Optional[TextConfig] = None) -> Tuple[DualEncoderRanker, TrainingReport]:
    """
    Train a dual encoder on the train split with early stopping on the dev split.
    :return: (model, report)
    """
    cfg = cfg or DualEncoderConfig()
    text_cfg = text_cfg or TextConfig()
    vocab = build_vocab(dual_encoder_words(dataset.train, text_cfg.max_tokens), text_cfg.max_vocab)
    model = DualEncoderRanker(vocab, cfg, seed, text_cfg.max_tokens)
    report = fit_network(model, dataset.train, dataset.dev, cfg.learning_rate, cfg.batch_size, cfg.max_epochs,
                         cfg.patience, seed)
    return model, report

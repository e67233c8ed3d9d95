"""
The neural ranker: one GRU encoder shared by all context turns and the response, the sum of the context turn states
concatenated with the response state, a ReLU semantic layer, side features and a predictor ending in a sigmoid.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import numpy as np
from dialrank.allocation import ParameterAllocation
from dialrank.config import NeuralConfig, TextConfig, from_dict, to_dict
from dialrank.errors import ModelError, ShapeError
from dialrank.features import SideFeatureVector, side_feature_array, side_feature_size
from dialrank.nodes.dense import MLP, DenseNode
from dialrank.nodes.misc import LabelNode
from dialrank.nodes.recurrent import EmbeddingNode, GRUNode, pad_sequences
from dialrank.rankers.base import register
from dialrank.rankers.training import NetworkRanker, TrainingReport, fit_network
from dialrank.textproc import MAX_TOKENS, SentimentLexicon, Vocabulary, build_vocab, default_lexicon, tokenize
from dialrank.tools import make_rng

log = logging.getLogger(__name__)

GRID_GRU_SIZES = (64, 128, 256)
GRID_LAYOUTS = ((128,), (128, 64), (128, 32, 32))


def dataset_roster(instances: Iterable) -> List[str]:
    """
    Sorted names of all bots appearing in the contexts and responses of the instances.
    """
    bots = set()
    for inst in instances:
        bots.add(inst.response.bot)
        bots.update(t.agent for t in inst.context.turns if not t.is_user)
    return sorted(bots)


@register
class NeuralRanker(NetworkRanker):
    kind = 'neural'

    def __init__(self, vocab: Vocabulary, roster: Sequence[str], cfg: Optional[NeuralConfig] = None, seed: int = 42,
                 max_tokens: int = MAX_TOKENS, lexicon: Optional[SentimentLexicon] = None):
        """
        Build the network with freshly initialized parameters.
        :param vocab: Vocabulary of word-agent and entity tokens.
        :param roster: Ordered bot roster for the side features.
        :param cfg: Layer sizes and training settings.
        :param seed: Seed of the initialization.
        :param max_tokens: Word tokens kept per turn.
        :param lexicon: Sentiment lexicon of the side features.
        """
        if not roster:
            raise ModelError('the bot roster is empty')
        self.cfg = cfg or NeuralConfig()
        self.vocab = vocab
        self.roster = list(roster)
        self.seed = seed
        self.max_tokens = max_tokens
        self.lexicon = lexicon or default_lexicon()
        self.side_size = side_feature_size(self.roster)
        self.alloc = ParameterAllocation()
        rng = make_rng(seed, 1)
        e, h, s = self.cfg.embedding_size, self.cfg.gru_size, self.cfg.sem_size
        self.inputs = LabelNode('context turns and response\nword-agent and entity tokens')
        self.embedding = EmbeddingNode(self.alloc, 'embedding', len(vocab), e, rng, self.inputs)
        self.encoder = GRUNode(self.alloc, 'encoder', e, h, rng, self.embedding)
        self.enc = LabelNode('Enc: sum of context turn states (+) response state\n{}'.format(2 * h), self.encoder)
        self.sem = DenseNode(self.alloc, 'sem', 2 * h, s, 'relu', rng, self.enc)
        self.concat = LabelNode('Sem (+) side features\n{} + {}'.format(s, self.side_size), self.sem)
        self.predictor = MLP(self.alloc, 'predictor', s + self.side_size, self.cfg.predictor, rng, self.concat)
        self.alloc.round_to_float32()
        self._ids_cache: Dict[tuple, Tuple[int, ...]] = {}
        self._cache = None

    @property
    def enc_size(self) -> int:
        return 2 * self.cfg.gru_size

    def token_ids(self, turn, entities) -> Tuple[int, ...]:
        key = (turn.agent, turn.text, tuple(entities))
        ids = self._ids_cache.get(key)
        if ids is None:
            ids = tuple(self.vocab.encode(tokenize(turn, entities, self.max_tokens)))
            if len(self._ids_cache) > 500000:
                self._ids_cache.clear()
            self._ids_cache[key] = ids
        return ids

    def context_ids(self, context) -> Tuple[Tuple[int, ...], ...]:
        """
        Token ids of the context turns in a canonical order. The turn states are summed, so the order does not
        change the sum mathematically; a fixed order makes it bit-exact.
        """
        return tuple(sorted(self.token_ids(t, e) for t, e in zip(context.turns, context.entities)))

    def prepare(self, pairs) -> list:
        return [(self.context_ids(c), self.token_ids(r, r.entities),
                 side_feature_array(c, r, self.roster, self.lexicon, self.side_size)) for c, r in pairs]

    def _encode(self, batch: list, keep_cache: bool):
        seqs = []
        spans = []
        for ctx_ids, resp_ids, _ in batch:
            start = len(seqs)
            seqs.extend(ctx_ids)
            seqs.append(resp_ids)
            spans.append((start, len(seqs) - 1))
        ids, mask = pad_sequences(seqs)
        states = self.encoder.forward(self.embedding.forward(ids), mask, keep_cache=keep_cache)
        h = self.cfg.gru_size
        enc = np.zeros((len(batch), 2 * h))
        for b, (start, r) in enumerate(spans):
            acc = np.zeros(h)
            for k in range(start, r):
                acc = acc + states[k]
            enc[b, :h] = acc
            enc[b, h:] = states[r]
        return enc, spans, states.shape

    def forward(self, batch: list, train: bool = False, rng: np.random.Generator = None) -> np.ndarray:
        enc, spans, shape = self._encode(batch, train)
        drop = None
        if train and self.cfg.dropout > 0.0:
            keep = 1.0 - self.cfg.dropout
            drop = (rng.random(enc.shape) < keep) / keep
            enc = enc * drop
        sem = self.sem.forward(enc)
        side = np.stack([item[2] for item in batch]) if batch else np.zeros((0, self.side_size))
        pred = self.predictor.forward(np.concatenate([sem, side], axis=1))
        self._cache = (spans, shape, drop)
        return pred

    def backward(self, dpred: np.ndarray):
        spans, shape, drop = self._cache
        h = self.cfg.gru_size
        d = self.predictor.backward(dpred)
        denc = self.sem.backward(d[:, :self.cfg.sem_size])
        if drop is not None:
            denc = denc * drop
        dstates = np.zeros(shape)
        for b, (start, r) in enumerate(spans):
            dstates[start:r] = denc[b, :h]
            dstates[r] = denc[b, h:]
        self.embedding.backward(self.encoder.backward(dstates))

    def encode(self, context, candidate) -> np.ndarray:
        """
        Enc(C, r) of one pair: the summed context turn states followed by the response state.
        """
        return self._encode(self.prepare([(context, candidate)]), False)[0][0]

    def checkpoint(self):
        header = {'hyperparameters': to_dict(self.cfg), 'vocabulary': list(self.vocab.tokens),
                  'roster': self.roster, 'max_tokens': self.max_tokens, 'seed': self.seed}
        return header, dict(self.alloc.params)

    @classmethod
    def from_checkpoint(cls, header, arrays) -> NeuralRanker:
        cfg = from_dict(NeuralConfig, header['hyperparameters'])
        model = cls(Vocabulary(tuple(header['vocabulary'])), header['roster'], cfg, header.get('seed', 42),
                    header.get('max_tokens', MAX_TOKENS))
        model.alloc.restore(arrays)
        return model


def neural_score(model: NeuralRanker, context, candidate, side: SideFeatureVector) -> float:
    """
    Score of one pair with explicitly given side features.
    :param model: The NeuralRanker.
    :param context: RankingContext.
    :param candidate: Candidate.
    :param side: SideFeatureVector, must have the dimension the model was built for.
    :return: Score in (0, 1).
    """
    f = side.as_array()
    if f.shape[0] != model.side_size:
        raise ShapeError('side feature dimension {} does not match the model ({})'.format(f.shape[0],
                                                                                       model.side_size))
    item = (model.context_ids(context), model.token_ids(candidate, candidate.entities), f)
    return float(model.forward([item])[0])


def instance_tokens(instances: Iterable, max_tokens: int = MAX_TOKENS):
    for inst in instances:
        for t, e in zip(inst.context.turns, inst.context.entities):
            yield tokenize(t, e, max_tokens)
        yield tokenize(inst.response, inst.response.entities, max_tokens)


def train_neural(dataset, cfg: Optional[NeuralConfig] = None, seed: int = 42,
                 text_cfg: Optional[TextConfig] = None,
                 vocab: Optional[Vocabulary] = None) -> Tuple[NeuralRanker, TrainingReport]:
    """
    Train a neural ranker on the train split with early stopping on the dev split. The bot roster is taken from the
    train split only, dev instances answered by other bots are left out of early stopping.
    :param dataset: Dataset from build_dataset().
    :param cfg: NeuralConfig.
    :param seed: Seed of initialization, shuffling and dropout.
    :param text_cfg: Tokenization settings.
    :param vocab: A prebuilt vocabulary, built from the train split if None.
    :return: (model, report)
    """
    cfg = cfg or NeuralConfig()
    text_cfg = text_cfg or TextConfig()
    roster = cfg.roster or dataset_roster(dataset.train)
    dev = [i for i in dataset.dev if i.response.bot in roster]
    if len(dev) < len(dataset.dev):
        log.warning('%d dev instances answered by bots outside the roster %s are not used',
                    len(dataset.dev) - len(dev), roster)
    if vocab is None:
        vocab = build_vocab(instance_tokens(dataset.train, text_cfg.max_tokens), text_cfg.max_vocab)
    model = NeuralRanker(vocab, roster, cfg, seed, text_cfg.max_tokens)
    report = fit_network(model, dataset.train, dev, cfg.learning_rate, cfg.batch_size, cfg.max_epochs,
                         cfg.patience, seed)
    return model, report


@dataclass
class GridRun:
    gru_size: int
    predictor: Tuple[int, ...]
    best_dev_loss: float
    best_epoch: int


@dataclass
class GridResult:
    model: NeuralRanker
    report: TrainingReport
    runs: List[GridRun] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = ['gru_size\tpredictor\tbest_dev_loss\tbest_epoch']
        for r in self.runs:
            lines.append('{}\t{}\t{:.6f}\t{}'.format(r.gru_size, ','.join(map(str, r.predictor)), r.best_dev_loss,
                                                    r.best_epoch))
        return '\n'.join(lines) + '\n'


def grid_search(dataset, cfg: Optional[NeuralConfig] = None, seed: int = 42, text_cfg: Optional[TextConfig] = None,
                gru_sizes: Sequence[int] = GRID_GRU_SIZES,
                layouts: Sequence[Sequence[int]] = GRID_LAYOUTS) -> GridResult:
    """
    Train one neural ranker per GRU size and predictor layout and keep the one with the lowest dev loss.
    Earlier configurations win ties.
    """
    cfg = cfg or NeuralConfig()
    text_cfg = text_cfg or TextConfig()
    vocab = build_vocab(instance_tokens(dataset.train, text_cfg.max_tokens), text_cfg.max_vocab)
    best = None
    runs = []
    for size in gru_sizes:
        for layout in layouts:
            run_cfg = replace(cfg, gru_size=size, predictor=list(layout))
            log.info('grid: gru %d, predictor %s', size, list(layout))
            model, report = train_neural(dataset, run_cfg, seed, text_cfg, vocab)
            runs.append(GridRun(size, tuple(layout), report.best_dev_loss, report.best_epoch))
            if best is None or report.best_dev_loss < best.report.best_dev_loss:
                best = GridResult(model, report)
    best.runs = runs
    log.info('grid: selected gru %d, predictor %s', best.model.cfg.gru_size, best.model.cfg.predictor)
    return best

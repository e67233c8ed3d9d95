"""
Linear regression over hashed n-gram, position, flow, bot and interaction features, trained by stochastic gradient
descent on the squared loss.
"""
from __future__ import annotations
import logging
import math
from typing import Dict, List, Optional, Tuple
import numpy as np
from dialrank.config import LinearConfig, TextConfig, from_dict, to_dict
from dialrank.errors import DataError, NonFiniteError, ShapeError
from dialrank.features import FlowFeaturizer
from dialrank.rankers.base import Ranker, register
from dialrank.textproc import words
from dialrank.tools import as_float32_exact, fnv1a_64, make_rng, progress

log = logging.getLogger(__name__)

TEMPLATES = ('context_ngram', 'response_ngram', 'context_position', 'response_position', 'flow', 'bot',
             'context_x_response', 'bot_x_response')
SIGN_BIT = 63


def ngrams(ws: List[str], n_max: int) -> List[str]:
    return [' '.join(ws[i:i + n]) for n in range(1, n_max + 1) for i in range(len(ws) - n + 1)]


class FeatureHasher:
    """
    Signed hashing of feature names into 2^bits buckets: the bucket is the FNV-1a hash modulo 2^bits, bit 63 of the
    hash selects the sign.
    """

    def __init__(self, bits: int):
        if not 1 <= bits <= 32:
            raise ValueError('bits must be in [1, 32], got {}'.format(bits))
        self.bits = bits
        self.size = 1 << bits
        self._cache: Dict[str, Tuple[int, float]] = {}

    def __call__(self, name: str) -> Tuple[int, float]:
        hit = self._cache.get(name)
        if hit is None:
            h = fnv1a_64(name)
            hit = (h & (self.size - 1), -1.0 if h >> SIGN_BIT else 1.0)
            if len(self._cache) > 2000000:
                self._cache.clear()
            self._cache[name] = hit
        return hit


def template_features(context, candidate, cfg: LinearConfig, featurizer: FlowFeaturizer) -> Dict[str, Dict[str, float]]:
    """
    Named features of a context-response pair, grouped by template. Bag templates count occurrences; every
    template except flow is later scaled by 1/sqrt(number of occurrences). Context positions are tagged with the
    turn counted from the end, 0 for the most recent. Interactions pair the distinct n-grams up to
    cfg.interaction_order of all context turns with those of the response.
    :param context: RankingContext.
    :param candidate: Candidate.
    :param cfg: LinearConfig with n-gram order and number of positions.
    :param featurizer: tf-idf featurizer of the flow features.
    :return: {template: {feature name: value}}
    """
    out = {t: {} for t in TEMPLATES}

    def add(template, name, value=1.0):
        bag = out[template]
        bag[name] = bag.get(name, 0.0) + value

    for t in context.turns:
        for g in ngrams(words(t.text), cfg.ngram_max):
            add('context_ngram', g)
    resp = words(candidate.text)
    for g in ngrams(resp, cfg.ngram_max):
        add('response_ngram', g)
    for k, t in enumerate(reversed(context.turns)):
        for i, w in enumerate(words(t.text)[:cfg.positions]):
            add('context_position', '{}:{}:{}'.format(k, i, w))
    for i, w in enumerate(resp[:cfg.positions]):
        add('response_position', '{}:{}'.format(i, w))
    flow = featurizer.features(context, candidate.text)
    out['flow'] = {'coherence': flow.coherence, 'information_flow': flow.information_flow,
                   'dullness': flow.dullness}
    add('bot', candidate.bot)
    context_grams = sorted({g for t in context.turns for g in ngrams(words(t.text), cfg.interaction_order)})
    response_grams = sorted(set(ngrams(resp, cfg.interaction_order)))
    for c in context_grams:
        for r in response_grams:
            add('context_x_response', '{}|{}'.format(c, r))
    for r in sorted(set(resp)):
        add('bot_x_response', '{}|{}'.format(candidate.bot, r))
    return out


@register
class LinearRanker(Ranker):
    kind = 'linear'

    def __init__(self, cfg: Optional[LinearConfig] = None, weights: Optional[np.ndarray] = None, bias: float = 0.0,
                 featurizer: Optional[FlowFeaturizer] = None, seed: int = 42):
        """
        Init the ranker, with zero weights unless given.
        :param cfg: LinearConfig.
        :param weights: Weight vector of 2^bits entries.
        :param bias: The bias.
        :param featurizer: Flow featurizer, plain term frequencies with the bundled dull phrases if None.
        :param seed: Seed of the training order.
        """
        self.cfg = cfg or LinearConfig()
        self.hasher = FeatureHasher(self.cfg.bits)
        if weights is None:
            weights = np.zeros(self.hasher.size)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.hasher.size,):
            raise ShapeError('linear ranker with {} bits needs {} weights, got {}'.format(
                self.cfg.bits, self.hasher.size, weights.shape))
        self.weights = weights
        self.bias = float(bias)
        self.featurizer = featurizer or FlowFeaturizer.from_config()
        self.seed = seed

    def features(self, context, candidate) -> Tuple[np.ndarray, np.ndarray]:
        """
        Hashed feature vector of a pair.
        :return: (indices, values), indices sorted and unique.
        """
        index = []
        values = []
        for template, bag in template_features(context, candidate, self.cfg, self.featurizer).items():
            if not bag:
                continue
            scale = 1.0 if template == 'flow' else 1.0 / math.sqrt(sum(bag.values()))
            for name, v in bag.items():
                i, sign = self.hasher(template + '=' + name)
                index.append(i)
                values.append(sign * v * scale)
        idx, inverse = np.unique(np.array(index, dtype=np.int64), return_inverse=True)
        merged = np.zeros(len(idx))
        np.add.at(merged, inverse, values)
        return idx, merged

    def raw_score(self, features: Tuple[np.ndarray, np.ndarray]) -> float:
        idx, values = features
        return float(self.weights[idx] @ values) + self.bias

    def score_many(self, pairs) -> np.ndarray:
        return np.array([min(1.0, max(0.0, self.raw_score(self.features(c, r)))) for c, r in pairs])

    def checkpoint(self):
        header = {'hyperparameters': to_dict(self.cfg), 'seed': self.seed,
                  'dull_phrases': list(self.featurizer.dull_phrases)}
        arrays = {'weights': self.weights, 'bias': np.array([self.bias])}
        if self.featurizer.idf is not None:
            arrays['idf'] = self.featurizer.idf
        return header, arrays

    @classmethod
    def from_checkpoint(cls, header, arrays) -> LinearRanker:
        featurizer = FlowFeaturizer(header.get('dull_phrases', ()), arrays.get('idf'))
        return cls(from_dict(LinearConfig, header['hyperparameters']), arrays['weights'], float(arrays['bias'][0]),
                   featurizer, header.get('seed', 42))


def linear_score(model: LinearRanker, context, candidate) -> float:
    """
    clamp(w . x + bias, 0, 1) of one pair.
    """
    return model.score(context, candidate)


def instance_texts(instances) -> List[str]:
    texts = []
    for inst in instances:
        texts.extend(t.text for t in inst.context.turns)
        texts.append(inst.response.text)
    return texts


def sgd_pass(model: LinearRanker, xs: List[Tuple[np.ndarray, np.ndarray]], ys: np.ndarray, order: np.ndarray,
             learning_rate: float) -> float:
    """
    One pass of w -= lr * (p - y) * x, b -= lr * (p - y) with p the unclamped prediction.
    :return: Mean squared error of the predictions made before each update.
    """
    total = 0.0
    for k in order:
        idx, values = xs[k]
        err = model.raw_score(xs[k]) - ys[k]
        if not math.isfinite(err):
            log.error('linear ranker: prediction error %s at instance %d, weight norm %.4g', err, k,
                      float(np.linalg.norm(model.weights)))
            raise NonFiniteError('linear.weights', 'instance {}'.format(k))
        total += err * err
        np.add.at(model.weights, idx, -learning_rate * err * values)
        model.bias -= learning_rate * err
    return total / max(1, len(order))


def train_linear(dataset, cfg: Optional[LinearConfig] = None, seed: int = 42,
                 text_cfg: Optional[TextConfig] = None) -> LinearRanker:
    """
    Fit the linear ranker on the train split. The idf of the flow features is learned from the train texts. Every
    pass visits the instances in an order drawn from the seed.
    :param dataset: Dataset from build_dataset().
    :param cfg: LinearConfig.
    :param seed: Seed of the visiting order.
    :param text_cfg: Location of the dull phrases.
    :return: The trained LinearRanker.
    """
    cfg = cfg or LinearConfig()
    if not dataset.train:
        raise DataError('no training instances')
    featurizer = FlowFeaturizer.from_config(text_cfg).fit(instance_texts(dataset.train))
    model = LinearRanker(cfg, featurizer=featurizer, seed=seed)
    xs = [model.features(i.context, i.response) for i in progress(dataset.train, desc='hashing features')]
    ys = np.array([i.target for i in dataset.train], dtype=np.float64)
    rng = make_rng(seed, 3)
    for p in range(1, cfg.passes + 1):
        loss = sgd_pass(model, xs, ys, rng.permutation(len(xs)), cfg.learning_rate)
        log.info('linear pass %d: train loss %.5f', p, loss)
    model.weights = as_float32_exact(model.weights)
    model.bias = float(as_float32_exact(np.array([model.bias]))[0])
    return model

"""
The handcrafted ranker: a sigmoid of a weighted sum of the six dialogue quality features.
"""
from __future__ import annotations
import logging
from typing import List, Optional, Sequence
import numpy as np
from dialrank.config import HandcraftedConfig, TextConfig, TopicConfig, from_dict, to_dict
from dialrank.errors import DataError, ShapeError
from dialrank.features import (N_HANDCRAFTED, FlowFeaturizer, context_words, handcrafted_feature_vector,
                               default_stopwords)
from dialrank.nodes.misc import sigmoid
from dialrank.rankers.base import Ranker, register
from dialrank.rankers.linear import instance_texts
from dialrank.textproc import read_lines, words
from dialrank.tools import make_rng
from dialrank.topics import TopicModel, fit_topics_from_config

log = logging.getLogger(__name__)


@register
class HandcraftedRanker(Ranker):
    kind = 'handcrafted'

    def __init__(self, topic_model: TopicModel, cfg: Optional[HandcraftedConfig] = None,
                 featurizer: Optional[FlowFeaturizer] = None, sweeps: int = 20, seed: int = 0,
                 coefficients: Optional[Sequence[float]] = None):
        """
        Init the ranker.
        :param topic_model: Trained TopicModel for the topic divergence.
        :param cfg: Coefficients, the bundled defaults if None.
        :param featurizer: Flow featurizer, plain term frequencies with the bundled dull phrases if None.
        :param sweeps: Gibbs sweeps of topic inference.
        :param seed: Seed of topic inference.
        :param coefficients: Explicit coefficient vector, overrides cfg.
        """
        self.cfg = cfg or HandcraftedConfig()
        c = np.asarray(self.cfg.coefficients() if coefficients is None else coefficients, dtype=np.float64)
        if c.shape != (N_HANDCRAFTED,):
            raise ShapeError('handcrafted ranker needs {} coefficients, got {}'.format(N_HANDCRAFTED, c.shape))
        self.coefficients = c
        self.topic_model = topic_model
        self.featurizer = featurizer or FlowFeaturizer.from_config()
        self.sweeps = sweeps
        self.seed = seed

    def features(self, context, candidate) -> np.ndarray:
        return handcrafted_feature_vector(context, candidate, self.topic_model, self.featurizer,
                                          stopwords=self.topic_model.stopwords or None, sweeps=self.sweeps,
                                          seed=self.seed)

    def score_from_features(self, f: np.ndarray) -> float:
        return float(sigmoid(float(self.coefficients @ f)))

    def score_many(self, pairs) -> np.ndarray:
        return np.array([self.score_from_features(self.features(c, r)) for c, r in pairs])

    def checkpoint(self):
        m = self.topic_model
        header = {'coefficients': [float(x) for x in self.coefficients], 'hyperparameters': to_dict(self.cfg),
                  'topics': m.topics, 'alpha': m.alpha, 'beta': m.beta, 'vocabulary': list(m.vocabulary),
                  'stopwords': sorted(m.stopwords), 'sweeps': self.sweeps, 'seed': self.seed,
                  'dull_phrases': list(self.featurizer.dull_phrases)}
        arrays = {'topic_counts': m.counts}
        if self.featurizer.idf is not None:
            arrays['idf'] = self.featurizer.idf
        return header, arrays

    @classmethod
    def from_checkpoint(cls, header, arrays) -> HandcraftedRanker:
        model = TopicModel(header['topics'], header['vocabulary'], header['alpha'], header['beta'],
                           arrays['topic_counts'], frozenset(header['stopwords']))
        featurizer = FlowFeaturizer(header.get('dull_phrases', ()), arrays.get('idf'))
        return cls(model, from_dict(HandcraftedConfig, header['hyperparameters']), featurizer, header['sweeps'],
                   header['seed'], header['coefficients'])


def handcrafted_score(model: HandcraftedRanker, context, candidate) -> float:
    """
    sigmoid(c . f) with f the handcrafted feature vector of the pair.
    """
    return model.score(context, candidate)


def topic_documents(instances, limit: int, seed: int) -> List[List[str]]:
    """
    Words of context and response of up to `limit` instances, drawn in a seeded order.
    """
    order = make_rng(seed, 4).permutation(len(instances))[:limit]
    return [context_words(instances[k].context) + words(instances[k].response.text) for k in sorted(order)]


def fit_handcrafted(dataset, cfg: Optional[HandcraftedConfig] = None, topic_cfg: Optional[TopicConfig] = None,
                    seed: int = 42, text_cfg: Optional[TextConfig] = None) -> HandcraftedRanker:
    """
    Prepare the handcrafted ranker: the coefficients are fixed, the topic model and the idf weights of the flow
    features are learned from the train split.
    :param dataset: Dataset from build_dataset().
    :param cfg: HandcraftedConfig with the coefficients.
    :param topic_cfg: TopicConfig.
    :param seed: Seed of document selection, Gibbs sampling and inference.
    :param text_cfg: Locations of stopwords and dull phrases.
    :return: HandcraftedRanker.
    """
    topic_cfg = topic_cfg or TopicConfig()
    text_cfg = text_cfg or TextConfig()
    if not dataset.train:
        raise DataError('no training instances')
    stopwords = frozenset(read_lines(text_cfg.stopwords)) if text_cfg.stopwords else default_stopwords()
    docs = topic_documents(dataset.train, topic_cfg.max_documents, seed)
    log.info('fitting %d topics on %d documents', topic_cfg.topics, len(docs))
    topic_model = fit_topics_from_config(docs, topic_cfg, seed, stopwords)
    featurizer = FlowFeaturizer.from_config(text_cfg).fit(instance_texts(dataset.train))
    return HandcraftedRanker(topic_model, cfg, featurizer, topic_cfg.inference_sweeps, seed)

"""
A small Latent Dirichlet Allocation topic model trained by collapsed Gibbs sampling, and the topic divergence
between a dialogue context and a response.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence
import numpy as np
from scipy.spatial.distance import jensenshannon
from dialrank.config import TopicConfig
from dialrank.errors import DataError, UntrainedModelError
from dialrank.tools import fnv1a_64, make_rng, progress

log = logging.getLogger(__name__)


@dataclass
class TopicModel:
    """
    Topic-word counts of a trained model. phi is derived from the counts, so it can be restored exactly from a
    checkpoint.
    """
    topics: int
    vocabulary: List[str]
    alpha: float
    beta: float
    counts: Optional[np.ndarray] = None  # K x V topic-word counts
    stopwords: frozenset = frozenset()
    index: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.topics < 2:
            raise ValueError('a topic model needs at least 2 topics')
        self.index = {w: i for i, w in enumerate(self.vocabulary)}

    @property
    def trained(self) -> bool:
        return self.counts is not None

    @property
    def phi(self) -> np.ndarray:
        """
        Topic-word distributions, K x V, rows sum to 1.
        """
        if self.counts is None:
            raise UntrainedModelError('topic model is not trained')
        return phi_from_counts(self.counts, self.beta)

    def word_ids(self, tokens: Iterable[str]) -> List[int]:
        return [self.index[t] for t in tokens if t in self.index]

    def infer(self, tokens: Sequence[str], sweeps: int = 20, seed: int = 0) -> np.ndarray:
        """
        Topic mixture of a document under fixed phi by Gibbs sampling. The sampler is seeded from the document
        itself, so equal documents always get equal mixtures.
        :param tokens: Words of the document, unknown words are ignored.
        :param sweeps: Number of Gibbs sweeps.
        :param seed: Base seed.
        :return: Mixture over topics, uniform for a document without known words.
        """
        if self.counts is None:
            raise UntrainedModelError('topic model is not trained')
        ids = self.word_ids(tokens)
        k = self.topics
        if not ids:
            return np.full(k, 1.0 / k)
        phi = self.phi
        rng = make_rng(seed, fnv1a_64(' '.join(self.vocabulary[i] for i in ids)))
        z = rng.integers(k, size=len(ids))
        ndk = np.bincount(z, minlength=k).astype(np.float64)
        for _ in range(sweeps):
            u = rng.random(len(ids))
            for n, w in enumerate(ids):
                ndk[z[n]] -= 1
                p = (ndk + self.alpha) * phi[:, w]
                c = np.cumsum(p)
                t = int(np.searchsorted(c, u[n] * c[-1], side='right'))
                t = min(t, k - 1)
                z[n] = t
                ndk[t] += 1
        return (ndk + self.alpha) / (len(ids) + k * self.alpha)


def phi_from_counts(counts: np.ndarray, beta: float) -> np.ndarray:
    v = counts.shape[1]
    return (counts + beta) / (counts.sum(axis=1, keepdims=True) + v * beta)


def fit_topics(documents: Sequence[Sequence[str]], topics: int = 20, iterations: int = 200, seed: int = 42,
               alpha: Optional[float] = None, beta: float = 0.01, stopwords: Iterable[str] = (),
               on_sweep: Optional[Callable[[int, np.ndarray], None]] = None) -> TopicModel:
    """
    Fit LDA by collapsed Gibbs sampling.
    :param documents: Tokenized documents (lowercased words).
    :param topics: Number of topics K >= 2.
    :param iterations: Number of Gibbs sweeps over all tokens.
    :param seed: Seed of the sampler.
    :param alpha: Document-topic prior, 50 / K if None.
    :param beta: Topic-word prior.
    :param stopwords: Words removed before fitting.
    :param on_sweep: Called with (sweep, phi) after every sweep, e.g. for monitoring.
    :return: The trained TopicModel.
    """
    if topics < 2:
        raise ValueError('a topic model needs at least 2 topics')
    alpha = 50.0 / topics if alpha is None else alpha
    stop = frozenset(stopwords)
    docs = [[w for w in d if w not in stop] for d in documents]
    vocabulary = sorted({w for d in docs for w in d})
    if not vocabulary:
        raise DataError('no words left after stopword removal')
    model = TopicModel(topics, vocabulary, alpha, beta, stopwords=stop)
    index = model.index
    v = len(vocabulary)
    rng = make_rng(seed)

    doc_words = [np.array([index[w] for w in d], dtype=np.int64) for d in docs]
    z = [rng.integers(topics, size=len(d)) for d in doc_words]
    nkw = np.zeros((topics, v))
    ndk = np.zeros((len(docs), topics))
    nk = np.zeros(topics)
    for d, (ws, zs) in enumerate(zip(doc_words, z)):
        np.add.at(nkw, (zs, ws), 1)
        np.add.at(ndk[d], zs, 1)
        np.add.at(nk, zs, 1)

    vbeta = v * beta
    for sweep in progress(range(iterations), desc='gibbs sweeps'):
        for d, (ws, zs) in enumerate(zip(doc_words, z)):
            u = rng.random(len(ws))
            for n in range(len(ws)):
                w = ws[n]
                t = zs[n]
                nkw[t, w] -= 1
                ndk[d, t] -= 1
                nk[t] -= 1
                p = (ndk[d] + alpha) * (nkw[:, w] + beta) / (nk + vbeta)
                c = np.cumsum(p)
                t = min(int(np.searchsorted(c, u[n] * c[-1], side='right')), topics - 1)
                zs[n] = t
                nkw[t, w] += 1
                ndk[d, t] += 1
                nk[t] += 1
        if on_sweep is not None:
            on_sweep(sweep, phi_from_counts(nkw, beta))
    model.counts = nkw
    log.info('fitted %d topics over %d documents, %d words', topics, len(docs), v)
    return model


def fit_topics_from_config(documents: Sequence[Sequence[str]], cfg: TopicConfig, seed: int,
                           stopwords: Iterable[str] = ()) -> TopicModel:
    return fit_topics(documents, cfg.topics, cfg.iterations, seed, cfg.alpha, cfg.beta, stopwords)


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """
    Jensen-Shannon divergence with log base 2, in [0, 1] and symmetric.
    """
    return float(np.clip(jensenshannon(p, q, base=2) ** 2, 0.0, 1.0))


def topic_divergence(model: TopicModel, context_tokens: Sequence[str], response_tokens: Sequence[str],
                     sweeps: int = 20, seed: int = 0) -> float:
    """
    Jensen-Shannon divergence between the topic mixtures of the concatenated context and of the response.
    :param model: Trained topic model.
    :param context_tokens: Words of all context turns.
    :param response_tokens: Words of the response.
    :return: Divergence in [0, 1].
    """
    if not model.trained:
        raise UntrainedModelError('topic model is not trained')
    p = model.infer([w for w in context_tokens if w not in model.stopwords], sweeps, seed)
    q = model.infer([w for w in response_tokens if w not in model.stopwords], sweeps, seed)
    return js_divergence(p, q)

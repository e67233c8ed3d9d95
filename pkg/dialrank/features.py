"""
Handcrafted dialogue quality features (coherence, information flow, dullness, entity overlap, topic divergence,
sentiment) and the side-feature vector the neural ranker appends to its semantic layer.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence
import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer, TfidfTransformer
from dialrank.config import TextConfig
from dialrank.errors import ShapeError, UnknownBotError
from dialrank.textproc import SentimentLexicon, default_lexicon, read_lines, sentiment_score, words
from dialrank.tools import as_float32_exact
from dialrank.topics import topic_divergence

log = logging.getLogger(__name__)

HASH_FEATURES = 2 ** 18
TURN_INDEX_CAP = 50
ELAPSED_CAP = 3600.0
SECONDS_PER_DAY = 86400.0
N_HANDCRAFTED = 6
HANDCRAFTED_NAMES = ('coherence', 'information_flow', 'dullness', 'entity_overlap', 'topic_divergence',
                     'response_sentiment')
SIDE_SCALARS = ('context_sentiment', 'response_sentiment', 'time_sin', 'time_cos', 'turn_index_norm',
                'elapsed_norm')


@dataclass(frozen=True)
class FlowFeatures:
    coherence: float
    information_flow: float
    dullness: float

    def __post_init__(self):
        for name in ('coherence', 'information_flow', 'dullness'):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError('{} outside [0, 1]: {}'.format(name, v))


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, float(x)))


def _dot(a: Dict[int, float], b: Dict[int, float]) -> float:
    if len(a) > len(b):
        a, b = b, a
    return sum(v * b.get(k, 0.0) for k, v in a.items())


def _norm(a: Dict[int, float]) -> float:
    return math.sqrt(sum(v * v for v in a.values()))


def cosine(a: Dict[int, float], b: Dict[int, float]) -> float:
    """
    Cosine similarity of two sparse vectors, 0 if one of them is zero.
    """
    na, nb = _norm(a), _norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return _dot(a, b) / (na * nb)


class FlowFeaturizer:
    """
    tf-idf vectors over hashed words and the three flow features built on them. Without fit() every word has
    idf 1 (plain term frequencies).
    """

    def __init__(self, dull_phrases: Iterable[str] = (), idf: Optional[np.ndarray] = None):
        """
        Init the featurizer.
        :param dull_phrases: Generic low-information responses.
        :param idf: Learned inverse document frequencies over the hashed feature space, or None.
        """
        self.hasher = HashingVectorizer(analyzer=words, n_features=HASH_FEATURES, alternate_sign=False, norm=None)
        self.idf = idf
        self._cache = {}
        self.dull_phrases = list(dull_phrases)
        self.dull_vectors = [v for v in (self.vector(p) for p in self.dull_phrases) if v]

    @staticmethod
    def from_config(cfg: Optional[TextConfig] = None, idf: Optional[np.ndarray] = None) -> FlowFeaturizer:
        cfg = cfg or TextConfig()
        return FlowFeaturizer(read_lines(cfg.dull_phrases), idf)

    def fit(self, texts: Iterable[str]) -> FlowFeaturizer:
        """
        Learn idf weights (smoothed, as sklearn does it) from a collection of texts.
        """
        counts = self.hasher.transform(list(texts))
        transformer = TfidfTransformer(norm=None, smooth_idf=True, sublinear_tf=False).fit(counts)
        self.idf = as_float32_exact(transformer.idf_)
        self._cache.clear()
        self.dull_vectors = [v for v in (self.vector(p) for p in self.dull_phrases) if v]
        log.debug('flow featurizer: idf fitted on %d texts', counts.shape[0])
        return self

    def vector(self, text: str) -> Dict[int, float]:
        """
        Sparse tf-idf vector of a text as {hashed index: weight}.
        """
        v = self._cache.get(text)
        if v is None:
            row = self.hasher.transform([text])
            if self.idf is None:
                v = {int(i): float(x) for i, x in zip(row.indices, row.data)}
            else:
                v = {int(i): float(x) * float(self.idf[i]) for i, x in zip(row.indices, row.data)}
            if len(self._cache) > 200000:
                self._cache.clear()
            self._cache[text] = v
        return v

    def context_vector(self, context) -> Dict[int, float]:
        """
        Average of the length normalized tf-idf vectors of the context turns.
        """
        total = {}
        n = 0
        for t in context.turns:
            v = self.vector(t.text)
            nv = _norm(v)
            if nv == 0.0:
                continue
            for k, x in v.items():
                total[k] = total.get(k, 0.0) + x / nv
            n += 1
        return {k: x / n for k, x in total.items()} if n else {}

    def features(self, context, response_text: str) -> FlowFeatures:
        r = self.vector(response_text)
        if not r:
            return FlowFeatures(0.0, 1.0, 0.0)
        coherence = cosine(self.context_vector(context), r)
        last = context.last_system_turn()
        information_flow = 1.0 - cosine(self.vector(last.text), r) if last is not None else 1.0
        dullness = max((cosine(d, r) for d in self.dull_vectors), default=0.0)
        return FlowFeatures(_clamp01(coherence), _clamp01(information_flow), _clamp01(dullness))


_DEFAULT_FLOW = None


def default_flow_featurizer() -> FlowFeaturizer:
    global _DEFAULT_FLOW
    if _DEFAULT_FLOW is None:
        _DEFAULT_FLOW = FlowFeaturizer.from_config()
    return _DEFAULT_FLOW


def flow_features(context, response, featurizer: Optional[FlowFeaturizer] = None) -> FlowFeatures:
    """
    Coherence (cosine of the averaged context and the response), information flow (1 - cosine of the last system
    turn and the response) and dullness (highest cosine of the response to a dull phrase), all in [0, 1].
    :param context: RankingContext.
    :param response: Candidate or response text.
    :param featurizer: tf-idf featurizer, the bundled dull phrases without idf if None.
    :return: FlowFeatures.
    """
    featurizer = featurizer or default_flow_featurizer()
    text = response if isinstance(response, str) else response.text
    return featurizer.features(context, text)


# ---------------------------------------------------------------------------------------------------------------
# Entities and noun phrases

_DEFAULT_STOPWORDS = None


def default_stopwords() -> frozenset:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = frozenset(read_lines(TextConfig().stopwords))
    return _DEFAULT_STOPWORDS


def content_bigrams(text: str, stopwords: Optional[frozenset] = None) -> List[str]:
    """
    Adjacent content-word pairs, the noun phrase approximation: "the star wars movie" -> star_wars, wars_movie.
    """
    stopwords = default_stopwords() if stopwords is None else stopwords
    ws = words(text)
    return ['{}_{}'.format(a, b) for a, b in zip(ws, ws[1:])
            if a not in stopwords and b not in stopwords and not a.isdigit() and not b.isdigit()]


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / float(len(union))


def entity_overlap(context, response, stopwords: Optional[frozenset] = None) -> float:
    """
    Jaccard overlap between the entities and noun phrases of all context turns and those of the response.
    :param context: RankingContext with entities per turn.
    :param response: Candidate with entities.
    :return: Overlap in [0, 1], 0 if both sets are empty.
    """
    ctx = set()
    for t, ents in zip(context.turns, context.entities):
        ctx.update(ents)
        ctx.update(content_bigrams(t.text, stopwords))
    resp = set(response.entities)
    resp.update(content_bigrams(response.text, stopwords))
    return jaccard(ctx, resp)


# ---------------------------------------------------------------------------------------------------------------
# Side features


@dataclass(frozen=True)
class SideFeatureVector:
    context_sentiment: float
    response_sentiment: float
    time_sin: float
    time_cos: float
    turn_index_norm: float
    elapsed_norm: float
    bot_onehot: tuple
    context_bot_bag: tuple

    def as_array(self) -> np.ndarray:
        return np.array([self.context_sentiment, self.response_sentiment, self.time_sin, self.time_cos,
                         self.turn_index_norm, self.elapsed_norm] + list(self.bot_onehot) +
                        list(self.context_bot_bag), dtype=np.float64)


def side_feature_size(roster: Sequence[str]) -> int:
    return len(SIDE_SCALARS) + 2 * len(roster)


def hour_encoding(timestamp: float):
    """
    Cyclic hour-of-day encoding of a UTC timestamp, (0, 1) at midnight.
    """
    phase = 2.0 * math.pi * (timestamp % SECONDS_PER_DAY) / SECONDS_PER_DAY
    return math.sin(phase), math.cos(phase)


def side_features(context, response, roster: Sequence[str],
                  lexicon: Optional[SentimentLexicon] = None) -> SideFeatureVector:
    """
    Side features of a context-response pair: sentiment of context (mean over turns) and response, hour of day of
    the last context turn, turn index and elapsed time of the response, the response bot and the bag of context
    bots. Bots in the context that are not on the roster are ignored.
    :param context: RankingContext.
    :param response: Candidate.
    :param roster: Ordered bot roster of the model.
    :param lexicon: Sentiment lexicon, bundled default if None.
    :return: SideFeatureVector.
    """
    lexicon = lexicon or default_lexicon()
    index = {b: i for i, b in enumerate(roster)}
    if response.bot not in index:
        raise UnknownBotError(response.bot)
    if context.turns:
        context_sentiment = math.fsum(sentiment_score(t.text, lexicon) for t in context.turns) / len(context.turns)
    else:
        context_sentiment = 0.0
    response_sentiment = sentiment_score(response.text, lexicon)
    ts = context.timestamp
    time_sin, time_cos = hour_encoding(ts)
    turn_index_norm = min(context.position, TURN_INDEX_CAP) / float(TURN_INDEX_CAP)
    elapsed = max(0.0, ts - context.start_time)
    elapsed_norm = min(1.0, math.log1p(elapsed) / math.log1p(ELAPSED_CAP))

    onehot = [0.0] * len(roster)
    onehot[index[response.bot]] = 1.0
    bag = [0.0] * len(roster)
    for t in context.turns:
        if not t.is_user and t.agent in index:
            bag[index[t.agent]] += 1.0
    total = sum(bag)
    if total:
        bag = [b / total for b in bag]
    return SideFeatureVector(context_sentiment, response_sentiment, time_sin, time_cos, turn_index_norm,
                             elapsed_norm, tuple(onehot), tuple(bag))


def side_feature_array(context, response, roster: Sequence[str], lexicon: Optional[SentimentLexicon] = None,
                       size: Optional[int] = None) -> np.ndarray:
    """
    side_features() as a flat array, checked against the size a model expects.
    """
    f = side_features(context, response, roster, lexicon).as_array()
    if size is not None and f.shape[0] != size:
        raise ShapeError('side feature dimension {} does not match the model ({})'.format(f.shape[0], size))
    return f


# ---------------------------------------------------------------------------------------------------------------
# Handcrafted vector


def context_words(context) -> List[str]:
    return [w for t in context.turns for w in words(t.text)]


def handcrafted_feature_vector(context, response, model, featurizer: Optional[FlowFeaturizer] = None,
                               lexicon: Optional[SentimentLexicon] = None, stopwords: Optional[frozenset] = None,
                               sweeps: int = 20, seed: int = 0) -> np.ndarray:
    """
    The six handcrafted features in the order of HANDCRAFTED_NAMES: coherence, information_flow, dullness,
    entity_overlap, topic_divergence, response_sentiment.
    :param context: RankingContext.
    :param response: Candidate.
    :param model: Trained TopicModel.
    :return: Array of length 6.
    """
    flow = flow_features(context, response, featurizer)
    overlap = entity_overlap(context, response, stopwords)
    divergence = topic_divergence(model, context_words(context), words(response.text), sweeps, seed)
    sentiment = sentiment_score(response.text, lexicon or default_lexicon())
    return np.array([flow.coherence, flow.information_flow, flow.dullness, overlap, divergence, sentiment],
                    dtype=np.float64)

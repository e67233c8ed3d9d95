"""
Evaluation: precision at k, pairwise precision at 1 on explicit feedback tuples, test set loss, the Pearson
correlation study of rating, length and feedback, learning curves over the training set size and the comparison
of all rankers.
"""
from __future__ import annotations
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import numpy as np
from scipy import stats
from dialrank.config import Config
from dialrank.corpus import NEGATIVE, POSITIVE, Corpus, FeedbackDetector, build_dataset
from dialrank.errors import DataError, FeedbackSetError, InsufficientDataError, UndefinedCorrelationError
from dialrank.nodes.dense import mse_loss
from dialrank.rankers import train_ranker
from dialrank.tools import progress

log = logging.getLogger(__name__)

CONFIDENCE = 0.95


def precision_at_k(context, ranked: Sequence, relevant: Callable, k: int) -> float:
    """
    Share of the k best ranked candidates that are relevant.
    :param context: RankingContext the candidates were ranked for.
    :param ranked: Candidates best first, or the (candidate, score) pairs of rank().
    :param relevant: Predicate relevant(context, candidate).
    :param k: Cut-off, 1 <= k <= len(ranked).
    :return: Precision in [0, 1].
    """
    if k < 1:
        raise ValueError('k must be at least 1, got {}'.format(k))
    if k > len(ranked):
        raise DataError('k = {} exceeds the {} ranked candidates'.format(k, len(ranked)))
    top = [c[0] if isinstance(c, tuple) else c for c in ranked[:k]]
    return sum(1 for c in top if relevant(context, c)) / float(k)


def wilson_interval(successes: int, n: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """
    Wilson score interval of a binomial proportion.
    """
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=confidence, method='wilson')
    return float(ci.low), float(ci.high)


@dataclass
class EvalReport:
    p_at_1: float
    n_tuples: int
    margins: List[float] = field(default_factory=list)
    mean_margin: float = 0.0
    ci_low: float = 0.0
    ci_high: float = 1.0
    test_loss: Optional[float] = None

    def summary(self) -> dict:
        return {'p_at_1': self.p_at_1, 'n_tuples': self.n_tuples, 'mean_margin': self.mean_margin,
                'ci_low': self.ci_low, 'ci_high': self.ci_high, 'test_loss': self.test_loss}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def to_tsv(self) -> str:
        rows = ['metric\tvalue']
        for k, v in self.summary().items():
            rows.append('{}\t{}'.format(k, '-' if v is None else _fmt(v)))
        return '\n'.join(rows) + '\n'


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else '{:.6f}'.format(v)


def pairwise_eval(ranker, tuples: Sequence) -> EvalReport:
    """
    Pairwise precision at 1: the share of tuples whose good response scores strictly higher than the bad one. Ties
    count as wrong. The ranker is only read.
    :param ranker: Any Ranker.
    :param tuples: FeedbackTuples, at least one.
    :return: EvalReport with margins score(good) - score(bad) per tuple.
    """
    if not tuples:
        raise FeedbackSetError('no feedback tuples to evaluate')
    good = ranker.score_many([(t.context, t.good_response) for t in tuples])
    bad = ranker.score_many([(t.context, t.bad_response) for t in tuples])
    margins = good - bad
    correct = int(np.sum(margins > 0))
    n = len(tuples)
    low, high = wilson_interval(correct, n)
    report = EvalReport(correct / float(n), n, [float(m) for m in margins], float(np.mean(margins)), low, high)
    log.info('%s ranker: P@1 %.4f on %d tuples (%.4f - %.4f)', ranker.kind, report.p_at_1, n, low, high)
    return report


def testset_loss(ranker, instances: Sequence) -> float:
    """
    Mean squared error of the scores against the instance targets.
    """
    if not instances:
        raise DataError('empty test split')
    scores = ranker.score_many([(i.context, i.response) for i in instances])
    return mse_loss(scores, [i.target for i in instances])


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Pearson product-moment correlation.
    :raises UndefinedCorrelationError: Fewer than 2 points or zero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError('pearson needs two sequences of equal length, got {} and {}'.format(x.shape, y.shape))
    if len(x) < 2:
        raise UndefinedCorrelationError('correlation of fewer than 2 points')
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError('correlation with a constant sequence')
    return float(np.clip(stats.pearsonr(x, y)[0], -1.0, 1.0))


CORRELATION_PAIRS = (('rating', 'length'), ('rating', 'positive_feedback'), ('rating', 'negative_feedback'),
                     ('length', 'positive_feedback'), ('length', 'negative_feedback'))


@dataclass
class CorrelationRow:
    x: str
    y: str
    value: Optional[float]
    n: int


@dataclass
class CorrelationReport:
    rows: List[CorrelationRow]

    def get(self, x: str, y: str) -> Optional[float]:
        for r in self.rows:
            if (r.x, r.y) == (x, y):
                return r.value
        raise KeyError((x, y))

    def to_tsv(self) -> str:
        lines = ['x\ty\tpearson\tn']
        for r in self.rows:
            lines.append('{}\t{}\t{}\t{}'.format(r.x, r.y, 'undefined' if r.value is None else
                                                 '{:.6f}'.format(r.value), r.n))
        return '\n'.join(lines) + '\n'


def correlation_study(corpus: Corpus, positive: Optional[FeedbackDetector] = None,
                      negative: Optional[FeedbackDetector] = None) -> CorrelationReport:
    """
    Pearson correlations between the rating, the length and the number of positive and negative feedback turns of
    the dialogues. Pairs with the rating only use rated dialogues. A pair that cannot be computed is undefined.
    :param corpus: The corpus.
    :param positive: Positive feedback detector, bundled lists if None.
    :param negative: Negative feedback detector, bundled lists if None.
    :return: CorrelationReport with five rows.
    """
    positive = positive or FeedbackDetector.from_config(polarity=POSITIVE)
    negative = negative or FeedbackDetector.from_config(polarity=NEGATIVE)
    columns = {'rating': [], 'length': [], 'positive_feedback': [], 'negative_feedback': []}
    rated = []
    for d in progress(corpus, desc='counting feedback'):
        columns['rating'].append(d.rating)
        columns['length'].append(d.length)
        columns['positive_feedback'].append(positive.count(d))
        columns['negative_feedback'].append(negative.count(d))
        rated.append(d.rating is not None)
    rows = []
    for x, y in CORRELATION_PAIRS:
        keep = rated if 'rating' in (x, y) else [True] * len(rated)
        xs = [v for v, k in zip(columns[x], keep) if k]
        ys = [v for v, k in zip(columns[y], keep) if k]
        try:
            value = pearson(xs, ys)
        except UndefinedCorrelationError as e:
            log.warning('%s / %s: %s', x, y, e)
            value = None
        rows.append(CorrelationRow(x, y, value, len(xs)))
    return CorrelationReport(rows)


@dataclass
class CurvePoint:
    ranker: str
    size: int
    p_at_1: float


@dataclass
class LearningCurve:
    points: List[CurvePoint] = field(default_factory=list)

    def series(self, name: str) -> List[Tuple[int, float]]:
        return [(p.size, p.p_at_1) for p in self.points if p.ranker == name]

    def names(self) -> List[str]:
        return sorted({p.ranker for p in self.points})

    def to_tsv(self) -> str:
        lines = ['ranker\tsize\tp_at_1']
        for p in self.points:
            lines.append('{}\t{}\t{:.6f}'.format(p.ranker, p.size, p.p_at_1))
        return '\n'.join(lines) + '\n'


def learning_curve(corpus: Corpus, tuples: Sequence, kinds: Sequence[str], sizes: Sequence[int], seed: int = 42,
                   cfg: Optional[Config] = None, rating_baseline: bool = True) -> LearningCurve:
    """
    Train every ranker kind on length datasets of growing size and evaluate all of them on the same held-out
    feedback tuples. With rating_baseline, every kind is also trained once on a rating dataset of the smallest size
    and shown as the constant series <kind>@rating.
    :param corpus: Filtered training corpus, disjoint from the dialogues of the tuples.
    :param tuples: Held-out feedback tuples.
    :param kinds: Ranker kinds.
    :param sizes: Strictly increasing dataset sizes.
    :param seed: Seed of dataset sampling and training.
    :param cfg: Configuration.
    :param rating_baseline: Add the rating series.
    :return: LearningCurve with one point per (series, size).
    """
    cfg = cfg or Config()
    sizes = list(sizes)
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DataError('sizes must be non-empty and strictly increasing, got {}'.format(sizes))
    if not tuples:
        raise FeedbackSetError('no feedback tuples to evaluate')
    curve = LearningCurve()
    for size in sizes:
        dataset = build_dataset(corpus, 'length', size, seed, cfg.corpus)
        for kind in kinds:
            log.info('learning curve: %s at %d instances', kind, size)
            ranker, _ = train_ranker(kind, dataset, cfg, seed)
            curve.points.append(CurvePoint('{}@length'.format(kind), size, pairwise_eval(ranker, tuples).p_at_1))
    if rating_baseline:
        try:
            dataset = build_dataset(corpus, 'rating', sizes[0], seed, cfg.corpus)
        except InsufficientDataError as e:
            log.warning('no rating baseline: %s', e)
            return curve
        for kind in kinds:
            ranker, _ = train_ranker(kind, dataset, cfg, seed)
            p = pairwise_eval(ranker, tuples).p_at_1
            curve.points.extend(CurvePoint('{}@rating'.format(kind), size, p) for size in sizes)
    return curve


@dataclass
class ComparisonRow:
    ranker: str
    signal: str
    p_at_1: float
    ci_low: float
    ci_high: float
    test_loss: Optional[float]


@dataclass
class Comparison:
    rows: List[ComparisonRow] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = ['ranker\tsignal\tp_at_1\tci_low\tci_high\ttest_loss']
        for r in self.rows:
            lines.append('{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\t{}'.format(
                r.ranker, r.signal, r.p_at_1, r.ci_low, r.ci_high,
                '-' if r.test_loss is None else '{:.6f}'.format(r.test_loss)))
        return '\n'.join(lines) + '\n'

    def to_json_lines(self) -> str:
        return ''.join(json.dumps(asdict(r), sort_keys=True) + '\n' for r in self.rows)


UNTRAINED_KINDS = ('handcrafted', 'random')


def compare_rankers(corpus: Corpus, tuples: Sequence, kinds: Sequence[str], size: int, seed: int = 42,
                    cfg: Optional[Config] = None, signals: Sequence[str] = ('length', 'rating')) -> Comparison:
    """
    Train every kind on a length and a rating dataset of the same size and report P@1 on the feedback tuples and the
    loss on the test split. Rankers that are not fitted to the targets report no loss.
    """
    cfg = cfg or Config()
    result = Comparison()
    datasets: Dict[str, object] = {s: build_dataset(corpus, s, size, seed, cfg.corpus) for s in signals}
    for signal in signals:
        dataset = datasets[signal]
        for kind in kinds:
            ranker, _ = train_ranker(kind, dataset, cfg, seed)
            report = pairwise_eval(ranker, tuples)
            loss = None if kind in UNTRAINED_KINDS or not dataset.test else testset_loss(ranker, dataset.test)
            result.rows.append(ComparisonRow(kind, signal, report.p_at_1, report.ci_low, report.ci_high, loss))
    return result

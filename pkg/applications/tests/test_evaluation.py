from fractions import Fraction
import numpy as np
import pytest
from dialrank.corpus import NEGATIVE, POSITIVE, USER, Candidate, Corpus, FeedbackTuple, RankingContext, \
    TrainingInstance
from dialrank.errors import DataError, FeedbackSetError, UndefinedCorrelationError
from dialrank.evaluation import (compare_rankers, correlation_study, learning_curve, pairwise_eval, pearson,
                                 precision_at_k, testset_loss, wilson_interval)
from dialrank.rankers import RandomRanker, rank
from dialrank.rankers.base import Ranker
from applications.tests.helpers import make_context, make_dialogue, small_config, small_split

testset_loss.__test__ = False  # library function, not a pytest test

EMPTY = RankingContext((), (), 0, 0.0)


class LookupRanker(Ranker):
    """
    Scores by the candidate text, unknown texts get `default`.
    """
    kind = 'lookup'

    def __init__(self, scores=None, default=0.5):
        self.scores = scores or {}
        self.default = default

    def score_many(self, pairs):
        return np.array([self.scores.get(c.text, self.default) for _, c in pairs])

    def checkpoint(self):
        return {}, {}

    @classmethod
    def from_checkpoint(cls, header, arrays):
        return cls()


def _tuples(n):
    ctx = make_context([(USER, 'hello')])
    return [FeedbackTuple(ctx, Candidate('factbot', 'good {}'.format(k)), Candidate('persona', 'bad {}'.format(k)),
                          'd{}'.format(k), 'e{}'.format(k)) for k in range(n)]


def _swap(tuples):
    return [FeedbackTuple(t.context, t.bad_response, t.good_response, t.bad_dialogue, t.source_dialogue)
            for t in tuples]


def test_precision_at_k():
    cands = [Candidate('factbot', t) for t in ('a', 'b', 'c')]
    ranked = rank(LookupRanker({'a': 0.2, 'b': 0.9, 'c': 0.5}), EMPTY, cands)
    relevant = lambda ctx, c: c.text in ('b', 'a')
    assert precision_at_k(EMPTY, ranked, relevant, 1) == 1.0
    assert precision_at_k(EMPTY, ranked, relevant, 2) == 0.5
    assert precision_at_k(EMPTY, [c for c, _ in ranked], relevant, 3) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        precision_at_k(EMPTY, ranked, relevant, 0)
    with pytest.raises(DataError):
        precision_at_k(EMPTY, ranked, relevant, 4)


def test_pairwise_perfect_and_ties():
    tuples = _tuples(10)
    perfect = LookupRanker({'good {}'.format(k): 0.8 for k in range(10)}, default=0.2)
    report = pairwise_eval(perfect, tuples)
    assert report.p_at_1 == 1.0
    assert report.n_tuples == 10
    assert report.mean_margin == pytest.approx(0.6)
    assert pairwise_eval(LookupRanker(), tuples).p_at_1 == 0.0


def test_pairwise_antisymmetry():
    tuples = _tuples(200)
    ranker = RandomRanker(3)
    p = pairwise_eval(ranker, tuples).p_at_1
    assert pairwise_eval(ranker, _swap(tuples)).p_at_1 == pytest.approx(1.0 - p)


def test_pairwise_random_ranker():
    report = pairwise_eval(RandomRanker(7), _tuples(10000))
    assert abs(report.p_at_1 - 0.5) < 0.02
    assert report.ci_low < 0.5 < report.ci_high


def test_pairwise_empty():
    with pytest.raises(FeedbackSetError):
        pairwise_eval(RandomRanker(), [])


def test_wilson_interval():
    low, high = wilson_interval(50, 100)
    assert low == pytest.approx(0.4038, abs=1e-3)
    assert high == pytest.approx(0.5962, abs=1e-3)
    low, high = wilson_interval(0, 10)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert 0.0 < high < 0.35


def test_report_formats():
    report = pairwise_eval(LookupRanker({'good 0': 1.0}, default=0.0), _tuples(4))
    assert report.p_at_1 == 0.25
    lines = report.to_tsv().splitlines()
    assert lines[0] == 'metric\tvalue'
    assert 'p_at_1\t0.250000' in lines
    assert 'n_tuples\t4' in lines
    assert 'test_loss\t-' in lines
    assert '"p_at_1": 0.25' in report.to_json()


def test_testset_loss():
    ctx = make_context([(USER, 'hi')])
    instances = [TrainingInstance(ctx, Candidate('factbot', 'x'), 1.0, POSITIVE, 'a'),
                 TrainingInstance(ctx, Candidate('factbot', 'y'), 0.2, NEGATIVE, 'b')]
    assert testset_loss(LookupRanker(default=0.6), instances) == pytest.approx(0.16)
    with pytest.raises(DataError):
        testset_loss(LookupRanker(), [])


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(UndefinedCorrelationError):
        pearson([1], [2])
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(DataError):
        pearson([1, 2], [1, 2, 3])


def _exact_pearson(x, y):
    n = len(x)
    mx, my = Fraction(sum(x), n), Fraction(sum(y), n)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return float(sxy) / (float(sxx) * float(syy)) ** 0.5


def test_pearson_matches_exact_arithmetic():
    rng = np.random.default_rng(0)
    x = [int(v) for v in rng.integers(0, 50, size=200)]
    y = [int(a + b) for a, b in zip(x, rng.integers(-30, 30, size=200))]
    assert pearson(x, y) == pytest.approx(_exact_pearson(x, y), abs=1e-12)


def test_pearson_invariant_to_scale_and_shift():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert pearson(3.0 * x + 7.0, y) == pytest.approx(pearson(x, y), abs=1e-12)
    assert pearson(-x, y) == pytest.approx(-pearson(x, y), abs=1e-12)


def test_correlation_study():
    dialogues = [make_dialogue('d{}'.format(n), n, rating=n - 2) for n in range(3, 8)]
    dialogues.append(make_dialogue('unrated', 9))
    report = correlation_study(Corpus(tuple(dialogues)))
    assert report.get('rating', 'length') == pytest.approx(1.0)
    assert [r.n for r in report.rows] == [5, 5, 5, 6, 6]
    # no feedback turns at all
    assert report.get('rating', 'positive_feedback') is None
    assert report.get('length', 'negative_feedback') is None
    lines = report.to_tsv().splitlines()
    assert len(lines) == 6
    assert 'undefined' in lines[2]


def test_learning_curve():
    corpus, tuples = small_split()
    curve = learning_curve(corpus, tuples, ['random', 'linear'], [40, 80], seed=1, cfg=small_config())
    assert {'random@length', 'linear@length'} <= set(curve.names())
    assert [s for s, _ in curve.series('linear@length')] == [40, 80]
    assert all(0.0 <= p.p_at_1 <= 1.0 for p in curve.points)
    for name in curve.names():
        if name.endswith('@rating'):
            assert len({p for _, p in curve.series(name)}) == 1
    assert curve.to_tsv().splitlines()[0] == 'ranker\tsize\tp_at_1'
    with pytest.raises(DataError):
        learning_curve(corpus, tuples, ['random'], [80, 40])
    with pytest.raises(FeedbackSetError):
        learning_curve(corpus, [], ['random'], [40])


def test_compare_rankers():
    corpus, tuples = small_split()
    result = compare_rankers(corpus, tuples, ['random', 'linear'], 40, seed=1, cfg=small_config(),
                             signals=('length',))
    assert [(r.ranker, r.signal) for r in result.rows] == [('random', 'length'), ('linear', 'length')]
    assert result.rows[0].test_loss is None
    assert result.rows[1].test_loss >= 0.0
    assert len(result.to_tsv().splitlines()) == 3
    assert len(result.to_json_lines().splitlines()) == 2

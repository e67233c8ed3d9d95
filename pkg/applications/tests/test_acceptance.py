"""
End-to-end checks on full size synthetic corpora. They take minutes, run them with --runslow.
"""
from collections import Counter
import numpy as np
import pytest
from dialrank.cli import EXIT_OK, dispatch
from dialrank.config import Config, GeneratorConfig
from dialrank.corpus import NEGATIVE, POSITIVE, RankingContext, build_dataset, filter_corpus
from dialrank.evaluation import correlation_study, learning_curve, pairwise_eval
from dialrank.rankers import load_checkpoint, save_checkpoint, train_ranker
from dialrank.synthgen import generate_corpus, plant_eval_split

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def default_corpus():
    return generate_corpus(GeneratorConfig())


@pytest.fixture(scope='module')
def default_split(default_corpus):
    corpus, _ = filter_corpus(default_corpus)
    return plant_eval_split(corpus, 0.1, seed=42)


@pytest.fixture(scope='module')
def neural_at_length(default_split):
    train, _ = default_split
    ranker, _ = train_ranker('neural', build_dataset(train, 'length', 100000, 42), Config(), 42)
    return ranker


def test_correlation_pattern(default_corpus):
    report = correlation_study(default_corpus)
    assert report.get('length', 'positive_feedback') >= 0.5
    assert abs(report.get('rating', 'length')) <= 0.3


def test_planted_signal(default_split, neural_at_length):
    train, tuples = default_split
    assert pairwise_eval(neural_at_length, tuples).p_at_1 >= 0.80
    handcrafted, _ = train_ranker('handcrafted', build_dataset(train, 'length', 10000, 42), Config(), 42)
    assert pairwise_eval(handcrafted, tuples).p_at_1 >= 0.55
    random, _ = train_ranker('random', None, Config(), 42)
    assert abs(pairwise_eval(random, tuples).p_at_1 - 0.5) <= 0.02


def test_neural_permutation_trials(default_split, neural_at_length):
    _, tuples = default_split
    rng = np.random.default_rng(0)
    contexts = [t.context for t in tuples if len(t.context.turns) > 1]
    for trial in range(1000):
        ctx = contexts[trial % len(contexts)]
        cand = tuples[trial % len(tuples)].good_response
        order = rng.permutation(len(ctx.turns))
        permuted = RankingContext(tuple(ctx.turns[k] for k in order), tuple(ctx.entities[k] for k in order),
                                  ctx.position, ctx.start_time)
        assert neural_at_length.score(ctx, cand) == neural_at_length.score(permuted, cand)


def test_checkpoint_scores_survive_reload(default_split, tmp_path):
    train, tuples = default_split
    dataset = build_dataset(train, 'length', 2000, 42)
    pairs = [(t.context, t.good_response) for t in tuples[:500]] + [(t.context, t.bad_response) for t in tuples[:500]]
    for kind in ('neural', 'dual_encoder', 'linear', 'handcrafted'):
        ranker, _ = train_ranker(kind, dataset, Config(), 42)
        before = ranker.score_many(pairs)
        save_checkpoint(ranker, tmp_path / kind)
        assert np.array_equal(load_checkpoint(tmp_path / kind).score_many(pairs), before)


def test_dataset_invariants():
    corpus, _ = filter_corpus(generate_corpus(GeneratorConfig(n_dialogues=5000)))
    for signal in ('length', 'rating'):
        dataset = build_dataset(corpus, signal, 2000, 42)
        instances = dataset.train + dataset.dev + dataset.test
        assert len(instances) == 2000
        assert Counter(i.polarity for i in instances) == {POSITIVE: 1000, NEGATIVE: 1000}
        assert abs(len(dataset.train) - 1600) <= 1
        assert abs(len(dataset.dev) - 200) <= 1
        assert abs(len(dataset.test) - 200) <= 1
        owners = {}
        for split in ('train', 'dev', 'test'):
            for inst in dataset.split(split):
                assert owners.setdefault(inst.source_dialogue, split) == split
                assert (inst.polarity == POSITIVE) == (inst.target > 0.7)
                assert (inst.polarity == NEGATIVE) == (inst.target < 0.3)


def test_learning_curve_does_not_degrade(default_split):
    train, tuples = default_split
    curve = learning_curve(train, tuples, ['neural'], [10000, 20000, 40000], seed=42, rating_baseline=False)
    series = curve.series('neural@length')
    assert series[-1][1] >= series[0][1] - 0.02


def _pipeline(d):
    small = ['--set', 'neural.embedding_size=32', '--set', 'neural.gru_size=32', '--set', 'neural.sem_size=32',
             '--set', 'neural.predictor=32', '--set', 'neural.max_epochs=3']
    assert dispatch(['synth', '--n', '5000', '--seed', '7', '--out', str(d / 'raw.jsonl')]) == EXIT_OK
    assert dispatch(['filter', str(d / 'raw.jsonl'), '--out', str(d / 'filtered.jsonl')]) == EXIT_OK
    assert dispatch(['holdout', str(d / 'filtered.jsonl'), '--tuples', str(d / 'tuples.jsonl'),
                     '--out', str(d / 'train.jsonl')]) == EXIT_OK
    assert dispatch(['build-datasets', str(d / 'train.jsonl'), '--size', '4000', '--signal', 'length',
                     '--out', str(d / 'data')]) == EXIT_OK
    assert dispatch(['train', '--data', str(d / 'data'), '--out', str(d / 'model')] + small) == EXIT_OK
    assert dispatch(['evaluate', '--model', str(d / 'model'), '--tuples', str(d / 'tuples.jsonl'),
                     '--out', str(d / 'eval.json')]) == EXIT_OK


def test_pipeline_is_deterministic(tmp_path):
    for name in ('a', 'b'):
        (tmp_path / name).mkdir()
        _pipeline(tmp_path / name)
    for artifact in ('raw.jsonl', 'tuples.jsonl', 'data/length.jsonl', 'model', 'model.epochs.tsv', 'eval.json'):
        assert (tmp_path / 'a' / artifact).read_bytes() == (tmp_path / 'b' / artifact).read_bytes()

from dataclasses import replace
import numpy as np
import pytest
from dialrank.config import LinearConfig, NeuralConfig
from dialrank.corpus import USER, Candidate, RankingContext, TurnAnnotator
from dialrank.errors import CheckpointError, ConfigError, DataError, ModelError, ShapeError, UnknownBotError
from dialrank.features import FlowFeaturizer, side_features
from dialrank.rankers import (KINDS, HandcraftedRanker, LinearRanker, RandomRanker, grid_search, load_checkpoint,
                              neural_score, rank, save_checkpoint, train_ranker)
from dialrank.rankers.base import Ranker
from dialrank.rankers.graph import architecture_graph
from dialrank.rankers.linear import FeatureHasher, sgd_pass, template_features
from dialrank.rankers.neural import NeuralRanker, train_neural
from dialrank.textproc import build_vocab
from dialrank.topics import fit_topics
from dialrank.writer import Writer
from applications.tests.helpers import make_candidate, make_context, small_config, small_dataset, some_pairs

EMPTY = RankingContext((), (), 0, 0.0)


class FixedRanker(Ranker):
    """
    Scores a candidate by a table lookup on its text.
    """
    kind = 'fixed'

    def __init__(self, scores):
        self.scores = scores

    def score_many(self, pairs):
        return np.array([self.scores[c.text] for _, c in pairs])

    def checkpoint(self):
        return {}, {}

    @classmethod
    def from_checkpoint(cls, header, arrays):
        return cls({})


@pytest.fixture(scope='module')
def trained():
    return {kind: train_ranker(kind, small_dataset(), small_config(), seed=42)[0] for kind in sorted(KINDS)}


@pytest.fixture(scope='module')
def topic_model():
    docs = [['star', 'wars', 'darth', 'vader', 'jedi']] * 5 + [['football', 'goal', 'match', 'league']] * 5
    return fit_topics(docs, topics=2, iterations=20, seed=1, alpha=0.1)


def _cands(*texts):
    return [Candidate('factbot', t) for t in texts]


def test_rank_orders_by_score():
    ranker = FixedRanker({'a': 0.1, 'b': 0.9})
    assert [(c.text, s) for c, s in rank(ranker, EMPTY, _cands('a', 'b'))] == [('b', 0.9), ('a', 0.1)]
    assert [c.text for c, _ in rank(ranker, EMPTY, _cands('a'))] == ['a']


def test_rank_is_stable():
    ranker = FixedRanker({'a': 0.5, 'b': 0.5, 'c': 0.7, 'd': 0.5})
    assert [c.text for c, _ in rank(ranker, EMPTY, _cands('a', 'b', 'c', 'd'))] == ['c', 'a', 'b', 'd']
    with pytest.raises(DataError):
        rank(ranker, EMPTY, [])


def test_random_ranker():
    pairs = some_pairs(50)
    a = RandomRanker(1).score_many(pairs)
    assert np.array_equal(a, RandomRanker(1).score_many(pairs))
    assert not np.array_equal(a, RandomRanker(2).score_many(pairs))
    assert np.all((a >= 0.0) & (a < 1.0))


def test_feature_hasher():
    hasher = FeatureHasher(4)
    i, sign = hasher('response_ngram=hello')
    assert 0 <= i < 16
    assert sign in (-1.0, 1.0)
    assert hasher('response_ngram=hello') == (i, sign)
    for bits in (0, 33):
        with pytest.raises(ValueError):
            FeatureHasher(bits)


def test_linear_bias_and_clamp():
    ctx = make_context([(USER, 'hi')])
    cand = Candidate('factbot', 'hello there')
    assert LinearRanker(LinearConfig(bits=8), bias=0.3).score(ctx, cand) == 0.3
    assert LinearRanker(LinearConfig(bits=8), bias=2.0).score(ctx, cand) == 1.0
    assert LinearRanker(LinearConfig(bits=8), bias=-1.0).score(ctx, cand) == 0.0
    with pytest.raises(ShapeError):
        LinearRanker(LinearConfig(bits=8), weights=np.zeros(10))


def test_linear_score_is_dot_product():
    rng = np.random.default_rng(0)
    model = LinearRanker(LinearConfig(bits=10), weights=rng.normal(scale=0.01, size=1024), bias=0.4)
    ctx = make_context([(USER, 'tell me about star wars'), ('factbot', 'star wars is a movie'), (USER, 'cool')])
    idx, values = model.features(ctx, Candidate('newsbot', 'the movie came out in 1977'))
    x = np.zeros(1024)
    x[idx] = values
    assert model.raw_score((idx, values)) == pytest.approx(float(model.weights @ x) + 0.4, abs=1e-12)
    assert len(np.unique(idx)) == len(idx)


def test_linear_templates_cover_the_whole_context():
    ctx = make_context([(USER, 'tell me about star wars'), ('factbot', 'star wars is a movie'), (USER, 'cool')])
    out = template_features(ctx, Candidate('newsbot', 'the movie came out'), LinearConfig(), FlowFeaturizer())
    assert {'0:0:cool', '1:3:a', '2:0:tell', '2:4:wars'} <= set(out['context_position'])
    pairs = out['context_x_response']
    assert {'tell|movie', 'star wars|the movie', 'a movie|came out', 'cool|out'} <= set(pairs)
    assert all(v == 1.0 for v in pairs.values())
    assert 'star wars is|the' not in pairs
    assert template_features(ctx, Candidate('newsbot', 'the movie came out'), LinearConfig(interaction_order=1),
                             FlowFeaturizer())['context_x_response'].keys() == {
        '{}|{}'.format(c, r) for c in ('tell', 'me', 'about', 'star', 'wars', 'is', 'a', 'movie', 'cool')
        for r in ('the', 'movie', 'came', 'out')}


def _toy(n=20):
    model = LinearRanker(LinearConfig(bits=12))
    ctx = make_context([(USER, 'what do you think')])
    pairs = [(ctx, Candidate('factbot', 'this is great number{}'.format(k))) for k in range(n)] + \
            [(ctx, Candidate('persona', 'this is awful number{}'.format(k))) for k in range(n)]
    xs = [model.features(c, r) for c, r in pairs]
    ys = np.array([1.0] * n + [0.0] * n)
    return model, pairs, xs, ys


def test_linear_zero_learning_rate():
    model, _, xs, ys = _toy()
    sgd_pass(model, xs, ys, np.arange(len(xs)), 0.0)
    assert not np.any(model.weights)
    assert model.bias == 0.0


def test_linear_duplicates_equal_two_passes():
    a, _, xs, ys = _toy(5)
    b = LinearRanker(LinearConfig(bits=12))
    order = np.arange(len(xs))
    sgd_pass(a, xs, ys, order, 0.05)
    sgd_pass(a, xs, ys, order, 0.05)
    sgd_pass(b, xs + xs, np.concatenate([ys, ys]), np.arange(2 * len(xs)), 0.05)
    assert np.array_equal(a.weights, b.weights)
    assert a.bias == b.bias


def test_linear_learns_separable_toy():
    model, pairs, xs, ys = _toy()
    rng = np.random.default_rng(1)
    for _ in range(10):
        sgd_pass(model, xs, ys, rng.permutation(len(xs)), 0.1)
    scores = model.score_many(pairs)
    assert np.mean((scores > 0.5) == (ys == 1.0)) > 0.95


def test_handcrafted_zero_coefficients(topic_model):
    ranker = HandcraftedRanker(topic_model, coefficients=[0.0] * 6)
    for ctx, cand in some_pairs(5):
        assert ranker.score(ctx, cand) == 0.5


def test_handcrafted_prefers_overlap(topic_model):
    ranker = HandcraftedRanker(topic_model)
    ctx = make_context([(USER, 'tell me about Star Wars'), ('factbot', 'Star Wars is a space opera movie'),
                        (USER, 'what about Darth Vader')])
    dull = ranker.score(ctx, make_candidate('persona', "i don't know"))
    good = ranker.score(ctx, make_candidate('factbot', 'Darth Vader is the father of Luke in Star Wars'))
    assert good > dull


def test_handcrafted_monotone(topic_model):
    ranker = HandcraftedRanker(topic_model)
    base = np.array([0.5, 0.5, 0.5, 0.5, 0.5, 0.0])
    more_coherent = base.copy()
    more_coherent[0] = 0.9
    duller = base.copy()
    duller[2] = 0.9
    assert ranker.score_from_features(more_coherent) > ranker.score_from_features(base)
    assert ranker.score_from_features(duller) < ranker.score_from_features(base)
    with pytest.raises(ShapeError):
        HandcraftedRanker(topic_model, coefficients=[1.0] * 5)


def test_dual_encoder_reads_last_user_turn(trained):
    ranker = trained['dual_encoder']
    a = make_context([(USER, 'star wars'), ('factbot', 'a movie'), (USER, 'tell me more')])
    b = make_context([(USER, 'football'), ('newsbot', 'a match'), (USER, 'tell me more')])
    cand = Candidate('factbot', 'it was released in 1977')
    assert ranker.score(a, cand) == ranker.score(b, cand)


def test_dual_encoder_zero_parameters(trained):
    header, arrays = trained['dual_encoder'].checkpoint()
    ranker = type(trained['dual_encoder']).from_checkpoint(header, {k: v.copy() for k, v in arrays.items()})
    for name in ranker.alloc.params:
        ranker.alloc.params[name][...] = 0.0
    for ctx, cand in some_pairs(3):
        assert ranker.score(ctx, cand) == 0.5


def test_neural_context_permutation_is_exact(trained):
    ranker = trained['neural']
    ctx = make_context([(USER, 'tell me about star wars'), ('factbot', 'star wars is a movie'),
                        (USER, 'who is darth vader')])
    order = [2, 0, 1]
    permuted = RankingContext(tuple(ctx.turns[k] for k in order), tuple(ctx.entities[k] for k in order),
                              ctx.position, ctx.start_time)
    cand = Candidate(ranker.roster[0], 'vader is a sith lord')
    assert ranker.score(ctx, cand) == ranker.score(permuted, cand)


def test_neural_shapes(trained):
    ranker = trained['neural']
    h = ranker.cfg.gru_size
    enc = ranker.encode(EMPTY, Candidate(ranker.roster[0], 'hello'))
    assert enc.shape == (ranker.enc_size,) == (2 * h,)
    assert not np.any(enc[:h])
    assert ranker.sem.in_size == 2 * h
    assert ranker.predictor.in_size == ranker.cfg.sem_size + ranker.side_size
    assert ranker.side_size == 6 + 2 * len(ranker.roster)


def test_neural_errors(trained):
    ranker = trained['neural']
    with pytest.raises(UnknownBotError):
        ranker.score(EMPTY, Candidate('nobody', 'hi'))
    side = side_features(EMPTY, Candidate('x', 'hi'), ['x'])
    with pytest.raises(ShapeError):
        neural_score(ranker, EMPTY, Candidate(ranker.roster[0], 'hi'), side)
    with pytest.raises(ModelError):
        NeuralRanker(build_vocab([['a']]), [], NeuralConfig())


def test_neural_score_with_given_side_features(trained):
    ranker = trained['neural']
    ctx, cand = some_pairs(1)[0]
    side = side_features(ctx, cand, ranker.roster)
    assert neural_score(ranker, ctx, cand, side) == pytest.approx(ranker.score(ctx, cand), abs=1e-15)


@pytest.mark.parametrize('kind', sorted(KINDS))
def test_checkpoint_round_trip(trained, tmp_path, kind):
    ranker = trained[kind]
    path = tmp_path / '{}.ckpt'.format(kind)
    save_checkpoint(ranker, path)
    again = load_checkpoint(path)
    assert type(again) is type(ranker)
    pairs = some_pairs(20)
    scores = ranker.score_many(pairs)
    assert np.array_equal(again.score_many(pairs), scores)
    assert np.all((scores >= 0.0) & (scores <= 1.0))
    save_checkpoint(again, tmp_path / 'again.ckpt')
    assert (tmp_path / 'again.ckpt').read_bytes() == path.read_bytes()


@pytest.mark.parametrize('kind', ['neural', 'dual_encoder', 'linear'])
def test_retraining_is_deterministic(trained, tmp_path, kind):
    ranker, _ = train_ranker(kind, small_dataset(), small_config(), seed=42)
    save_checkpoint(ranker, tmp_path / 'a.ckpt')
    save_checkpoint(trained[kind], tmp_path / 'b.ckpt')
    assert (tmp_path / 'a.ckpt').read_bytes() == (tmp_path / 'b.ckpt').read_bytes()


def test_scoring_does_not_change_rankers(trained):
    pairs = some_pairs(10)
    for kind, ranker in trained.items():
        before = ranker.checkpoint()[1]
        before = {k: v.copy() for k, v in before.items()}
        first = ranker.score_many(pairs)
        after = ranker.checkpoint()[1]
        assert all(np.array_equal(before[k], after[k]) for k in before), kind
        assert np.array_equal(ranker.score_many(pairs), first), kind


def test_unknown_kind(tmp_path):
    with pytest.raises(ConfigError):
        train_ranker('oracle', small_dataset())
    Writer.write_checkpoint(tmp_path / 'x.ckpt', {'kind': 'oracle'}, {})
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / 'x.ckpt')


def test_training_report():
    _, report = train_ranker('neural', small_dataset(), small_config(), seed=42)
    assert 1 <= len(report.epochs) <= 2
    assert report.best_dev_loss == min(r.dev_loss for r in report.epochs)
    lines = report.to_tsv().splitlines()
    assert lines[0] == 'epoch\ttrain_loss\tdev_loss\tselected'
    assert sum(line.endswith('\t1') for line in lines[1:]) == 1


@pytest.mark.parametrize('kind', ['neural', 'dual_encoder'])
def test_architecture_graph(trained, kind):
    dot = architecture_graph(trained[kind]).to_string()
    assert 'Embedding' in dot
    assert ('GRU' if kind == 'neural' else 'LSTM') in dot
    with pytest.raises(ModelError):
        architecture_graph(trained['random'])


def test_grid_search():
    cfg = small_config().neural
    result = grid_search(small_dataset(), cfg, seed=1, gru_sizes=(4, 6), layouts=((4,), (4, 2)))
    assert len(result.runs) == 4
    assert result.report.best_dev_loss == min(r.best_dev_loss for r in result.runs)
    assert len(result.to_tsv().splitlines()) == 5
    assert result.model.cfg.gru_size in (4, 6)


def test_neural_roster_comes_from_train():
    ds = small_dataset()
    seen = {i.response.bot for i in ds.train} | {t.agent for i in ds.train for t in i.context.turns if not t.is_user}
    newcomer = replace(ds.dev[0], response=replace(ds.dev[0].response, bot='newcomer'))
    ds = replace(ds, dev=[newcomer] + ds.dev[1:], test=[replace(i, response=replace(i.response, bot='stranger'))
                                                         for i in ds.test])
    ranker, report = train_neural(ds, small_config().neural, seed=42)
    assert ranker.roster == sorted(seen)
    assert report.epochs
    with pytest.raises(UnknownBotError):
        ranker.score(newcomer.context, newcomer.response)


FUZZ_WORDS = ('the', 'moon', 'zzyzx', 'qwertyuiop', 'vader', '', 'hello', '!!', 'ünïcödé', '42', "don't")
FUZZ_TIMES = (0.0, 1.0, 86399.0, 1.5e9, 1e12)


def _fuzz_text(rng, empty_ok):
    text = ' '.join(str(w) for w in rng.choice(FUZZ_WORDS, int(rng.integers(0, 8))) if w)
    return text if text or empty_ok else 'zzyzx'


def test_scores_stay_in_unit_interval(trained):
    rng = np.random.default_rng(11)
    annotator = TurnAnnotator()
    roster = trained['neural'].roster
    pairs = []
    for _ in range(200):
        t = float(rng.choice(FUZZ_TIMES))
        turns = []
        for _ in range(int(rng.integers(0, 7))):
            agent = USER if rng.random() < 0.5 else str(rng.choice(roster))
            turns.append((agent, _fuzz_text(rng, agent == USER), t))
            t += float(rng.choice([0.0, 1.0, 1e9]))
        ctx = make_context(turns, annotator, position=int(rng.integers(0, 1000)),
                           start_time=float(rng.choice(FUZZ_TIMES)))
        pairs.append((ctx, make_candidate(str(rng.choice(roster)), _fuzz_text(rng, False), annotator)))
    assert {len(c.turns) for c, _ in pairs} == set(range(7))
    for kind, ranker in sorted(trained.items()):
        scores = ranker.score_many(pairs)
        assert scores.shape == (len(pairs),), kind
        assert np.all(np.isfinite(scores)), kind
        assert np.all((scores >= 0.0) & (scores <= 1.0)), kind

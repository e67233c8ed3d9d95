import numpy as np
import pytest
from dialrank.config import TopicConfig
from dialrank.errors import DataError, UntrainedModelError
from dialrank.topics import TopicModel, fit_topics, fit_topics_from_config, js_divergence, topic_divergence

SPACE = 'star wars darth vader jedi space galaxy'.split()
SPORT = 'football goal match league season player team'.split()


@pytest.fixture(scope='module')
def model():
    docs = [SPACE] * 10 + [SPORT] * 10
    return fit_topics(docs, topics=2, iterations=50, seed=1, alpha=0.1)


def _mass(model, topic, group):
    phi = model.phi
    return sum(phi[topic, model.index[w]] for w in group)


def test_topics_separate(model):
    space_topic = int(np.argmax([_mass(model, k, SPACE) for k in range(2)]))
    assert _mass(model, space_topic, SPACE) > 0.9
    assert _mass(model, 1 - space_topic, SPORT) > 0.9


def test_phi_rows_sum_to_one(model):
    assert np.allclose(model.phi.sum(axis=1), 1.0)


def test_fit_deterministic():
    docs = [SPACE, SPORT, SPACE + SPORT]
    a = fit_topics(docs, topics=3, iterations=5, seed=9)
    b = fit_topics(docs, topics=3, iterations=5, seed=9)
    assert np.array_equal(a.counts, b.counts)


def test_infer_seeded_by_document(model):
    a = model.infer(['jedi', 'goal', 'space'], sweeps=10)
    b = model.infer(['jedi', 'goal', 'space'], sweeps=10)
    assert np.array_equal(a, b)
    assert a.sum() == pytest.approx(1.0)


def test_infer_unknown_words(model):
    assert np.allclose(model.infer(['unseen', 'words']), [0.5, 0.5])


def test_divergence(model):
    assert topic_divergence(model, SPACE, SPACE) == pytest.approx(0.0, abs=1e-12)
    assert topic_divergence(model, SPACE[:3], SPORT[:3]) >= 0.5
    assert topic_divergence(model, [], ['nothing', 'known']) == pytest.approx(0.0, abs=1e-12)


def test_js_divergence_bounds():
    assert js_divergence(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)
    p, q = np.array([0.7, 0.3]), np.array([0.4, 0.6])
    assert js_divergence(p, q) == pytest.approx(js_divergence(q, p))


def test_stopwords_removed():
    m = fit_topics([['the', 'jedi'], ['the', 'goal']], topics=2, iterations=2, stopwords=['the'])
    assert 'the' not in m.index
    with pytest.raises(DataError):
        fit_topics([['the', 'the']], topics=2, stopwords=['the'])


def test_errors():
    with pytest.raises(ValueError):
        fit_topics([SPACE], topics=1)
    untrained = TopicModel(2, ['a'], 0.1, 0.01)
    with pytest.raises(UntrainedModelError):
        untrained.infer(['a'])
    with pytest.raises(UntrainedModelError):
        topic_divergence(untrained, ['a'], ['a'])


def test_on_sweep_and_config():
    seen = []
    fit_topics([SPACE, SPORT], topics=2, iterations=3, on_sweep=lambda s, phi: seen.append((s, phi.shape)))
    assert [s for s, _ in seen] == [0, 1, 2]
    assert seen[0][1] == (2, len(SPACE) + len(SPORT))
    m = fit_topics_from_config([SPACE, SPORT], TopicConfig(topics=3, iterations=2), seed=1)
    assert m.topics == 3
    assert m.alpha == pytest.approx(50.0 / 3)

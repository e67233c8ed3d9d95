import pytest
from dialrank.config import (Config, HandcraftedConfig, NeuralConfig, TopicConfig, apply_overrides, from_dict,
                             load_config, read_key_values, to_dict)
from dialrank.errors import ConfigError


def test_defaults():
    cfg = Config()
    assert cfg.corpus.positive_threshold == 0.7
    assert cfg.corpus.negative_threshold == 0.3
    assert cfg.corpus.split == [8, 1, 1]
    assert cfg.corpus.blacklist == ['quizbot']
    assert cfg.text.max_tokens == 30
    assert cfg.neural.dropout == 0.4
    assert cfg.neural.learning_rate == 0.01
    assert cfg.generator.seed == 7
    assert HandcraftedConfig().coefficients() == [1.0, 0.5, -1.5, 1.0, -0.5, 0.5]


def test_read_key_values(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('# comment\n\nneural.gru_size = 64\ncorpus.blacklist = quizbot, weatherbot\n', encoding='utf-8')
    assert read_key_values(path) == {'neural.gru_size': '64', 'corpus.blacklist': 'quizbot, weatherbot'}
    path.write_text('neural.gru_size 64\n', encoding='utf-8')
    with pytest.raises(ConfigError) as e:
        read_key_values(path)
    assert ':1:' in str(e.value)


def test_value_types():
    cfg = apply_overrides(Config(), {
        'neural.gru_size': '64',
        'neural.predictor': '128,32,32',
        'corpus.percentile_strict': 'yes',
        'corpus.blacklist': 'quizbot, weatherbot',
        'topics.alpha': '0.1',
        'linear.learning_rate': '1e-3',
    })
    assert cfg.neural.gru_size == 64
    assert cfg.neural.predictor == [128, 32, 32]
    assert cfg.corpus.percentile_strict is True
    assert cfg.corpus.blacklist == ['quizbot', 'weatherbot']
    assert cfg.topics.alpha == 0.1
    assert cfg.linear.learning_rate == 0.001
    assert apply_overrides(Config(), {'topics.alpha': 'none'}).topics.alpha is None
    assert apply_overrides(Config(), {'neural.roster': ''}).neural.roster == []


@pytest.mark.parametrize('key,value', [('neural.gru_size', 'large'), ('corpus.percentile_strict', 'maybe'),
                                       ('neural.predictor', '128,x')])
def test_bad_values(key, value):
    with pytest.raises(ConfigError):
        apply_overrides(Config(), {key: value})


@pytest.mark.parametrize('key', ['neural.gru', 'nothing.gru_size', 'neural', 'neural.gru_size.x'])
def test_unknown_keys(key):
    with pytest.raises(ConfigError):
        apply_overrides(Config(), {key: '1'})


def test_group_keys():
    assert apply_overrides(NeuralConfig(), {'gru_size': '32'}).gru_size == 32


def test_precedence(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('neural.gru_size = 64\nneural.sem_size = 32\n', encoding='utf-8')
    cfg = load_config(path, {'neural.gru_size': '16'})
    assert cfg.neural.gru_size == 16
    assert cfg.neural.sem_size == 32
    assert cfg.neural.embedding_size == 256
    assert load_config().neural.gru_size == 128


def test_dict_round_trip():
    cfg = TopicConfig(topics=7, alpha=0.2)
    assert from_dict(TopicConfig, to_dict(cfg)) == cfg
    assert from_dict(TopicConfig, dict(to_dict(cfg), retired_option=1)) == cfg

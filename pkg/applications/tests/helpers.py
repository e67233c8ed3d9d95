"""
Small fixtures shared by the tests: hand made dialogues and contexts, and a cached synthetic corpus with datasets
and held-out feedback tuples small enough to train on in seconds.
"""
from functools import lru_cache
from dialrank.config import (Config, DualEncoderConfig, GeneratorConfig, LinearConfig, NeuralConfig, TopicConfig)
from dialrank.corpus import USER, Candidate, Dialogue, RankingContext, Turn, TurnAnnotator, build_dataset, \
    filter_corpus
from dialrank.synthgen import generate_corpus, plant_eval_split


def make_dialogue(did, n_turns, bot='factbot', rating=None, start=0.0, texts=None):
    """
    A dialogue alternating user (even index) and bot turns, ten seconds apart.
    """
    turns = []
    for i in range(n_turns):
        agent = USER if i % 2 == 0 else bot
        text = texts[i] if texts else '{} turn {} about things'.format(did, i)
        turns.append(Turn(agent, text, start + 10.0 * i))
    return Dialogue(did, tuple(turns), rating)


def make_context(turns, annotator=None, position=None, start_time=None):
    """
    RankingContext of (agent, text) or (agent, text, timestamp) tuples.
    """
    annotator = annotator or TurnAnnotator()
    ts = [Turn(t[0], t[1], t[2] if len(t) > 2 else 10.0 * i) for i, t in enumerate(turns)]
    return RankingContext(tuple(ts), tuple(annotator.entities(t.text) for t in ts),
                          len(ts) if position is None else position,
                          start_time if start_time is not None else (ts[0].timestamp if ts else 0.0))


def make_candidate(bot, text, annotator=None):
    annotator = annotator or TurnAnnotator()
    return annotator.candidate(Turn(bot, text, 0.0))


def small_generator_config(n=400, seed=7, **kwargs) -> GeneratorConfig:
    return GeneratorConfig(n_dialogues=n, topics=4, vocabulary=200, seed=seed, **kwargs)


def small_config() -> Config:
    cfg = Config()
    cfg.neural = NeuralConfig(embedding_size=8, gru_size=8, sem_size=8, predictor=[8], batch_size=16, max_epochs=2,
                              patience=1)
    cfg.dual_encoder = DualEncoderConfig(embedding_size=8, hidden_size=8, predictor=[8], batch_size=16,
                                         max_epochs=2, patience=1)
    cfg.topics = TopicConfig(topics=4, iterations=10, inference_sweeps=5, max_documents=100)
    cfg.linear = LinearConfig(bits=12)
    cfg.generator = small_generator_config()
    return cfg


@lru_cache(maxsize=None)
def small_corpus():
    """
    Filtered synthetic corpus of about 400 dialogues.
    """
    return filter_corpus(generate_corpus(small_generator_config()))[0]


@lru_cache(maxsize=None)
def small_split():
    """
    (training corpus, held-out feedback tuples) of small_corpus().
    """
    return plant_eval_split(small_corpus(), 0.2, seed=42)


@lru_cache(maxsize=None)
def small_dataset(signal='length', size=200):
    return build_dataset(small_split()[0], signal, size, seed=42)


def some_pairs(n=20):
    """
    (context, candidate) pairs taken from the small dataset.
    """
    ds = small_dataset()
    return [(i.context, i.response) for i in (ds.train + ds.dev + ds.test)[:n]]


def uniform_candidate(bot, text):
    return Candidate(bot, text, (), 0.0)

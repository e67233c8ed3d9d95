"""
Deterministic synthetic dialogue corpora. Every dialogue draws a latent quality q; system turns are on-topic and
informative with probability q and dull or off-topic otherwise. Longer dialogues and explicit positive feedback follow
from q, the optional rating is a heavily noised function of q.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import numpy as np
from dialrank.config import CorpusConfig, FeedbackConfig, GeneratorConfig, TextConfig
from dialrank.corpus import (NEGATIVE, POSITIVE, USER, Corpus, Dialogue, FeedbackDetector, FeedbackTuple, Turn,
                             TurnAnnotator, extract_feedback_set, normalize_targets)
from dialrank.errors import ConfigError, FeedbackSetError, InsufficientDataError
from dialrank.textproc import default_lexicon, read_lines
from dialrank.tools import make_rng, progress

log = logging.getLogger(__name__)

CONSONANTS = 'bdfgklmnprstvz'
VOWELS = 'aeiou'
ENTITIES_PER_TOPIC = 5
PHRASES_PER_TOPIC = 8
DAY = 86400.0

OPENERS = ('tell me about {e}', "let's talk about {e}", 'what do you know about {e}', 'have you heard of {e}')
FOLLOW_UPS = ('what about {p0}', 'and what about {e}', 'do you know about {p0}', 'tell me about {p0} and {p1}',
              'what is {p0}')
INFORMATIVE = ('{e} is known for {p0} and {p1}.', 'did you know that {e} has {p0} and {p1}?',
               'the {p0} of {e} is {p1}.', 'they say that {e} is all about {p0} and {p1}.')
QUIZ = ('quiz time what is {p0}', 'next question {w0} or {w1}')


@dataclass
class Topic:
    entities: List[str]
    words: List[str]
    phrases: List[str]


@dataclass
class World:
    """
    The inventory the dialogues are drawn from.
    """
    topics: List[Topic]
    dull_phrases: List[str]
    positive_feedback: List[str]
    negative_feedback: List[str]
    social_bots: List[str]
    good_bots: List[str]
    dull_bots: List[str]
    quiz_bots: List[str]


def validate_generator_config(cfg: GeneratorConfig, blacklist: Optional[Sequence[str]] = None):
    """
    Raise a ConfigError for an inconsistent generator configuration. Bots on the blacklist, the corpus blacklist if
    None, are not social.
    """
    blacklist = CorpusConfig().blacklist if blacklist is None else blacklist
    if cfg.n_dialogues < 10:
        raise ConfigError('generator: n_dialogues must be at least 10, got {}'.format(cfg.n_dialogues))
    for name in ('quality_low', 'quality_high', 'rating_noise', 'rated_fraction', 'feedback_probability',
                 'negative_feedback_probability', 'quiz_probability', 'offtopic_fraction'):
        v = getattr(cfg, name)
        if not 0.0 <= v <= 1.0:
            raise ConfigError('generator: {} must be in [0, 1], got {}'.format(name, v))
    if cfg.quality_low > cfg.quality_high:
        raise ConfigError('generator: quality_low > quality_high')
    shortest = cfg.length_base + min(round(cfg.length_gain * cfg.quality_low),
                                     round(cfg.length_gain * cfg.quality_high))
    if shortest < 3:
        raise ConfigError('generator: length_base {} and length_gain {} give dialogues of {} turns, at least 3 '
                          'are needed'.format(cfg.length_base, cfg.length_gain, shortest))
    if cfg.length_noise < 0:
        raise ConfigError('generator: length_noise must not be negative')
    if cfg.topics < 2 or cfg.vocabulary < 5 * cfg.topics:
        raise ConfigError('generator: need at least 2 topics and 5 words per topic')
    social = [b for b in cfg.bots if b not in blacklist]
    if not social:
        raise ConfigError('generator: no social bots')
    unknown = set(cfg.good_bots) - set(social)
    if not cfg.good_bots or unknown:
        raise ConfigError('generator: good_bots must be non-empty social bots, unknown: {}'.format(sorted(unknown)))


def pseudo_words(rng: np.random.Generator, n: int, exclude: frozenset) -> List[str]:
    """
    n distinct pronounceable words of two or three syllables.
    """
    out = []
    seen = set(exclude)
    while len(out) < n:
        syllables = int(rng.integers(2, 4))
        w = ''.join(CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))]
                    for _ in range(syllables))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def build_world(cfg: GeneratorConfig, text_cfg: Optional[TextConfig] = None,
                feedback_cfg: Optional[FeedbackConfig] = None, blacklist: Optional[Sequence[str]] = None) -> World:
    blacklist = CorpusConfig().blacklist if blacklist is None else blacklist
    text_cfg = text_cfg or TextConfig()
    feedback_cfg = feedback_cfg or FeedbackConfig()
    exclude = frozenset(read_lines(text_cfg.stopwords)) | frozenset(default_lexicon().valences)
    rng = make_rng(cfg.seed, 0)
    vocab = pseudo_words(rng, cfg.vocabulary + 2 * ENTITIES_PER_TOPIC * cfg.topics, exclude)
    names = vocab[cfg.vocabulary:]
    topics = []
    for t in range(cfg.topics):
        entities = ['{} {}'.format(names[2 * k].capitalize(), names[2 * k + 1].capitalize())
                    for k in range(t * ENTITIES_PER_TOPIC, (t + 1) * ENTITIES_PER_TOPIC)]
        ws = vocab[t:cfg.vocabulary:cfg.topics]
        phrases = ['{} {}'.format(ws[2 * k], ws[2 * k + 1]) for k in range(min(PHRASES_PER_TOPIC, len(ws) // 2))]
        topics.append(Topic(entities, ws, phrases))
    social = [b for b in cfg.bots if b not in blacklist]
    dull_bots = [b for b in social if b not in cfg.good_bots] or list(social)
    return World(topics, read_lines(text_cfg.dull_phrases), read_lines(feedback_cfg.whitelist),
                 read_lines(feedback_cfg.negative_whitelist), social, list(cfg.good_bots), dull_bots,
                 [b for b in cfg.bots if b in blacklist])


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _fill(rng: np.random.Generator, template: str, topic: Topic, entity: str) -> str:
    w0, w1 = _pick(rng, topic.words), _pick(rng, topic.words)
    p0, p1 = _pick(rng, topic.phrases), _pick(rng, topic.phrases)
    return template.format(e=entity, w0=w0, w1=w1, p0=p0, p1=p1)


def generate_dialogue(cfg: GeneratorConfig, world: World, index: int) -> Dialogue:
    """
    Dialogue number `index`, drawn from its own stream so that it does not depend on the other dialogues.
    """
    rng = make_rng(cfg.seed, 1, index)
    q = float(rng.uniform(cfg.quality_low, cfg.quality_high))
    topic_id = int(rng.integers(len(world.topics)))
    topic = world.topics[topic_id]
    entity = _pick(rng, topic.entities)
    noise = float(rng.normal(0.0, cfg.length_noise)) if cfg.length_noise > 0 else 0.0
    n_turns = max(3, cfg.length_base + int(round(cfg.length_gain * q)) + int(round(noise)))
    t = cfg.start_time + float(rng.uniform(0.0, 30 * DAY))
    turns = [Turn(USER, _fill(rng, _pick(rng, OPENERS), topic, entity), t)]
    last_good = None
    while len(turns) < n_turns:
        t += float(rng.uniform(2.0, 20.0))
        if turns[-1].is_user:
            if world.quiz_bots and rng.random() < cfg.quiz_probability:
                turns.append(Turn(_pick(rng, world.quiz_bots), _fill(rng, _pick(rng, QUIZ), topic, entity), t))
                last_good = None
                continue
            last_good = bool(rng.random() < q)
            if last_good:
                entity = _pick(rng, topic.entities) if rng.random() < 0.15 else entity
                text = _fill(rng, _pick(rng, INFORMATIVE), topic, entity)
                bot = _pick(rng, world.good_bots)
            elif rng.random() < cfg.offtopic_fraction:
                other = world.topics[(topic_id + 1 + int(rng.integers(len(world.topics) - 1))) % len(world.topics)]
                text = _fill(rng, _pick(rng, INFORMATIVE), other, _pick(rng, other.entities))
                bot = _pick(rng, world.social_bots)
            else:
                text = _pick(rng, world.dull_phrases)
                bot = _pick(rng, world.dull_bots)
            turns.append(Turn(bot, text, t))
        else:
            if last_good is True and rng.random() < cfg.feedback_probability:
                text = _pick(rng, world.positive_feedback)
            elif last_good is False and rng.random() < cfg.negative_feedback_probability:
                text = _pick(rng, world.negative_feedback)
            else:
                text = _fill(rng, _pick(rng, FOLLOW_UPS), topic, entity)
            turns.append(Turn(USER, text, t))
    rating = None
    if rng.random() < cfg.rated_fraction:
        mix = (1.0 - cfg.rating_noise) * q + cfg.rating_noise * float(rng.random())
        rating = int(min(5, max(1, 1 + round(4.0 * mix))))
    return Dialogue('synth-{:06d}'.format(index), tuple(turns), rating)


def generate_corpus(cfg: Optional[GeneratorConfig] = None, text_cfg: Optional[TextConfig] = None,
                    feedback_cfg: Optional[FeedbackConfig] = None, corpus_cfg: Optional[CorpusConfig] = None) -> Corpus:
    """
    Generate a synthetic corpus.
    :param cfg: GeneratorConfig, validated first.
    :param text_cfg: Locations of stopwords and dull phrases.
    :param feedback_cfg: Locations of the feedback phrase lists.
    :param corpus_cfg: Its blacklist names the bots that are not social.
    :return: Corpus of cfg.n_dialogues dialogues in index order.
    """
    cfg = cfg or GeneratorConfig()
    blacklist = (corpus_cfg or CorpusConfig()).blacklist
    validate_generator_config(cfg, blacklist)
    world = build_world(cfg, text_cfg, feedback_cfg, blacklist)
    dialogues = [generate_dialogue(cfg, world, i) for i in progress(range(cfg.n_dialogues), desc='generating')]
    log.info('generated %d dialogues (seed %d)', len(dialogues), cfg.seed)
    return Corpus(tuple(dialogues))


def plant_eval_split(corpus: Corpus, fraction: float, seed: int = 42, min_tuples: int = 1,
                     detector: Optional[FeedbackDetector] = None, annotator: Optional[TurnAnnotator] = None,
                     cfg: Optional[CorpusConfig] = None) -> Tuple[Corpus, List[FeedbackTuple]]:
    """
    Reserve a random share of the dialogues for evaluation and extract feedback tuples from them only, bad responses
    included. The remaining dialogues are the training corpus.
    :param corpus: The (filtered) corpus.
    :param fraction: Share of dialogues reserved, in (0, 1).
    :param seed: Seed of the reservation and of the bad response sampling.
    :param min_tuples: Fewer tuples in the reserve are an error.
    :param detector: Positive feedback detector, bundled lists if None.
    :return: (training corpus, held-out feedback tuples)
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError('fraction must be in (0, 1), got {}'.format(fraction))
    cfg = cfg or CorpusConfig()
    n = len(corpus)
    n_reserved = min(n, max(1, int(round(fraction * n))))
    order = make_rng(seed, 5).permutation(n)
    reserved_idx = set(int(k) for k in order[:n_reserved])
    reserved = Corpus(tuple(d for k, d in enumerate(corpus) if k in reserved_idx), corpus.length_cutoff)
    train = Corpus(tuple(d for k, d in enumerate(corpus) if k not in reserved_idx), corpus.length_cutoff)
    if len(train) < 2:
        raise InsufficientDataError('only {} dialogues left for training'.format(len(train)), achievable=0)
    targets = normalize_targets(train, 'length')
    by_id = train.by_id()
    eligible = {POSITIVE: 0, NEGATIVE: 0}
    for did, target in targets.items():
        pairs = len(by_id[did].system_turn_indices())
        if target > cfg.positive_threshold:
            eligible[POSITIVE] += pairs
        elif target < cfg.negative_threshold:
            eligible[NEGATIVE] += pairs
    if not eligible[POSITIVE] or not eligible[NEGATIVE]:
        raise InsufficientDataError('training side has {} positive and {} negative eligible pairs'.format(
            eligible[POSITIVE], eligible[NEGATIVE]), achievable=2 * min(eligible.values()))
    detector = detector or FeedbackDetector.from_config()
    tuples = extract_feedback_set(reserved, detector, seed, annotator, cfg).tuples
    if len(tuples) < min_tuples:
        raise FeedbackSetError('{} feedback tuples in {} reserved dialogues, {} needed'.format(
            len(tuples), len(reserved), min_tuples))
    log.info('held out %d dialogues with %d feedback tuples, %d dialogues for training', len(reserved), len(tuples),
             len(train))
    return train, tuples

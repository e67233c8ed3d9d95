"""
Dialogue data model, transcript ingestion, corpus filtering, target normalization, supervised dataset construction
and extraction of the explicit user feedback evaluation set.
"""
from __future__ import annotations
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple
import numpy as np
from dialrank.config import CorpusConfig, FeedbackConfig
from dialrank.errors import (CorpusFormatError, DataError, DegenerateCorpusError, DuplicateDialogueError,
                             EmptyCorpusError, FeedbackSetError, InsufficientDataError)
from dialrank.textproc import (EntityExtractor, SentimentLexicon, default_lexicon, extract_entities, read_lines,
                               sentiment_score, words)
from dialrank.tools import make_rng, progress

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
USER = 'user'
POSITIVE = 'positive'
NEGATIVE = 'negative'
SIGNALS = ('length', 'rating')
SPLITS = ('train', 'dev', 'test')
MAX_BAD_DRAWS = 20


@dataclass(frozen=True)
class Turn:
    agent: str
    text: str
    timestamp: float

    def __post_init__(self):
        if not self.agent:
            raise ValueError('turn without agent')
        if not self.text and self.agent != USER:
            raise ValueError('empty text is only allowed for user turns')
        if not self.timestamp >= 0:
            raise ValueError('negative or invalid timestamp {}'.format(self.timestamp))

    @property
    def is_user(self) -> bool:
        return self.agent == USER

    def to_json(self) -> dict:
        return {'agent': self.agent, 'text': self.text, 'timestamp': self.timestamp}

    @staticmethod
    def from_json(d: dict) -> Turn:
        return Turn(str(d['agent']), str(d['text']), float(d['timestamp']))


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: Tuple[Turn, ...]
    rating: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'turns', tuple(self.turns))
        if self.rating is not None and self.rating not in (1, 2, 3, 4, 5):
            raise ValueError('rating {} outside 1..5'.format(self.rating))
        for a, b in zip(self.turns, self.turns[1:]):
            if b.timestamp < a.timestamp:
                raise ValueError('timestamps decrease within dialogue {}'.format(self.id))

    @property
    def length(self) -> int:
        return len(self.turns)

    def system_turn_indices(self) -> List[int]:
        return [i for i, t in enumerate(self.turns) if not t.is_user]

    def to_json(self) -> dict:
        return {'dialogue_id': self.id, 'rating': self.rating, 'turns': [t.to_json() for t in self.turns]}


@dataclass(frozen=True)
class Corpus:
    """
    An immutable, ordered collection of dialogues with unique ids. `length_cutoff` is set by filter_corpus() and
    records the outlier threshold that was applied, so that filtering again applies the same threshold.
    """
    dialogues: Tuple[Dialogue, ...]
    length_cutoff: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'dialogues', tuple(self.dialogues))
        seen = set()
        for d in self.dialogues:
            if d.id in seen:
                raise DuplicateDialogueError(d.id)
            seen.add(d.id)

    def __len__(self):
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    def __getitem__(self, i) -> Dialogue:
        return self.dialogues[i]

    def by_id(self) -> Dict[str, Dialogue]:
        return {d.id: d for d in self.dialogues}

    def bots(self) -> List[str]:
        """
        Sorted names of all system agents in the corpus.
        """
        return sorted({t.agent for d in self.dialogues for t in d.turns if not t.is_user})


@dataclass(frozen=True)
class RankingContext:
    """
    Up to 3 most recent system and 3 most recent user turns before a response, in dialogue order.
    `position` is the index of the response within its dialogue, `start_time` the timestamp of the first turn.
    """
    turns: Tuple[Turn, ...]
    entities: Tuple[Tuple[str, ...], ...]
    position: int = 0
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'turns', tuple(self.turns))
        object.__setattr__(self, 'entities', tuple(tuple(e) for e in self.entities))
        if len(self.turns) > 6:
            raise ValueError('a ranking context holds at most 6 turns')
        if len(self.entities) != len(self.turns):
            raise ValueError('one entity list per context turn required')

    def last_user_turn(self) -> Optional[Turn]:
        for t in reversed(self.turns):
            if t.is_user:
                return t
        return None

    def last_system_turn(self) -> Optional[Turn]:
        for t in reversed(self.turns):
            if not t.is_user:
                return t
        return None

    @property
    def timestamp(self) -> float:
        """
        Time the response is given, approximated by the latest context turn.
        """
        return max(t.timestamp for t in self.turns) if self.turns else self.start_time

    def to_json(self) -> dict:
        return {'turns': [t.to_json() for t in self.turns], 'entities': [list(e) for e in self.entities],
                'position': self.position, 'start_time': self.start_time}

    @staticmethod
    def from_json(d: dict) -> RankingContext:
        return RankingContext(tuple(Turn.from_json(t) for t in d['turns']),
                              tuple(tuple(e) for e in d['entities']),
                              int(d.get('position', 0)), float(d.get('start_time', 0.0)))


@dataclass(frozen=True)
class Candidate:
    bot: str
    text: str
    entities: Tuple[str, ...] = ()
    sentiment: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'entities', tuple(self.entities))
        if not -1.0 <= self.sentiment <= 1.0:
            raise ValueError('sentiment outside [-1, 1]')

    @property
    def agent(self) -> str:
        return self.bot

    def to_json(self) -> dict:
        return {'bot': self.bot, 'text': self.text, 'entities': list(self.entities), 'sentiment': self.sentiment}

    @staticmethod
    def from_json(d: dict) -> Candidate:
        return Candidate(str(d['bot']), str(d['text']), tuple(d.get('entities', ())), float(d.get('sentiment', 0.0)))


@dataclass(frozen=True)
class TrainingInstance:
    context: RankingContext
    response: Candidate
    target: float
    polarity: str
    source_dialogue: str
    turn_index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.target <= 1.0:
            raise ValueError('target outside [0, 1]')
        if (self.polarity == POSITIVE) != (self.target > 0.7) or (self.polarity == NEGATIVE) != (self.target < 0.3):
            raise ValueError('polarity {} inconsistent with target {}'.format(self.polarity, self.target))

    def to_json(self, split: str) -> dict:
        return {'split': split, 'source_dialogue': self.source_dialogue, 'turn_index': self.turn_index,
                'target': self.target, 'polarity': self.polarity, 'context': self.context.to_json(),
                'response': self.response.to_json()}

    @staticmethod
    def from_json(d: dict) -> TrainingInstance:
        return TrainingInstance(RankingContext.from_json(d['context']), Candidate.from_json(d['response']),
                                float(d['target']), d['polarity'], d['source_dialogue'], int(d.get('turn_index', 0)))


@dataclass(frozen=True)
class FeedbackTuple:
    context: RankingContext
    good_response: Candidate
    bad_response: Candidate
    source_dialogue: str = ''
    bad_dialogue: str = ''

    def __post_init__(self):
        if self.good_response == self.bad_response:
            raise ValueError('good and bad response must differ')

    def to_json(self) -> dict:
        return {'context': self.context.to_json(), 'good_response': self.good_response.to_json(),
                'bad_response': self.bad_response.to_json(), 'source_dialogue': self.source_dialogue,
                'bad_dialogue': self.bad_dialogue}

    @staticmethod
    def from_json(d: dict) -> FeedbackTuple:
        return FeedbackTuple(RankingContext.from_json(d['context']), Candidate.from_json(d['good_response']),
                             Candidate.from_json(d['bad_response']), d.get('source_dialogue', ''),
                             d.get('bad_dialogue', ''))


@dataclass
class Dataset:
    """
    Train, dev and test instances of one supervision signal plus the pair counts they were sampled from.
    """
    signal: str
    train: List[TrainingInstance]
    dev: List[TrainingInstance]
    test: List[TrainingInstance]
    seed: int = 0
    eligible_positive: int = 0
    eligible_negative: int = 0
    achievable: int = 0

    def split(self, name: str) -> List[TrainingInstance]:
        return {'train': self.train, 'dev': self.dev, 'test': self.test}[name]

    def __len__(self):
        return len(self.train) + len(self.dev) + len(self.test)


@dataclass
class FilterReport:
    """
    What filter_corpus() removed. The outlier count and the non-social turn count are kept apart.
    """
    dialogues_in: int = 0
    dialogues_out: int = 0
    too_short: int = 0
    too_long: int = 0
    emptied_by_blacklist: int = 0
    blacklisted_turns: int = 0
    turns_in: int = 0
    length_cutoff: int = 0

    @property
    def outlier_fraction(self) -> float:
        return (self.too_short + self.too_long) / self.dialogues_in if self.dialogues_in else 0.0

    @property
    def removed_fraction(self) -> float:
        return 1.0 - self.dialogues_out / self.dialogues_in if self.dialogues_in else 0.0

    @property
    def blacklisted_turn_fraction(self) -> float:
        return self.blacklisted_turns / self.turns_in if self.turns_in else 0.0


# ---------------------------------------------------------------------------------------------------------------
# Transcript files


def _read_jsonl(path) -> Iterator[Tuple[int, dict]]:
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError('invalid JSON ({})'.format(e.msg), line_no, path)
            if not isinstance(record, dict):
                raise CorpusFormatError('expected a JSON object', line_no, path)
            yield line_no, record


def _check_header(record: dict, line_no: int, path) -> bool:
    """
    True if the record is a format header line. Raises on unsupported versions.
    """
    if 'format_version' not in record:
        return False
    if record['format_version'] != FORMAT_VERSION:
        raise CorpusFormatError('unsupported format_version {}'.format(record['format_version']), line_no, path)
    return True


def ingest_transcripts(path) -> Corpus:
    """
    Read a line oriented JSON transcript file, one dialogue per line, optionally preceded by a format header.
    :param path: The transcript file.
    :return: The Corpus in file order.
    """
    dialogues = []
    seen = {}
    length_cutoff = None
    for line_no, record in _read_jsonl(path):
        if _check_header(record, line_no, path):
            length_cutoff = record.get('length_cutoff')
            continue
        for key in ('dialogue_id', 'turns'):
            if key not in record:
                raise CorpusFormatError('missing key {!r}'.format(key), line_no, path)
        if not isinstance(record['turns'], list):
            raise CorpusFormatError('"turns" must be a list', line_no, path)
        did = str(record['dialogue_id'])
        if did in seen:
            raise DuplicateDialogueError(did, line_no)
        seen[did] = line_no
        rating = record.get('rating')
        try:
            turns = tuple(Turn.from_json(t) for t in record['turns'])
            if rating is not None:
                if isinstance(rating, bool) or float(rating) != int(rating):
                    raise ValueError('rating must be an integer')
                rating = int(rating)
            dialogues.append(Dialogue(did, turns, rating))
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusFormatError('invalid dialogue {!r}: {}'.format(did, e), line_no, path)
    log.info('ingested %d dialogues from %s', len(dialogues), path)
    return Corpus(tuple(dialogues), length_cutoff)


def write_transcripts(corpus: Corpus, path):
    """
    Write a corpus in the transcript format. ingest_transcripts() of the result gives an identical corpus.
    """
    header = {'format_version': FORMAT_VERSION}
    if corpus.length_cutoff is not None:
        header['length_cutoff'] = corpus.length_cutoff
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps(header) + '\n')
        for d in corpus:
            f.write(json.dumps(d.to_json(), ensure_ascii=False) + '\n')


# ---------------------------------------------------------------------------------------------------------------
# Filtering and targets


def nearest_rank_percentile(values: Sequence[float], p: float) -> float:
    """
    Nearest-rank percentile: the smallest value such that at least p percent of the values are less or equal.
    """
    if not values:
        raise EmptyCorpusError('percentile of an empty sequence')
    ordered = sorted(values)
    rank = max(1, int(math.ceil(p / 100.0 * len(ordered))))
    return ordered[rank - 1]


def filter_corpus(corpus: Corpus, cfg: Optional[CorpusConfig] = None) -> Tuple[Corpus, FilterReport]:
    """
    Remove non-social system turns (bots on the blacklist) and outlier dialogues: shorter than cfg.min_turns, or at
    or above (percentile_strict) respectively above the length percentile. The cutoff is computed once and recorded on
    the returned corpus, so filtering a filtered corpus changes nothing.
    :param corpus: The corpus.
    :param cfg: Filtering configuration.
    :return: The filtered corpus and a report of what was removed.
    """
    cfg = cfg or CorpusConfig()
    if len(corpus) == 0:
        raise EmptyCorpusError('cannot filter an empty corpus')
    blacklist = set(cfg.blacklist)
    report = FilterReport(dialogues_in=len(corpus))
    kept_turns = []
    for d in corpus:
        report.turns_in += d.length
        turns = tuple(t for t in d.turns if t.is_user or t.agent not in blacklist)
        report.blacklisted_turns += d.length - len(turns)
        if not turns:
            report.emptied_by_blacklist += 1
            continue
        kept_turns.append(replace(d, turns=turns) if len(turns) != d.length else d)

    # max_length is the longest length kept. It is derived from the percentile once and recorded on the result.
    if corpus.length_cutoff is not None:
        max_length = corpus.length_cutoff
    elif kept_turns:
        cutoff = int(nearest_rank_percentile([d.length for d in kept_turns], cfg.percentile))
        max_length = cutoff - 1 if cfg.percentile_strict else cutoff
    else:
        max_length = 0
    report.length_cutoff = max_length

    kept = []
    for d in kept_turns:
        if d.length < cfg.min_turns:
            report.too_short += 1
        elif d.length > max_length:
            report.too_long += 1
        else:
            kept.append(d)
    report.dialogues_out = len(kept)
    log.info('filter: %d -> %d dialogues (%d short, %d long, %d emptied), %d non-social turns removed (%.1f%%), '
             'longest kept %d', report.dialogues_in, report.dialogues_out, report.too_short, report.too_long,
             report.emptied_by_blacklist, report.blacklisted_turns, 100.0 * report.blacklisted_turn_fraction,
             max_length)
    return Corpus(tuple(kept), max_length), report


def normalize_targets(corpus: Corpus, signal: str) -> Dict[str, float]:
    """
    Per-dialogue targets in [0, 1]. Ratings r map to (r - 1) / 4 (unrated dialogues are left out), lengths are
    min-max normalized over the given corpus.
    :param corpus: The (filtered) corpus.
    :param signal: 'length' or 'rating'.
    :return: Mapping dialogue id to target.
    """
    if signal == 'rating':
        return {d.id: (d.rating - 1) / 4.0 for d in corpus if d.rating is not None}
    if signal != 'length':
        raise ValueError('unknown signal {!r}'.format(signal))
    if len(corpus) == 0:
        raise EmptyCorpusError('no dialogues to normalize')
    lengths = [d.length for d in corpus]
    lo, hi = min(lengths), max(lengths)
    if hi == lo:
        raise DegenerateCorpusError('all dialogues have length {}, cannot normalize'.format(lo))
    return {d.id: (d.length - lo) / float(hi - lo) for d in corpus}


# ---------------------------------------------------------------------------------------------------------------
# Contexts, candidates and datasets


def context_indices(dialogue: Dialogue, position: int, system_turns: int = 3, user_turns: int = 3) -> List[int]:
    """
    Indices of the turns forming the context of the turn at `position`: the most recent system_turns system turns
    and user_turns user turns before it, in dialogue order.
    """
    picked = []
    n_sys = n_user = 0
    for i in range(position - 1, -1, -1):
        if n_sys >= system_turns and n_user >= user_turns:
            break
        if dialogue.turns[i].is_user:
            if n_user < user_turns:
                picked.append(i)
                n_user += 1
        elif n_sys < system_turns:
            picked.append(i)
            n_sys += 1
    return sorted(picked)


class TurnAnnotator:
    """
    Caches entities and sentiment of turns so that a turn shared by many contexts is only analysed once.
    """

    def __init__(self, extractor: Optional[EntityExtractor] = None, lexicon: Optional[SentimentLexicon] = None):
        self.extractor = extractor
        self.lexicon = lexicon or default_lexicon()
        self._entities = {}

    def entities(self, text: str) -> Tuple[str, ...]:
        e = self._entities.get(text)
        if e is None:
            e = tuple(extract_entities(text, self.extractor))
            if len(self._entities) > 200000:
                self._entities.clear()
            self._entities[text] = e
        return e

    def context(self, dialogue: Dialogue, position: int, cfg: Optional[CorpusConfig] = None) -> RankingContext:
        cfg = cfg or CorpusConfig()
        idx = context_indices(dialogue, position, cfg.context_system_turns, cfg.context_user_turns)
        turns = tuple(dialogue.turns[i] for i in idx)
        start = dialogue.turns[0].timestamp if dialogue.turns else 0.0
        return RankingContext(turns, tuple(self.entities(t.text) for t in turns), position, start)

    def candidate(self, turn: Turn) -> Candidate:
        return Candidate(turn.agent, turn.text, self.entities(turn.text), sentiment_score(turn.text, self.lexicon))


def _split_sizes(half: int, ratios: Sequence[int]) -> List[int]:
    """
    Per-split counts for one polarity side, summing to half.
    """
    total = float(sum(ratios))
    train = int(round(half * ratios[0] / total))
    dev = int(round(half * ratios[1] / total))
    return [train, dev, half - train - dev]


def _assign_dialogues(pairs_per_dialogue: List[Tuple[str, int]], ratios: Sequence[int], rng) -> Dict[str, int]:
    """
    Assign dialogues to splits so that the pair counts follow the ratios as closely as dialogue granularity allows.
    Dialogues are visited in random order and each goes to the split furthest below its share.
    :param pairs_per_dialogue: (dialogue id, number of pairs) for one polarity.
    :return: Mapping dialogue id to split index.
    """
    order = rng.permutation(len(pairs_per_dialogue))
    total = sum(n for _, n in pairs_per_dialogue)
    shares = np.asarray(ratios, dtype=np.float64) / float(sum(ratios)) * total
    shares[np.asarray(ratios) == 0] = -np.inf
    filled = np.zeros(len(ratios))
    assignment = {}
    for k in order:
        did, n = pairs_per_dialogue[k]
        split = int(np.argmax(shares - filled))
        assignment[did] = split
        filled[split] += n
    return assignment


def _largest_feasible(pool_sizes: Sequence[Sequence[int]], ratios: Sequence[int], limit: int) -> int:
    """
    Largest per-polarity count h <= limit whose split sizes fit into the pools of both polarities, 0 if none.
    """
    for h in range(limit, 0, -1):
        need = _split_sizes(h, ratios)
        if all(n <= p for sizes in pool_sizes for n, p in zip(need, sizes)):
            return h
    return 0


def build_dataset(corpus: Corpus, signal: str, size: int, seed: int = 42, cfg: Optional[CorpusConfig] = None,
                  annotator: Optional[TurnAnnotator] = None) -> Dataset:
    """
    Sample a balanced supervised dataset. Every system turn of a dialogue with target > 0.7 gives a positive
    context-response pair, of a dialogue with target < 0.3 a negative one, both labelled with the dialogue target.
    Dialogues are assigned to train/dev/test (8:1:1) as a whole, then size / 2 pairs per polarity are sampled
    without replacement. The assignment depends on the seed only, so the achievable size reported on failure is
    accepted by a second call with the same seed.
    :param corpus: Filtered corpus.
    :param signal: 'length' or 'rating'.
    :param size: Total number of instances, must be even.
    :param seed: Seed for dialogue assignment and sampling.
    :param cfg: Thresholds and split ratios.
    :param annotator: Turn annotator, a default one if None.
    :return: The Dataset, each split sorted by (dialogue id, turn index).
    """
    cfg = cfg or CorpusConfig()
    if size <= 0 or size % 2:
        raise DataError('dataset size must be a positive even number, got {}'.format(size))
    annotator = annotator or TurnAnnotator()
    targets = normalize_targets(corpus, signal)
    by_id = corpus.by_id()
    sides = {POSITIVE: [], NEGATIVE: []}
    for did in sorted(targets):
        t = targets[did]
        n = len(by_id[did].system_turn_indices())
        if n == 0:
            continue
        if t > cfg.positive_threshold:
            sides[POSITIVE].append((did, n))
        elif t < cfg.negative_threshold:
            sides[NEGATIVE].append((did, n))
    n_pos = sum(n for _, n in sides[POSITIVE])
    n_neg = sum(n for _, n in sides[NEGATIVE])
    half = size // 2
    log.info('%s signal: %d positive and %d negative eligible pairs', signal, n_pos, n_neg)

    rng = make_rng(seed)
    pools = {}
    for polarity in (POSITIVE, NEGATIVE):
        assignment = _assign_dialogues(sides[polarity], cfg.split, rng)
        pools[polarity] = [[] for _ in SPLITS]
        for did, _ in sides[polarity]:
            for j in by_id[did].system_turn_indices():
                pools[polarity][assignment[did]].append((did, j))
    pool_sizes = [[len(p) for p in pools[polarity]] for polarity in (POSITIVE, NEGATIVE)]
    achievable = 2 * _largest_feasible(pool_sizes, cfg.split, min(n_pos, n_neg))
    if size > achievable:
        raise InsufficientDataError(
            'cannot build {} balanced instances: {} positive and {} negative pairs available, split {} / {} '
            'by whole dialogues, the largest balanced size is {}'.format(size, n_pos, n_neg, pool_sizes[0],
                                                                          pool_sizes[1], achievable),
            achievable=achievable)

    per_split = _split_sizes(half, cfg.split)
    chosen = [[] for _ in SPLITS]
    for polarity in (POSITIVE, NEGATIVE):
        for s, need in enumerate(per_split):
            picks = rng.choice(len(pools[polarity][s]), size=need, replace=False)
            chosen[s].extend((pools[polarity][s][k], polarity) for k in sorted(picks))

    splits = []
    for s in range(len(SPLITS)):
        instances = []
        for (did, j), polarity in progress(sorted(chosen[s]), desc='building ' + SPLITS[s]):
            d = by_id[did]
            instances.append(TrainingInstance(annotator.context(d, j, cfg), annotator.candidate(d.turns[j]),
                                              targets[did], polarity, did, j))
        splits.append(instances)
    ds = Dataset(signal, splits[0], splits[1], splits[2], seed, n_pos, n_neg, achievable)
    log.info('dataset: %d train, %d dev, %d test', len(ds.train), len(ds.dev), len(ds.test))
    return ds


def write_dataset(dataset: Dataset, path):
    """
    Write a dataset as line oriented JSON with an explicit split field per instance.
    """
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps({'format_version': FORMAT_VERSION, 'signal': dataset.signal, 'seed': dataset.seed,
                            'eligible_positive': dataset.eligible_positive,
                            'eligible_negative': dataset.eligible_negative,
                            'achievable': dataset.achievable}) + '\n')
        for split in SPLITS:
            for inst in dataset.split(split):
                f.write(json.dumps(inst.to_json(split), ensure_ascii=False) + '\n')


def read_dataset(path) -> Dataset:
    header = {}
    parts = {s: [] for s in SPLITS}
    for line_no, record in _read_jsonl(path):
        if _check_header(record, line_no, path):
            header = record
            continue
        try:
            parts[record['split']].append(TrainingInstance.from_json(record))
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusFormatError('invalid instance: {}'.format(e), line_no, path)
    return Dataset(header.get('signal', 'length'), parts['train'], parts['dev'], parts['test'],
                   header.get('seed', 0), header.get('eligible_positive', 0), header.get('eligible_negative', 0),
                   header.get('achievable', 0))


# ---------------------------------------------------------------------------------------------------------------
# Explicit user feedback


def normalize_utterance(text: str) -> str:
    """
    Lowercase, strip punctuation and collapse whitespace, e.g. "Great, thank you!" -> "great thank you".
    """
    return ' '.join(words(text))


class FeedbackDetector:
    """
    Flags user turns that are explicit feedback: not blacklisted, and either whitelisted or short with a sentiment
    score beyond the threshold. The polarity selects positive or negative feedback.
    """

    def __init__(self, whitelist: Iterable[str], blacklist: Iterable[str] = (),
                 lexicon: Optional[SentimentLexicon] = None, threshold: float = 0.4, max_tokens: int = 8,
                 polarity: str = POSITIVE):
        self.whitelist = frozenset(normalize_utterance(w) for w in whitelist)
        self.blacklist = frozenset(normalize_utterance(b) for b in blacklist)
        self.lexicon = lexicon or default_lexicon()
        self.threshold = threshold
        self.max_tokens = max_tokens
        self.polarity = polarity

    @staticmethod
    def from_config(cfg: Optional[FeedbackConfig] = None, polarity: str = POSITIVE,
                    lexicon: Optional[SentimentLexicon] = None) -> FeedbackDetector:
        cfg = cfg or FeedbackConfig()
        whitelist = cfg.whitelist if polarity == POSITIVE else cfg.negative_whitelist
        return FeedbackDetector(read_lines(whitelist), read_lines(cfg.blacklist), lexicon, cfg.threshold,
                                cfg.max_tokens, polarity)

    def is_feedback(self, turn: Turn) -> bool:
        if not turn.is_user:
            return False
        norm = normalize_utterance(turn.text)
        if not norm or norm in self.blacklist:
            return False
        if norm in self.whitelist:
            return True
        if len(norm.split()) > self.max_tokens:
            return False
        score = sentiment_score(turn.text, self.lexicon)
        if self.polarity == POSITIVE:
            return score >= self.threshold
        return score <= -self.threshold

    def count(self, dialogue: Dialogue) -> int:
        return sum(1 for t in dialogue.turns if self.is_feedback(t))


@dataclass
class FeedbackExtraction:
    tuples: List[FeedbackTuple] = field(default_factory=list)
    flagged: int = 0
    skipped: int = 0


def _draw_bad_turn(rng, corpus: Corpus, system_turns: List[Tuple[int, int]], owners: np.ndarray, di: int,
                   good: Turn) -> Optional[Tuple[int, int]]:
    """
    A system turn of another dialogue whose bot or text differs from the good response. Draws at random first,
    then scans all turns from a random offset. None if every foreign system turn equals the good one.
    """
    def usable(k):
        bdi, bj = system_turns[k]
        bad = corpus[bdi].turns[bj]
        return owners[k] != di and (bad.agent, bad.text) != (good.agent, good.text)

    for _ in range(MAX_BAD_DRAWS):
        k = int(rng.integers(len(system_turns)))
        if usable(k):
            return system_turns[k]
    offset = int(rng.integers(len(system_turns)))
    for step in range(len(system_turns)):
        k = (offset + step) % len(system_turns)
        if usable(k):
            return system_turns[k]
    return None


def extract_feedback_set(corpus: Corpus, detector: FeedbackDetector, seed: int = 42,
                         annotator: Optional[TurnAnnotator] = None,
                         cfg: Optional[CorpusConfig] = None) -> FeedbackExtraction:
    """
    Build <context, good_response, bad_response> tuples. The good response is the system turn right before a user
    turn flagged as explicit feedback, the bad response a system turn drawn uniformly from all other dialogues,
    redrawn while it repeats the good response. Flagged turns without a system turn right before them, or without
    any differing system turn elsewhere, are skipped and counted.
    :param corpus: The corpus.
    :param detector: Feedback detector.
    :param seed: Seed for sampling bad responses.
    :return: FeedbackExtraction with the tuples and counts.
    """
    annotator = annotator or TurnAnnotator(lexicon=detector.lexicon)
    system_turns = [(di, j) for di, d in enumerate(corpus) for j in d.system_turn_indices()]
    owners = np.array([di for di, _ in system_turns], dtype=np.int64)
    own_counts = np.bincount(owners, minlength=len(corpus))
    rng = make_rng(seed)
    result = FeedbackExtraction()
    for di, d in enumerate(corpus):
        for i, turn in enumerate(d.turns):
            if not detector.is_feedback(turn):
                continue
            result.flagged += 1
            if i == 0 or d.turns[i - 1].is_user:
                result.skipped += 1
                continue
            if len(owners) - int(own_counts[di]) == 0:
                raise FeedbackSetError('no system turns in other dialogues to sample bad responses from')
            drawn = _draw_bad_turn(rng, corpus, system_turns, owners, di, d.turns[i - 1])
            if drawn is None:
                result.skipped += 1
                continue
            bdi, bj = drawn
            good = annotator.candidate(d.turns[i - 1])
            bad = annotator.candidate(corpus[bdi].turns[bj])
            result.tuples.append(FeedbackTuple(annotator.context(d, i - 1, cfg), good, bad, d.id, corpus[bdi].id))
    log.info('feedback set: %d flagged turns, %d tuples, %d skipped', result.flagged, len(result.tuples),
             result.skipped)
    return result


def write_tuples(tuples: Sequence[FeedbackTuple], path):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps({'format_version': FORMAT_VERSION}) + '\n')
        for t in tuples:
            f.write(json.dumps(t.to_json(), ensure_ascii=False) + '\n')


def read_tuples(path) -> List[FeedbackTuple]:
    tuples = []
    for line_no, record in _read_jsonl(path):
        if _check_header(record, line_no, path):
            continue
        try:
            tuples.append(FeedbackTuple.from_json(record))
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusFormatError('invalid feedback tuple: {}'.format(e), line_no, path)
    return tuples

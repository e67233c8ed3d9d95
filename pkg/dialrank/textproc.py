"""
Text processing: word-agent tokenization, the unified vocabulary, a capitalization and gazetteer based named entity
extractor and a lexicon based sentiment scorer.
"""
from __future__ import annotations
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence
from dialrank.config import TextConfig
from dialrank.errors import EmptyCorpusError, VocabularyError

log = logging.getLogger(__name__)

PAD = '<pad>'
UNK = '<unk>'
PAD_ID = 0
UNK_ID = 1
AGENT_SEP = '|'
ENTITY_TAG = 'ENT'
MAX_TOKENS = 30
SQUASH_ALPHA = 15.0
NEGATION_SCOPE = 3
BOOST = 0.25

_WORD_RE = re.compile(r"[\w']+", re.UNICODE)
_CASED_WORD_RE = re.compile(r"[\w']+|[.!?]", re.UNICODE)

NEGATIONS = frozenset([
    'not', 'no', 'never', 'none', 'nobody', 'nothing', 'neither', 'nor', 'nowhere', 'cannot', "can't", "don't",
    "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't", "won't", "wouldn't", "shouldn't", "couldn't",
    "haven't", "hasn't", "hadn't", "ain't", 'dont', 'doesnt', 'didnt', 'isnt', 'wasnt', 'cant', 'wont',
])

BOOSTERS = frozenset([
    'very', 'really', 'so', 'extremely', 'absolutely', 'totally', 'incredibly', 'super', 'pretty', 'quite',
    'truly', 'most', 'highly', 'especially', 'utterly', 'completely', 'awfully', 'deeply',
])

DAMPENERS = frozenset([
    'barely', 'hardly', 'slightly', 'somewhat', 'kinda', 'sorta', 'marginally',
    'partly', 'scarcely', 'occasionally',
])


def words(text: str) -> List[str]:
    """
    Lowercase and split on whitespace and punctuation. Apostrophes stay inside words ("don't").
    :param text: Raw text.
    :return: List of lowercased words.
    """
    return _WORD_RE.findall(text.lower())


def read_lines(path) -> List[str]:
    """
    Read a UTF-8 line file, skipping empty lines and # comments.
    """
    with open(path, encoding='utf-8') as f:
        return [l.strip() for l in f if l.strip() and not l.startswith('#')]


def normalize_entity(entity: str) -> str:
    """
    Entities are lowercased and spaces become underscores, e.g. "Darth Vader" -> "darth_vader".
    """
    return '_'.join(entity.lower().split())


class EntityExtractor:
    """
    Named entity extraction by a capitalization heuristic plus a gazetteer. Maximal runs of capitalized words are
    entities; leading stopwords are stripped from a run ("The Beatles" -> "beatles"), a single stopword is never an
    entity and a single capitalized word at the beginning of a sentence only counts if the gazetteer knows it.
    Any other extractor with the same extract() signature can be dropped in instead.
    """

    def __init__(self, gazetteer: Iterable[str] = (), stopwords: Iterable[str] = (), max_ngram: int = 4):
        """
        Init the extractor.
        :param gazetteer: Known entity names, any casing.
        :param stopwords: Words that never start an entity.
        :param max_ngram: Longest gazetteer entry, in words, that is matched.
        """
        self.gazetteer = frozenset(normalize_entity(g) for g in gazetteer)
        self.stopwords = frozenset(s.lower() for s in stopwords)
        self.max_ngram = max_ngram

    @staticmethod
    def from_config(cfg: TextConfig) -> EntityExtractor:
        return EntityExtractor(read_lines(cfg.gazetteer), read_lines(cfg.stopwords))

    def extract(self, text: str) -> List[str]:
        """
        Extract the entities of a text.
        :param text: Raw text with original casing.
        :return: Normalized entities in order of first occurrence, without duplicates.
        """
        found = []
        sentence_start = True
        run = []
        run_at_start = False

        def close_run():
            tokens = list(run)
            while tokens and tokens[0].lower() in self.stopwords:
                tokens.pop(0)
            if not tokens:
                return
            name = normalize_entity(' '.join(tokens))
            if len(tokens) == 1:
                if tokens[0].lower() in self.stopwords:
                    return
                if run_at_start and len(run) == 1 and name not in self.gazetteer:
                    return
            found.append(name)

        for tok in _CASED_WORD_RE.findall(text):
            if tok in '.!?':
                if run:
                    close_run()
                    run = []
                sentence_start = True
                continue
            if tok[0].isupper():
                if not run:
                    run_at_start = sentence_start
                run.append(tok)
            elif run:
                close_run()
                run = []
            sentence_start = False
        if run:
            close_run()

        lowered = words(text)
        for n in range(self.max_ngram, 0, -1):
            for i in range(len(lowered) - n + 1):
                cand = '_'.join(lowered[i:i + n])
                if cand in self.gazetteer:
                    found.append(cand)
        seen = set()
        result = []
        for e in found:
            if e not in seen:
                seen.add(e)
                result.append(e)
        return result


def extract_entities(text: str, extractor: Optional[EntityExtractor] = None) -> List[str]:
    """
    Extract named entities from a text.
    :param text: Raw text.
    :param extractor: The extractor to use, the bundled gazetteer and stopwords if None.
    :return: Normalized entity strings (lowercase, no spaces).
    """
    if extractor is None:
        extractor = _default_extractor()
    return extractor.extract(text)


_DEFAULT_EXTRACTOR = None


def _default_extractor() -> EntityExtractor:
    global _DEFAULT_EXTRACTOR
    if _DEFAULT_EXTRACTOR is None:
        _DEFAULT_EXTRACTOR = EntityExtractor.from_config(TextConfig())
    return _DEFAULT_EXTRACTOR


def tokenize(turn, entities: Optional[Sequence[str]] = None, max_tokens: int = MAX_TOKENS,
             extractor: Optional[EntityExtractor] = None, with_agent: bool = True,
             with_entities: bool = True) -> List[str]:
    """
    Word-agent tokens of a turn: every word is prefixed by the agent ("user|hello"), truncated to max_tokens, then
    the entity tokens ("ENT|darth_vader") of the same turn are appended.
    :param turn: Anything with .agent and .text (Turn, Candidate with .bot is handled too).
    :param entities: Precomputed entities of the turn, extracted from the text if None.
    :param max_tokens: Truncation for word tokens.
    :param extractor: Entity extractor used when entities is None.
    :param with_agent: Prefix words with the agent tag. Plain words if False.
    :param with_entities: Append entity tokens.
    :return: List of surface tokens.
    """
    agent = getattr(turn, 'agent', None) or getattr(turn, 'bot', None)
    ws = words(turn.text)[:max_tokens]
    if with_agent:
        tokens = [agent + AGENT_SEP + w for w in ws]
    else:
        tokens = ws
    if with_entities:
        if entities is None:
            entities = extract_entities(turn.text, extractor)
        tokens += [ENTITY_TAG + AGENT_SEP + e for e in entities]
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """
    Unified vocabulary over word-agent and entity tokens. Id 0 is padding and id 1 the unknown token.
    """
    tokens: tuple
    index: Dict[str, int] = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if len(self.tokens) < 2 or self.tokens[PAD_ID] != PAD or self.tokens[UNK_ID] != UNK:
            raise VocabularyError('vocabulary must start with padding and unknown tokens')
        index = {t: i for i, t in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise VocabularyError('vocabulary contains duplicate tokens')
        object.__setattr__(self, 'index', index)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def encode(self, tokens: Sequence[str]) -> List[int]:
        """
        Token ids, unknown tokens map to UNK_ID.
        """
        return [self.index.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.tokens[i] for i in ids]


def build_vocab(token_sequences: Iterable[Sequence[str]], max_size: int = 60000) -> Vocabulary:
    """
    Build the vocabulary from tokenized text. The most frequent tokens are kept, ties are broken by lexicographic
    order so the result is deterministic.
    :param token_sequences: Iterable of token lists.
    :param max_size: Maximum size including padding and unknown.
    :return: The Vocabulary.
    """
    counts = Counter()
    n = 0
    for seq in token_sequences:
        counts.update(seq)
        n += 1
    if n == 0:
        raise EmptyCorpusError('cannot build a vocabulary from an empty corpus')
    if max_size < 2:
        raise VocabularyError('max_size must leave room for padding and unknown')
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size - 2]
    log.debug('vocabulary: %d distinct tokens, keeping %d', len(counts), len(ranked))
    return Vocabulary(tuple([PAD, UNK] + [t for t, _ in ranked]))


@dataclass(frozen=True)
class SentimentLexicon:
    """
    Term valences in [-1, 1] plus negation, booster and dampener terms.
    """
    valences: Dict[str, float]
    negations: FrozenSet[str] = NEGATIONS
    boosters: FrozenSet[str] = BOOSTERS
    dampeners: FrozenSet[str] = DAMPENERS

    def __post_init__(self):
        for term, v in self.valences.items():
            if not -1.0 <= v <= 1.0:
                raise VocabularyError('valence of {!r} outside [-1, 1]: {}'.format(term, v))

    @staticmethod
    def load(path) -> SentimentLexicon:
        """
        Load a term<TAB>valence file.
        """
        valences = {}
        with open(path, encoding='utf-8') as f:
            for line in f:
                if not line.strip() or line.startswith('#'):
                    continue
                term, value = line.rstrip('\n').split('\t')[:2]
                valences[term.strip().lower()] = float(value)
        return SentimentLexicon(valences)


_DEFAULT_LEXICON = None


def default_lexicon() -> SentimentLexicon:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = SentimentLexicon.load(TextConfig().lexicon)
    return _DEFAULT_LEXICON


def squash(x: float, alpha: float = SQUASH_ALPHA) -> float:
    """
    Map an unbounded sum into (-1, 1) by x / sqrt(x^2 + alpha).
    """
    return x / math.sqrt(x * x + alpha)


def sentiment_score(text: str, lexicon: Optional[SentimentLexicon] = None) -> float:
    """
    Lexicon based sentiment. Valences are summed, a negation flips the valence of the next NEGATION_SCOPE tokens,
    a booster (dampener) right before a term scales it by 1 + BOOST (1 - BOOST). The sum is squashed into [-1, 1].
    :param text: Raw text.
    :param lexicon: The lexicon, bundled default if None.
    :return: Score in [-1, 1], 0.0 for text without sentiment terms.
    """
    if lexicon is None:
        lexicon = default_lexicon()
    tokens = words(text)
    total = 0.0
    negated_until = -1
    for i, tok in enumerate(tokens):
        if tok in lexicon.negations:
            negated_until = i + NEGATION_SCOPE
            continue
        v = lexicon.valences.get(tok)
        if v is None:
            continue
        if i > 0 and tokens[i - 1] in lexicon.boosters:
            v *= 1.0 + BOOST
        elif i > 0 and tokens[i - 1] in lexicon.dampeners:
            v *= 1.0 - BOOST
        if i <= negated_until:
            v = -v
        total += v
    if total == 0.0:
        return 0.0
    return squash(total)

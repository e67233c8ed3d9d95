from __future__ import annotations
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional
from dialrank.errors import ConfigError

RESOURCES = Path(__file__).resolve().parent / 'resources'


@dataclass
class CorpusConfig:
    """
    Corpus filtering and dataset construction.
    """
    blacklist: List[str] = field(default_factory=lambda: ['quizbot'])
    percentile: float = 95.0
    percentile_strict: bool = False
    min_turns: int = 3
    positive_threshold: float = 0.7
    negative_threshold: float = 0.3
    split: List[int] = field(default_factory=lambda: [8, 1, 1])
    context_system_turns: int = 3
    context_user_turns: int = 3


@dataclass
class TextConfig:
    max_tokens: int = 30
    max_vocab: int = 60000
    lexicon: str = str(RESOURCES / 'sentiment_lexicon.tsv')
    gazetteer: str = str(RESOURCES / 'gazetteer.txt')
    stopwords: str = str(RESOURCES / 'stopwords.txt')
    dull_phrases: str = str(RESOURCES / 'dull_phrases.txt')


@dataclass
class FeedbackConfig:
    whitelist: str = str(RESOURCES / 'feedback_whitelist.txt')
    blacklist: str = str(RESOURCES / 'feedback_blacklist.txt')
    negative_whitelist: str = str(RESOURCES / 'negative_feedback.txt')
    threshold: float = 0.4
    max_tokens: int = 8


@dataclass
class TopicConfig:
    topics: int = 20
    alpha: Optional[float] = None  # None means 50 / topics
    beta: float = 0.01
    iterations: int = 200
    inference_sweeps: int = 20
    max_documents: int = 1000


@dataclass
class NeuralConfig:
    embedding_size: int = 256
    gru_size: int = 128
    sem_size: int = 128
    predictor: List[int] = field(default_factory=lambda: [128])
    learning_rate: float = 0.01
    batch_size: int = 8
    dropout: float = 0.4
    max_epochs: int = 20
    patience: int = 3
    roster: List[str] = field(default_factory=list)  # empty: the bots seen in the dataset


@dataclass
class DualEncoderConfig:
    embedding_size: int = 128
    hidden_size: int = 256
    predictor: List[int] = field(default_factory=lambda: [128])
    learning_rate: float = 0.01
    batch_size: int = 8
    dropout: float = 0.0
    max_epochs: int = 20
    patience: int = 3


@dataclass
class LinearConfig:
    bits: int = 18
    learning_rate: float = 0.05
    passes: int = 1
    ngram_max: int = 3
    positions: int = 5
    interaction_order: int = 2


@dataclass
class HandcraftedConfig:
    coherence: float = 1.0
    information_flow: float = 0.5
    dullness: float = -1.5
    entity_overlap: float = 1.0
    topic_divergence: float = -0.5
    sentiment: float = 0.5

    def coefficients(self) -> List[float]:
        """
        The coefficients in the fixed handcrafted feature order.
        :return: List of 6 floats.
        """
        return [self.coherence, self.information_flow, self.dullness, self.entity_overlap,
                self.topic_divergence, self.sentiment]


@dataclass
class GeneratorConfig:
    n_dialogues: int = 50000
    bots: List[str] = field(default_factory=lambda: ['factbot', 'newsbot', 'persona', 'chitchat', 'quizbot'])
    good_bots: List[str] = field(default_factory=lambda: ['factbot', 'newsbot'])
    topics: int = 20
    vocabulary: int = 2000
    quality_low: float = 0.0
    quality_high: float = 1.0
    length_base: int = 6
    length_gain: float = 24.0
    length_noise: float = 2.0
    rating_noise: float = 0.8
    rated_fraction: float = 0.5
    feedback_probability: float = 0.5
    negative_feedback_probability: float = 0.3
    quiz_probability: float = 0.05
    offtopic_fraction: float = 0.5
    start_time: float = 1500000000.0
    seed: int = 7


@dataclass
class Config:
    """
    All configuration groups. A config file addresses fields as <group>.<field> = <value>.
    """
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    text: TextConfig = field(default_factory=TextConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    topics: TopicConfig = field(default_factory=TopicConfig)
    neural: NeuralConfig = field(default_factory=NeuralConfig)
    dual_encoder: DualEncoderConfig = field(default_factory=DualEncoderConfig)
    linear: LinearConfig = field(default_factory=LinearConfig)
    handcrafted: HandcraftedConfig = field(default_factory=HandcraftedConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)


@dataclass
class RunConfig:
    """
    One CLI invocation.
    """
    command: str
    inputs: List[str] = field(default_factory=list)
    out: Optional[str] = None
    signal: str = 'length'
    ranker: str = 'neural'
    overrides: Dict[str, str] = field(default_factory=dict)
    seed: int = 42
    config: Config = field(default_factory=Config)


def _parse_value(raw: str, target_type, key: str):
    """
    Parse a string according to a dataclass field type.
    :param raw: The raw string from the file.
    :param target_type: The resolved field type.
    :param key: The key, for error messages.
    :return: The parsed value.
    """
    raw = raw.strip()
    origin = typing.get_origin(target_type)
    args = typing.get_args(target_type)
    try:
        if origin is typing.Union:
            inner = [a for a in args if a is not type(None)][0]
            if raw.lower() in ('none', ''):
                return None
            return _parse_value(raw, inner, key)
        if origin in (list, List):
            if raw == '':
                return []
            return [_parse_value(v, args[0], key) for v in raw.split(',')]
        if target_type is bool:
            if raw.lower() in ('1', 'true', 'yes', 'on'):
                return True
            if raw.lower() in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(raw)
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except (ValueError, IndexError):
        raise ConfigError('cannot parse {} = {!r}'.format(key, raw))


def apply_overrides(obj, values: Dict[str, str]):
    """
    Set fields of a (nested) config dataclass from dotted keys.
    :param obj: A Config or one of its groups.
    :param values: Mapping "group.field" (or "field" for a group) to raw string values.
    :return: obj, modified in place.
    """
    for key, raw in values.items():
        target = obj
        parts = key.split('.')
        for p in parts[:-1]:
            if not dataclasses.is_dataclass(target) or not hasattr(target, p):
                raise ConfigError('unknown configuration key {!r}'.format(key))
            target = getattr(target, p)
        name = parts[-1]
        hints = typing.get_type_hints(type(target)) if dataclasses.is_dataclass(target) else {}
        if name not in hints or dataclasses.is_dataclass(hints[name]):
            raise ConfigError('unknown configuration key {!r}'.format(key))
        setattr(target, name, _parse_value(raw, hints[name], key))
    return obj


def read_key_values(path) -> Dict[str, str]:
    """
    Read a plain-text key = value file. Empty lines and lines starting with # are skipped.
    :param path: Path to the file.
    :return: Ordered mapping of keys to raw values.
    """
    values = {}
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise ConfigError('{}:{}: expected key = value'.format(path, line_no))
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


def load_config(path=None, overrides: Optional[Dict[str, str]] = None) -> Config:
    """
    Build the effective configuration: defaults, then the file, then explicit overrides.
    :param path: Optional path of a key = value file.
    :param overrides: Optional dotted-key overrides that win over the file.
    :return: The Config.
    """
    cfg = Config()
    if path is not None:
        apply_overrides(cfg, read_key_values(path))
    if overrides:
        apply_overrides(cfg, overrides)
    return cfg


def to_dict(obj) -> dict:
    """
    Plain dictionary of a config dataclass, e.g. for storing in a checkpoint.
    """
    return dataclasses.asdict(obj)


def from_dict(cls, values: dict):
    """
    Inverse of to_dict() for one config group. Unknown keys are ignored so older checkpoints stay loadable.
    """
    names = {f.name for f in dataclasses.fields(cls)}
    return cls(**{k: v for k, v in values.items() if k in names})

"""
The response rankers. Every kind scores (context, candidate) pairs in [0, 1] and is stored in the same checkpoint
format.
"""
from typing import Optional, Tuple
from dialrank.config import Config
from dialrank.errors import ConfigError
from dialrank.rankers.base import KINDS, Ranker, load_checkpoint, rank, save_checkpoint
from dialrank.rankers.baseline import RandomRanker
from dialrank.rankers.dualencoder import DualEncoderRanker, dual_encoder_score, train_dual_encoder
from dialrank.rankers.handcrafted import HandcraftedRanker, fit_handcrafted, handcrafted_score
from dialrank.rankers.linear import LinearRanker, linear_score, train_linear
from dialrank.rankers.neural import NeuralRanker, grid_search, neural_score, train_neural
from dialrank.rankers.training import TrainingReport


def train_ranker(kind: str, dataset, cfg: Optional[Config] = None,
                 seed: int = 42) -> Tuple[Ranker, Optional[TrainingReport]]:
    """
    Train (or prepare) a ranker of the given kind on a dataset.
    :param kind: One of KINDS.
    :param dataset: Dataset from build_dataset().
    :param cfg: The effective configuration.
    :param seed: Run seed.
    :return: (ranker, report), the report is None for rankers without epochs.
    """
    cfg = cfg or Config()
    if kind == 'neural':
        return train_neural(dataset, cfg.neural, seed, cfg.text)
    if kind == 'dual_encoder':
        return train_dual_encoder(dataset, cfg.dual_encoder, seed, cfg.text)
    if kind == 'linear':
        return train_linear(dataset, cfg.linear, seed, cfg.text), None
    if kind == 'handcrafted':
        return fit_handcrafted(dataset, cfg.handcrafted, cfg.topics, seed, cfg.text), None
    if kind == 'random':
        return RandomRanker(seed), None
    raise ConfigError('unknown ranker kind {!r}, expected one of {}'.format(kind, ', '.join(sorted(KINDS))))

"""
The random reference ranker: a uniform score hashed from the seed and the pair, so repeated scoring of a pair agrees.
"""
from __future__ import annotations
import numpy as np
from dialrank.rankers.base import Ranker, register
from dialrank.tools import fnv1a_64

UNIT = float(2 ** 53)


@register
class RandomRanker(Ranker):
    kind = 'random'

    def __init__(self, seed: int = 42):
        self.seed = seed

    def key(self, context, candidate) -> str:
        turns = '\n'.join('{}:{}'.format(t.agent, t.text) for t in context.turns)
        return '{}|{}|{}|{}'.format(self.seed, turns, candidate.bot, candidate.text)

    def score_many(self, pairs) -> np.ndarray:
        # top 53 bits: exactly representable, in [0, 1)
        return np.array([(fnv1a_64(self.key(c, r)) >> 11) / UNIT for c, r in pairs])

    def checkpoint(self):
        return {'seed': self.seed}, {}

    @classmethod
    def from_checkpoint(cls, header, arrays) -> RandomRanker:
        return cls(header['seed'])

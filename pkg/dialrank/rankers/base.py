from __future__ import annotations
import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple, Type
import numpy as np
from dialrank.errors import CheckpointError, DataError
from dialrank.writer import Writer

log = logging.getLogger(__name__)

KINDS: Dict[str, Type['Ranker']] = {}


def register(cls):
    """
    Class decorator making a ranker kind loadable from checkpoints.
    """
    KINDS[cls.kind] = cls
    return cls


class Ranker(ABC):
    """
    Scores (context, candidate) pairs with a value in [0, 1]. Scoring is deterministic and does not change the
    ranker.
    """
    kind = ''

    @abstractmethod
    def score_many(self, pairs: Sequence[Tuple[object, object]]) -> np.ndarray:
        """
        Score many (RankingContext, Candidate) pairs.
        :return: Array of scores in [0, 1].
        """

    def score(self, context, candidate) -> float:
        return float(self.score_many([(context, candidate)])[0])

    @abstractmethod
    def checkpoint(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        """
        Header block and named arrays that from_checkpoint() restores the ranker from.
        """

    @classmethod
    @abstractmethod
    def from_checkpoint(cls, header: dict, arrays: Dict[str, np.ndarray]) -> Ranker:
        pass


def save_checkpoint(ranker: Ranker, path):
    """
    Store a ranker. load_checkpoint() of the file scores every input exactly like the ranker.
    """
    header, arrays = ranker.checkpoint()
    header = dict(header, kind=ranker.kind)
    Writer.write_checkpoint(path, header, arrays)
    log.info('saved %s ranker to %s', ranker.kind, path)


def load_checkpoint(path) -> Ranker:
    header, arrays = Writer.read_checkpoint(path)
    kind = header.get('kind')
    if kind not in KINDS:
        raise CheckpointError('{}: unknown ranker kind {!r}'.format(path, kind))
    return KINDS[kind].from_checkpoint(header, arrays)


def rank(ranker: Ranker, context, candidates: Sequence) -> List[Tuple[object, float]]:
    """
    Sort candidates by descending score. The sort is stable, equal scores keep the input order.
    :param ranker: The ranker.
    :param context: RankingContext.
    :param candidates: Candidates, at least one.
    :return: (candidate, score) pairs, best first.
    """
    if not candidates:
        raise DataError('nothing to rank: empty candidate list')
    scores = ranker.score_many([(context, c) for c in candidates])
    order = sorted(range(len(candidates)), key=lambda i: -scores[i])
    return [(candidates[i], float(scores[i])) for i in order]

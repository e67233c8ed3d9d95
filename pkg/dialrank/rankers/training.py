"""
Shared training loop of the network rankers: minibatch Adagrad on the mean squared error against the instance
targets with early stopping on the development loss.
"""
from __future__ import annotations
import logging
import math
from abc import abstractmethod
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple
import numpy as np
from dialrank.allocation import ParameterAllocation
from dialrank.errors import DataError, NonFiniteError
from dialrank.nodes.dense import mse_grad, mse_loss
from dialrank.optimizer import AdagradState, adagrad_update
from dialrank.rankers.base import Ranker
from dialrank.tools import make_rng, progress

log = logging.getLogger(__name__)

SCORE_BATCH = 64


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float


@dataclass
class TrainingReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_loss: float = math.inf
    stopped_early: bool = False

    def to_tsv(self) -> str:
        lines = ['epoch\ttrain_loss\tdev_loss\tselected']
        for r in self.epochs:
            lines.append('{}\t{:.6f}\t{:.6f}\t{}'.format(r.epoch, r.train_loss, r.dev_loss,
                                                        int(r.epoch == self.best_epoch)))
        return '\n'.join(lines) + '\n'


class NetworkRanker(Ranker):
    """
    A ranker made of nodes with parameters in one ParameterAllocation and hand written backward passes.
    """
    alloc: ParameterAllocation

    @abstractmethod
    def prepare(self, pairs: Sequence[Tuple[object, object]]) -> list:
        """
        Turn (context, candidate) pairs into model inputs (token ids, side features), once per dataset.
        """

    @abstractmethod
    def forward(self, batch: list, train: bool = False, rng: np.random.Generator = None) -> np.ndarray:
        """
        Scores of prepared inputs. With train=True dropout is active and the caches for backward() are kept.
        """

    @abstractmethod
    def backward(self, dpred: np.ndarray):
        """
        Accumulate the gradients of all parameters from the gradient with respect to the scores.
        """

    def predict(self, prepared: list) -> np.ndarray:
        out = [self.forward(prepared[k:k + SCORE_BATCH]) for k in range(0, len(prepared), SCORE_BATCH)]
        return np.concatenate(out) if out else np.zeros(0)

    def score_many(self, pairs) -> np.ndarray:
        return self.predict(self.prepare(pairs))

    def loss(self, prepared: list, targets: np.ndarray) -> float:
        return mse_loss(self.predict(prepared), targets)


def fit_network(model: NetworkRanker, train: Sequence, dev: Sequence, learning_rate: float, batch_size: int,
                max_epochs: int, patience: int, seed: int) -> TrainingReport:
    """
    Train a network ranker in place. After every epoch the development loss is computed; the parameters of the
    epoch with the lowest development loss are kept. Training stops after `patience` epochs without improvement.
    :param model: The ranker to train.
    :param train: Training instances.
    :param dev: Development instances, the training loss selects the epoch if empty.
    :param learning_rate: Adagrad learning rate.
    :param batch_size: Instances per update.
    :param max_epochs: Upper bound of epochs.
    :param patience: Epochs without improvement before stopping.
    :param seed: Seed of shuffling and dropout.
    :return: TrainingReport with per-epoch losses.
    """
    if not train:
        raise DataError('no training instances')
    x_train = model.prepare([(i.context, i.response) for i in train])
    y_train = np.array([i.target for i in train], dtype=np.float64)
    x_dev = model.prepare([(i.context, i.response) for i in dev])
    y_dev = np.array([i.target for i in dev], dtype=np.float64)
    state = AdagradState(learning_rate)
    rng = make_rng(seed, 2)
    report = TrainingReport()
    best_params = model.alloc.snapshot()
    bad_epochs = 0
    n = len(x_train)
    log.info('training %s ranker: %d parameters, %d train, %d dev instances', model.kind,
             model.alloc.n_parameters(), n, len(x_dev))
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in progress(range(0, n, batch_size), desc='epoch {}'.format(epoch)):
            idx = order[start:start + batch_size]
            model.alloc.zero_grads()
            pred = model.forward([x_train[k] for k in idx], train=True, rng=rng)
            batch_loss = mse_loss(pred, y_train[idx])
            if not math.isfinite(batch_loss):
                log.error('epoch %d, batch at %d: loss is %s, last finite epoch loss %s', epoch, start,
                          batch_loss, report.epochs[-1].train_loss if report.epochs else None)
                raise NonFiniteError('loss', 'epoch {}'.format(epoch))
            model.backward(mse_grad(pred, y_train[idx]))
            adagrad_update(model.alloc.params, model.alloc.grads, state)
            total += batch_loss * len(idx)
        train_loss = total / n
        dev_loss = model.loss(x_dev, y_dev) if x_dev else model.loss(x_train, y_train)
        report.epochs.append(EpochRecord(epoch, train_loss, dev_loss))
        improved = dev_loss < report.best_dev_loss
        log.info('epoch %d: train loss %.5f, dev loss %.5f%s', epoch, train_loss, dev_loss,
                 ' (best)' if improved else '')
        if improved:
            report.best_epoch = epoch
            report.best_dev_loss = dev_loss
            best_params = model.alloc.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= patience:
                report.stopped_early = epoch < max_epochs
                break
    model.alloc.restore(best_params)
    model.alloc.round_to_float32()
    model.alloc.zero_grads()
    log.info('selected epoch %d with dev loss %.5f', report.best_epoch, report.best_dev_loss)
    return report

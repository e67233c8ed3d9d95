"""
Adagrad and a finite difference gradient check.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict
import numpy as np
from dialrank.allocation import ParameterAllocation, SparseGrad
from dialrank.errors import NonFiniteError, ShapeError
from dialrank.tools import make_rng

log = logging.getLogger(__name__)

EPSILON = 1e-8


@dataclass
class AdagradState:
    """
    Squared gradient accumulators G per parameter name, created on first use with zeros.
    """
    learning_rate: float = 0.01
    epsilon: float = EPSILON
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)


def _check_finite(name: str, g):
    values = g.values if isinstance(g, SparseGrad) else g
    if not np.all(np.isfinite(values)):
        norm = float(np.sqrt(np.nansum(np.where(np.isinf(values), 0.0, values) ** 2)))
        log.error('non-finite gradient for %s (finite part norm %.6g, %d bad entries)', name, norm,
                  int(np.sum(~np.isfinite(values))))
        raise NonFiniteError(name, 'gradient contains NaN or infinity')


def adagrad_update(params: Dict[str, np.ndarray], grads: Dict[str, object], state: AdagradState):
    """
    One Adagrad step, entrywise G += g^2, theta -= lr * g / (sqrt(G) + eps). Sparse gradients only touch their
    rows. Parameters without a gradient stay unchanged. All gradients are checked before anything is updated.
    :param params: Parameters by name, updated in place.
    :param grads: Dense arrays or SparseGrad by name.
    :param state: The AdagradState, updated in place.
    :return: (params, state)
    """
    for name, g in grads.items():
        if name not in params:
            raise ShapeError('gradient for unknown parameter {}'.format(name))
        _check_finite(name, g)
    for name, g in grads.items():
        p = params[name]
        acc = state.accumulators.get(name)
        if acc is None:
            acc = state.accumulators[name] = np.zeros_like(p)
        if isinstance(g, SparseGrad):
            acc[g.rows] += g.values ** 2
            p[g.rows] -= state.learning_rate * g.values / (np.sqrt(acc[g.rows]) + state.epsilon)
        else:
            if g.shape != p.shape:
                raise ShapeError('gradient of {} has shape {}, parameter {}'.format(name, g.shape, p.shape))
            acc += g * g
            p -= state.learning_rate * g / (np.sqrt(acc) + state.epsilon)
    return params, state


def gradient_check(loss: Callable[[], float], alloc: ParameterAllocation, step: float = 1e-5,
                   max_entries: int = 40, seed: int = 0, names=None) -> Dict[str, float]:
    """
    Compare the gradients in alloc.grads (computed by the caller for the current parameters) with central finite
    differences of `loss`. For each parameter up to max_entries entries are checked, entries with non-zero
    analytic gradient first.
    :param loss: Evaluates the loss at the current parameters without touching the gradients.
    :param alloc: The allocation holding parameters and analytic gradients.
    :param step: Finite difference step.
    :param max_entries: Entries checked per parameter.
    :param seed: Seed for choosing the entries.
    :param names: Parameters to check, all if None.
    :return: Relative error ||a - n|| / (||a|| + ||n||) per parameter, 0 where both norms are below 1e-7.
    """
    rng = make_rng(seed)
    errors = {}
    for name in names or list(alloc.params):
        p = alloc.params[name]
        analytic = alloc.dense_grad(name).ravel()
        flat = p.reshape(-1)
        nonzero = np.flatnonzero(analytic)
        zero = np.flatnonzero(analytic == 0)
        picked = rng.permutation(nonzero)[:max_entries]
        if len(picked) < max_entries:
            picked = np.concatenate([picked, rng.permutation(zero)[:max_entries - len(picked)]])
        a = analytic[picked]
        n = np.zeros(len(picked))
        for k, idx in enumerate(picked):
            orig = flat[idx]
            flat[idx] = orig + step
            plus = loss()
            flat[idx] = orig - step
            minus = loss()
            flat[idx] = orig
            n[k] = (plus - minus) / (2.0 * step)
        denom = np.linalg.norm(a) + np.linalg.norm(n)
        # both vanish: agreement up to round-off
        errors[name] = 0.0 if denom < 1e-7 else float(np.linalg.norm(a - n) / denom)
        log.debug('gradient check %s: relative error %.3g over %d entries', name, errors[name], len(picked))
    return errors

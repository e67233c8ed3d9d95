from __future__ import annotations
from dataclasses import dataclass
from typing import Dict, Union
import numpy as np
from dialrank.errors import ShapeError
from dialrank.tools import as_float32_exact


@dataclass
class SparseGrad:
    """
    Gradient of a few rows of a large table, e.g. the embedding rows of the tokens in a batch.
    """
    rows: np.ndarray
    values: np.ndarray


Grad = Union[np.ndarray, SparseGrad]


class ParameterAllocation:
    """
    Allocates the named parameters of one model and collects their gradients. Names are unique, allocating a name
    twice gives the second one a numeric suffix.
    """

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, Grad] = {}

    def allocate(self, name: str, init_data: np.ndarray) -> str:
        """
        Allocate a parameter.
        :param name: Name of the parameter. A number will be added to get a unique name.
        :param init_data: Initial data, e.g. random weights.
        :return: The unique name.
        """
        unique = name
        index = 0
        while unique in self.params:
            index += 1
            unique = '{}_{}'.format(name, index)
        self.params[unique] = np.array(init_data, dtype=np.float64)
        return unique

    def zero_grads(self):
        self.grads = {}

    def add_grad(self, name: str, g: np.ndarray):
        """
        Accumulate a dense gradient.
        """
        if g.shape != self.params[name].shape:
            raise ShapeError('gradient of {} has shape {}, parameter {}'.format(name, g.shape,
                                                                                 self.params[name].shape))
        cur = self.grads.get(name)
        if cur is None:
            self.grads[name] = g.copy()
        elif isinstance(cur, SparseGrad):
            dense = g.copy()
            np.add.at(dense, cur.rows, cur.values)
            self.grads[name] = dense
        else:
            cur += g

    def add_sparse_grad(self, name: str, rows: np.ndarray, values: np.ndarray):
        """
        Accumulate a gradient for some rows of a table. Rows may repeat.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        values = values.reshape((len(rows),) + self.params[name].shape[1:])
        cur = self.grads.get(name)
        if isinstance(cur, np.ndarray):
            np.add.at(cur, rows, values)
            return
        if cur is not None:
            rows = np.concatenate([cur.rows, rows])
            values = np.concatenate([cur.values, values])
        uniq, inverse = np.unique(rows, return_inverse=True)
        summed = np.zeros((len(uniq),) + values.shape[1:])
        np.add.at(summed, inverse, values)
        self.grads[name] = SparseGrad(uniq, summed)

    def dense_grad(self, name: str) -> np.ndarray:
        """
        The gradient of a parameter as dense array, zeros if none was accumulated.
        """
        g = self.grads.get(name)
        if g is None:
            return np.zeros_like(self.params[name])
        if isinstance(g, SparseGrad):
            dense = np.zeros_like(self.params[name])
            dense[g.rows] = g.values
            return dense
        return g

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def restore(self, arrays: Dict[str, np.ndarray]):
        """
        Replace all parameters, e.g. from a snapshot or a checkpoint. Names and shapes must match.
        """
        if set(arrays) != set(self.params):
            missing = sorted(set(self.params) ^ set(arrays))
            raise ShapeError('parameter names differ: {}'.format(', '.join(missing)))
        for k, v in arrays.items():
            if v.shape != self.params[k].shape:
                raise ShapeError('{}: expected shape {}, got {}'.format(k, self.params[k].shape, v.shape))
            self.params[k] = np.array(v, dtype=np.float64)

    def round_to_float32(self):
        """
        Make every parameter exactly representable as float32, so a checkpoint stores it losslessly.
        """
        for k in self.params:
            self.params[k] = as_float32_exact(self.params[k])

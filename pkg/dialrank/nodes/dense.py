from __future__ import annotations
from typing import List, Sequence, Tuple
import numpy as np
from dialrank.errors import ShapeError
from dialrank.nodes.misc import Node, init_uniform, relu, sigmoid

ACTIVATIONS = ('relu', 'sigmoid', 'linear')

MlpParams = Sequence[Tuple[np.ndarray, np.ndarray]]


class DenseNode(Node):
    """
    A fully connected layer y = act(M x + b) with M of shape (out, in).
    """

    def __init__(self, alloc, name: str, in_size: int, out_size: int, activation: str, rng: np.random.Generator,
                 prev_node: Node = None):
        """
        Init the layer with scaled uniform weights and zero bias.
        :param alloc: ParameterAllocation of the model.
        :param name: Parameter name prefix.
        :param in_size: Input dimension.
        :param out_size: Output dimension.
        :param activation: 'relu', 'sigmoid' or 'linear'.
        :param rng: Generator for the initial weights.
        :param prev_node: The previous node.
        """
        if activation not in ACTIVATIONS:
            raise ValueError('unknown activation {!r}'.format(activation))
        super().__init__(alloc, name, prev_node)
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.w = self.allocate('M', init_uniform(rng, (out_size, in_size), in_size, out_size))
        self.b = self.allocate('b', np.zeros(out_size))
        self._x = None
        self._y = None

    def short_type(self) -> str:
        return 'Dense[{}]'.format(self.activation)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        :param x: Input of shape (batch, in).
        :return: Output of shape (batch, out).
        """
        if x.ndim != 2 or x.shape[1] != self.in_size:
            raise ShapeError('{}: expected input (batch, {}), got {}'.format(self.name, self.in_size, x.shape))
        a = x @ self.p(self.w).T + self.p(self.b)
        if self.activation == 'relu':
            y = relu(a)
        elif self.activation == 'sigmoid':
            y = sigmoid(a)
        else:
            y = a
        self._x = x
        self._y = y
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """
        Accumulate the parameter gradients of the last forward() call.
        :param dy: Gradient of the loss with respect to the output.
        :return: Gradient with respect to the input.
        """
        if self.activation == 'relu':
            da = dy * (self._y > 0)
        elif self.activation == 'sigmoid':
            da = dy * self._y * (1.0 - self._y)
        else:
            da = dy
        self.alloc.add_grad(self.w, da.T @ self._x)
        self.alloc.add_grad(self.b, da.sum(axis=0))
        return da @ self.p(self.w)


class MLP:
    """
    ReLU layers of the given sizes followed by one sigmoid unit.
    """

    def __init__(self, alloc, name: str, in_size: int, layout: Sequence[int], rng: np.random.Generator,
                 prev_node: Node = None):
        self.layers: List[DenseNode] = []
        size = in_size
        prev = prev_node
        for i, units in enumerate(layout):
            prev = DenseNode(alloc, '{}.{}'.format(name, i), size, units, 'relu', rng, prev)
            self.layers.append(prev)
            size = units
        self.layers.append(DenseNode(alloc, '{}.out'.format(name), size, 1, 'sigmoid', rng, prev))
        self.in_size = in_size

    @property
    def first(self) -> DenseNode:
        return self.layers[0]

    def params(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(l.p(l.w), l.p(l.b)) for l in self.layers]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        :param x: Input of shape (batch, in).
        :return: Scores of shape (batch,).
        """
        for layer in self.layers:
            x = layer.forward(x)
        return x[:, 0]

    def backward(self, dp: np.ndarray) -> np.ndarray:
        d = dp[:, None]
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d


def mlp_forward(params: MlpParams, x: np.ndarray) -> float:
    """
    Predictor forward pass: ReLU(M x + b) for every layer but the last, sigmoid of the last one.
    :param params: Ordered (M, b) pairs, M of shape (out, in), last out = 1.
    :param x: Input vector.
    :return: Score in (0, 1).
    """
    if not params:
        raise ShapeError('a predictor needs at least one layer')
    x = np.asarray(x, dtype=np.float64)
    for i, (m, b) in enumerate(params):
        if m.ndim != 2 or m.shape[1] != x.shape[0] or b.shape != (m.shape[0],):
            raise ShapeError('layer {}: weight {} and bias {} do not fit input of length {}'.format(
                i, m.shape, b.shape, x.shape[0]))
        a = m @ x + b
        x = relu(a) if i < len(params) - 1 else a
    if x.shape != (1,):
        raise ShapeError('last layer must have a single output, has {}'.format(x.shape[0]))
    return float(sigmoid(x[0]))


def mse_loss(predictions, targets) -> float:
    """
    Mean squared error.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError('{} predictions for {} targets'.format(p.shape, t.shape))
    if p.size == 0:
        raise ShapeError('mean squared error of nothing')
    return float(np.mean((p - t) ** 2))


def mse_grad(predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """
    Gradient of mse_loss() with respect to the predictions.
    """
    return 2.0 * (predictions - targets) / predictions.shape[0]

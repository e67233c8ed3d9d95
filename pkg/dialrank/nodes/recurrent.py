from __future__ import annotations
from dataclasses import dataclass, fields
from typing import Sequence
import numpy as np
from dialrank.errors import ShapeError, VocabularyError
from dialrank.nodes.misc import Node, init_uniform, sigmoid

GRU_GATES = ('z', 'r', 'h')
LSTM_GATES = ('i', 'f', 'c', 'o')


@dataclass
class GruParams:
    """
    GRU weights, W_* of shape (H, I), U_* of shape (H, H), b_* of shape (H,).
    """
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        h, i = self.W_z.shape
        for f in fields(self):
            a = getattr(self, f.name)
            expected = {'W': (h, i), 'U': (h, h), 'b': (h,)}[f.name[0]]
            if a.shape != expected:
                raise ShapeError('{}: expected shape {}, got {}'.format(f.name, expected, a.shape))

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]


@dataclass
class LstmParams:
    """
    LSTM weights for the input, forget, cell and output gates.
    """
    W_i: np.ndarray
    W_f: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_c: np.ndarray
    U_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        h, i = self.W_i.shape
        for f in fields(self):
            a = getattr(self, f.name)
            expected = {'W': (h, i), 'U': (h, h), 'b': (h,)}[f.name[0]]
            if a.shape != expected:
                raise ShapeError('{}: expected shape {}, got {}'.format(f.name, expected, a.shape))

    @property
    def input_size(self) -> int:
        return self.W_i.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_i.shape[0]


def _check_step(x: np.ndarray, h: np.ndarray, input_size: int, hidden_size: int):
    if x.shape[-1] != input_size or h.shape[-1] != hidden_size or x.shape[:-1] != h.shape[:-1]:
        raise ShapeError('step input {} and state {} do not fit a cell of input {} and hidden {}'.format(
            x.shape, h.shape, input_size, hidden_size))


def gru_step(params: GruParams, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """
    One GRU step with the reset gate inside the candidate:
    z = s(W_z x + U_z h + b_z), r = s(W_r x + U_r h + b_r), c = tanh(W_h x + U_h (r * h) + b_h),
    h' = (1 - z) * h + z * c.
    :param params: GruParams.
    :param x: Input vector (I,) or batch (B, I).
    :param h: State vector (H,) or batch (B, H).
    :return: The new state, same shape as h.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    _check_step(x, h, params.input_size, params.hidden_size)
    z = sigmoid(x @ params.W_z.T + h @ params.U_z.T + params.b_z)
    r = sigmoid(x @ params.W_r.T + h @ params.U_r.T + params.b_r)
    c = np.tanh(x @ params.W_h.T + (r * h) @ params.U_h.T + params.b_h)
    return (1.0 - z) * h + z * c


def lstm_step(params: LstmParams, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    """
    One LSTM step: i, f, o = s(W x + U h + b), g = tanh(W_c x + U_c h + b_c), c' = f * c + i * g,
    h' = o * tanh(c').
    :return: (h', c')
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _check_step(x, h, params.input_size, params.hidden_size)
    if c.shape != h.shape:
        raise ShapeError('cell state {} and hidden state {} differ'.format(c.shape, h.shape))
    i = sigmoid(x @ params.W_i.T + h @ params.U_i.T + params.b_i)
    f = sigmoid(x @ params.W_f.T + h @ params.U_f.T + params.b_f)
    g = np.tanh(x @ params.W_c.T + h @ params.U_c.T + params.b_c)
    o = sigmoid(x @ params.W_o.T + h @ params.U_o.T + params.b_o)
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def _check_ids(ids, vocab_size: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise VocabularyError('token id out of range [0, {})'.format(vocab_size))
    return ids


def encode_sequence(params: GruParams, ids: Sequence[int], embedding: np.ndarray) -> np.ndarray:
    """
    Final GRU state of an embedded token sequence, starting from h = 0. The empty sequence gives the zero vector.
    :param params: GruParams.
    :param ids: Token ids.
    :param embedding: Embedding table (V, I).
    :return: h_T of length H.
    """
    ids = _check_ids(ids, embedding.shape[0])
    if embedding.shape[1] != params.input_size:
        raise ShapeError('embedding size {} differs from encoder input {}'.format(embedding.shape[1],
                                                                                params.input_size))
    h = np.zeros(params.hidden_size)
    for t in ids:
        h = gru_step(params, embedding[t], h)
    return h


def pad_sequences(seqs: Sequence[Sequence[int]], min_length: int = 1):
    """
    Right-pad id sequences with 0.
    :return: (ids (B, T), mask (B, T)) with mask 1.0 at real tokens.
    """
    t = max([min_length] + [len(s) for s in seqs])
    ids = np.zeros((len(seqs), t), dtype=np.int64)
    mask = np.zeros((len(seqs), t))
    for k, s in enumerate(seqs):
        ids[k, :len(s)] = s
        mask[k, :len(s)] = 1.0
    return ids, mask


class EmbeddingNode(Node):
    """
    Lookup table of token vectors. Gradients are sparse: only the rows of the looked up tokens.
    """

    def __init__(self, alloc, name: str, vocab_size: int, size: int, rng: np.random.Generator, prev_node=None):
        super().__init__(alloc, name, prev_node)
        self.vocab_size = vocab_size
        self.size = size
        table = init_uniform(rng, (vocab_size, size), 1, size)
        table[0] = 0.0
        self.table = self.allocate('E', table)
        self._ids = None

    def short_type(self) -> str:
        return 'Embedding'

    def forward(self, ids: np.ndarray) -> np.ndarray:
        ids = _check_ids(ids, self.vocab_size)
        self._ids = ids
        return self.p(self.table)[ids]

    def backward(self, dx: np.ndarray):
        self.alloc.add_sparse_grad(self.table, self._ids.ravel(), dx.reshape(-1, self.size))


class _RecurrentNode(Node):
    gates = ()

    def __init__(self, alloc, name: str, input_size: int, hidden_size: int, rng: np.random.Generator,
                 prev_node=None):
        super().__init__(alloc, name, prev_node)
        self.input_size = input_size
        self.hidden_size = hidden_size
        for g in self.gates:
            self.allocate('W_' + g, init_uniform(rng, (hidden_size, input_size), input_size, hidden_size))
        for g in self.gates:
            self.allocate('U_' + g, init_uniform(rng, (hidden_size, hidden_size), hidden_size, hidden_size))
        for g in self.gates:
            self.allocate('b_' + g, np.zeros(hidden_size))
        self._cache = None

    def weight(self, kind: str, gate: str) -> np.ndarray:
        return self.p('{}.{}_{}'.format(self.name, kind, gate))

    def _grad(self, kind: str, gate: str, g: np.ndarray):
        self.alloc.add_grad('{}.{}_{}'.format(self.name, kind, gate), g)

    def _input_projection(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeError('{}: expected input (batch, time, {}), got {}'.format(self.name, self.input_size,
                                                                                  x.shape))
        w = np.concatenate([self.weight('W', g) for g in self.gates], axis=0)
        b = np.concatenate([self.weight('b', g) for g in self.gates])
        return x @ w.T + b

    def _input_backward(self, x: np.ndarray, da: np.ndarray) -> np.ndarray:
        """
        Gradients of the input weights and biases from the stacked pre-activation gradients da (B, T, G*H).
        """
        hs = self.hidden_size
        xf = x.reshape(-1, self.input_size)
        daf = da.reshape(-1, len(self.gates) * hs)
        dx = np.zeros_like(xf)
        for k, g in enumerate(self.gates):
            d = daf[:, k * hs:(k + 1) * hs]
            self._grad('W', g, d.T @ xf)
            self._grad('b', g, d.sum(axis=0))
            dx += d @ self.weight('W', g)
        return dx.reshape(x.shape)


class GRUNode(_RecurrentNode):
    """
    GRU encoder over right-padded batches. Padded steps leave the state untouched, so the result for a sequence
    does not depend on the padding.
    """
    gates = GRU_GATES

    def short_type(self) -> str:
        return 'GRU'

    def params(self) -> GruParams:
        return GruParams(*[self.weight(k, g) for k in 'WUb' for g in self.gates])

    def forward(self, x: np.ndarray, mask: np.ndarray, keep_cache: bool = True) -> np.ndarray:
        """
        :param x: Embedded input (B, T, I).
        :param mask: (B, T), 1.0 at real tokens, 0.0 at padding.
        :param keep_cache: Keep the step values for backward().
        :return: Final states (B, H).
        """
        b, t, _ = x.shape
        hs = self.hidden_size
        xa = self._input_projection(x)
        u_z, u_r, u_h = (self.weight('U', g) for g in self.gates)
        h = np.zeros((b, hs))
        steps = []
        for k in range(t):
            a = xa[:, k]
            z = sigmoid(a[:, :hs] + h @ u_z.T)
            r = sigmoid(a[:, hs:2 * hs] + h @ u_r.T)
            rh = r * h
            c = np.tanh(a[:, 2 * hs:] + rh @ u_h.T)
            h_new = (1.0 - z) * h + z * c
            m = mask[:, k:k + 1]
            if keep_cache:
                steps.append((h, z, r, rh, c))
            h = m * h_new + (1.0 - m) * h
        self._cache = (x, mask, steps)
        return h

    def backward(self, dh: np.ndarray) -> np.ndarray:
        """
        Backpropagation through time from the gradient of the final states.
        :return: Gradient with respect to the input (B, T, I).
        """
        x, mask, steps = self._cache
        hs = self.hidden_size
        u_z, u_r, u_h = (self.weight('U', g) for g in self.gates)
        da = np.zeros(x.shape[:2] + (3 * hs,))
        du_z = np.zeros_like(u_z)
        du_r = np.zeros_like(u_r)
        du_h = np.zeros_like(u_h)
        for k in range(len(steps) - 1, -1, -1):
            h, z, r, rh, c = steps[k]
            m = mask[:, k:k + 1]
            dnew = dh * m
            dprev = dh * (1.0 - m) + dnew * (1.0 - z)
            dz = dnew * (c - h)
            da_h = dnew * z * (1.0 - c * c)
            drh = da_h @ u_h
            da_r = drh * h * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            dprev += drh * r + da_r @ u_r + da_z @ u_z
            du_z += da_z.T @ h
            du_r += da_r.T @ h
            du_h += da_h.T @ rh
            da[:, k, :hs] = da_z
            da[:, k, hs:2 * hs] = da_r
            da[:, k, 2 * hs:] = da_h
            dh = dprev
        for g, d in zip(self.gates, (du_z, du_r, du_h)):
            self._grad('U', g, d)
        return self._input_backward(x, da)


class LSTMNode(_RecurrentNode):
    """
    LSTM encoder over right-padded batches, returning the final hidden state.
    """
    gates = LSTM_GATES

    def short_type(self) -> str:
        return 'LSTM'

    def params(self) -> LstmParams:
        return LstmParams(*[self.weight(k, g) for k in 'WUb' for g in self.gates])

    def forward(self, x: np.ndarray, mask: np.ndarray, keep_cache: bool = True) -> np.ndarray:
        b, t, _ = x.shape
        hs = self.hidden_size
        xa = self._input_projection(x)
        u = np.concatenate([self.weight('U', g) for g in self.gates], axis=0)
        h = np.zeros((b, hs))
        c = np.zeros((b, hs))
        steps = []
        for k in range(t):
            a = xa[:, k] + h @ u.T
            i = sigmoid(a[:, :hs])
            f = sigmoid(a[:, hs:2 * hs])
            g = np.tanh(a[:, 2 * hs:3 * hs])
            o = sigmoid(a[:, 3 * hs:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            m = mask[:, k:k + 1]
            if keep_cache:
                steps.append((h, c, i, f, g, o, tc))
            h = m * (o * tc) + (1.0 - m) * h
            c = m * c_new + (1.0 - m) * c
        self._cache = (x, mask, steps)
        return h

    def backward(self, dh: np.ndarray) -> np.ndarray:
        x, mask, steps = self._cache
        hs = self.hidden_size
        u = np.concatenate([self.weight('U', g) for g in self.gates], axis=0)
        da = np.zeros(x.shape[:2] + (4 * hs,))
        du = np.zeros_like(u)
        dc = np.zeros_like(dh)
        for k in range(len(steps) - 1, -1, -1):
            h, c, i, f, g, o, tc = steps[k]
            m = mask[:, k:k + 1]
            dh_new = dh * m
            dc_new = dc * m + dh_new * o * (1.0 - tc * tc)
            a = np.concatenate([dc_new * g * i * (1.0 - i),
                                dc_new * c * f * (1.0 - f),
                                dc_new * i * (1.0 - g * g),
                                dh_new * tc * o * (1.0 - o)], axis=1)
            du += a.T @ h
            da[:, k] = a
            dh = dh * (1.0 - m) + a @ u
            dc = dc * (1.0 - m) + dc_new * f
        for k, gate in enumerate(self.gates):
            self._grad('U', gate, du[k * hs:(k + 1) * hs])
        return self._input_backward(x, da)

import math
import numpy as np
import pytest
from dialrank.allocation import ParameterAllocation
from dialrank.errors import ShapeError, VocabularyError
from dialrank.nodes.dense import MLP, DenseNode, mlp_forward, mse_grad, mse_loss
from dialrank.nodes.recurrent import (EmbeddingNode, GRUNode, GruParams, LSTMNode, LstmParams, encode_sequence,
                                      gru_step, lstm_step, pad_sequences)
from dialrank.optimizer import gradient_check


def _gru_params(rng, i, h, scale=0.5):
    shapes = [(h, i)] * 3 + [(h, h)] * 3 + [(h,)] * 3
    return GruParams(*[rng.normal(scale=scale, size=s) for s in shapes])


def _lstm_params(rng, i, h, scale=0.5):
    shapes = [(h, i)] * 4 + [(h, h)] * 4 + [(h,)] * 4
    return LstmParams(*[rng.normal(scale=scale, size=s) for s in shapes])


def test_gru_step_zero_params():
    p = GruParams(*([np.zeros((3, 2))] * 3 + [np.zeros((3, 3))] * 3 + [np.zeros(3)] * 3))
    assert np.array_equal(gru_step(p, np.array([5.0, -1.0]), np.zeros(3)), np.zeros(3))
    assert np.allclose(gru_step(p, np.ones(2), np.full(3, 0.4)), 0.2)


def test_gru_step_scalar():
    p = GruParams(*([np.ones((1, 1))] * 6 + [np.zeros(1)] * 3))
    z = 1.0 / (1.0 + math.exp(-1.0))
    assert gru_step(p, np.ones(1), np.zeros(1))[0] == pytest.approx(z * math.tanh(1.0), abs=1e-12)
    assert gru_step(p, np.ones(1), np.zeros(1))[0] == pytest.approx(0.5568, abs=1e-4)


def test_gru_step_shapes():
    rng = np.random.default_rng(0)
    p = _gru_params(rng, 5, 128)
    h = gru_step(p, rng.normal(size=5), np.zeros(128))
    assert h.shape == (128,)
    assert np.all(np.abs(h) < 1.0)
    with pytest.raises(ShapeError):
        gru_step(p, np.zeros(4), np.zeros(128))
    with pytest.raises(ShapeError):
        GruParams(*([np.zeros((3, 2))] * 3 + [np.zeros((3, 3))] * 3 + [np.zeros(3)] * 2 + [np.zeros(4)]))


def test_encode_sequence():
    rng = np.random.default_rng(1)
    p = _gru_params(rng, 4, 3)
    emb = rng.normal(size=(10, 4))
    assert np.array_equal(encode_sequence(p, [], emb), np.zeros(3))
    assert np.array_equal(encode_sequence(p, [7], emb), gru_step(p, emb[7], np.zeros(3)))
    two = gru_step(p, emb[5], gru_step(p, emb[2], np.zeros(3)))
    assert np.array_equal(encode_sequence(p, [2, 5], emb), two)
    with pytest.raises(VocabularyError):
        encode_sequence(p, [10], emb)


def test_gru_matches_keras():
    tf = pytest.importorskip('tensorflow')
    rng = np.random.default_rng(3)
    i, h, t = 4, 3, 5
    p = _gru_params(rng, i, h)
    x = rng.normal(size=(1, t, i))
    layer = tf.keras.layers.GRU(h, reset_after=False)
    layer(x.astype(np.float32))
    # keras keeps the state with weight z, the cell here with weight 1 - z
    layer.set_weights([np.concatenate([-p.W_z.T, p.W_r.T, p.W_h.T], axis=1),
                       np.concatenate([-p.U_z.T, p.U_r.T, p.U_h.T], axis=1),
                       np.concatenate([-p.b_z, p.b_r, p.b_h])])
    expected = layer(x.astype(np.float32)).numpy()[0]
    state = np.zeros(h)
    for k in range(t):
        state = gru_step(p, x[0, k], state)
    np.testing.assert_allclose(state, expected, atol=1e-5)


def test_lstm_matches_keras():
    tf = pytest.importorskip('tensorflow')
    rng = np.random.default_rng(4)
    i, h, t = 3, 4, 6
    p = _lstm_params(rng, i, h)
    x = rng.normal(size=(1, t, i))
    layer = tf.keras.layers.LSTM(h)
    layer(x.astype(np.float32))
    layer.set_weights([np.concatenate([p.W_i.T, p.W_f.T, p.W_c.T, p.W_o.T], axis=1),
                       np.concatenate([p.U_i.T, p.U_f.T, p.U_c.T, p.U_o.T], axis=1),
                       np.concatenate([p.b_i, p.b_f, p.b_c, p.b_o])])
    expected = layer(x.astype(np.float32)).numpy()[0]
    state, cell = np.zeros(h), np.zeros(h)
    for k in range(t):
        state, cell = lstm_step(p, x[0, k], state, cell)
    np.testing.assert_allclose(state, expected, atol=1e-5)


def test_lstm_step_scalar():
    p = LstmParams(*([np.ones((1, 1))] * 8 + [np.ones(1)] * 4))
    s2 = 1.0 / (1.0 + math.exp(-2.0))
    c = s2 * math.tanh(2.0)
    h, c_new = lstm_step(p, np.ones(1), np.zeros(1), np.zeros(1))
    assert c_new[0] == pytest.approx(c, abs=1e-12)
    assert h[0] == pytest.approx(s2 * math.tanh(c), abs=1e-12)
    with pytest.raises(ShapeError):
        lstm_step(p, np.ones(1), np.zeros(1), np.zeros(2))


def test_pad_sequences():
    ids, mask = pad_sequences([[3, 4], [], [5]])
    assert ids.tolist() == [[3, 4], [0, 0], [5, 0]]
    assert mask.tolist() == [[1, 1], [0, 0], [1, 0]]
    ids, mask = pad_sequences([[]])
    assert ids.shape == (1, 1)


def test_gru_node_ignores_padding():
    rng = np.random.default_rng(5)
    node = GRUNode(ParameterAllocation(), 'enc', 4, 3, rng)
    lengths = [3, 1, 5, 0]
    _, mask = pad_sequences([[1] * n for n in lengths])
    x = rng.normal(size=(4, 5, 4))
    out = node.forward(x, mask)
    p = node.params()
    for b, n in enumerate(lengths):
        h = np.zeros(3)
        for k in range(n):
            h = gru_step(p, x[b, k], h)
        np.testing.assert_allclose(out[b], h, rtol=1e-12, atol=1e-14)
    noisy = x.copy()
    noisy[mask == 0] = 100.0
    assert np.array_equal(node.forward(noisy, mask), out)


def test_lstm_node_matches_step():
    rng = np.random.default_rng(6)
    node = LSTMNode(ParameterAllocation(), 'enc', 2, 3, rng)
    lengths = [4, 2]
    _, mask = pad_sequences([[1] * n for n in lengths])
    x = rng.normal(size=(2, 4, 2))
    out = node.forward(x, mask)
    p = node.params()
    for b, n in enumerate(lengths):
        h, c = np.zeros(3), np.zeros(3)
        for k in range(n):
            h, c = lstm_step(p, x[b, k], h, c)
        np.testing.assert_allclose(out[b], h, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize('node_type', [GRUNode, LSTMNode])
def test_recurrent_node_gradients(node_type):
    rng = np.random.default_rng(7)
    alloc = ParameterAllocation()
    emb = EmbeddingNode(alloc, 'emb', 6, 3, rng)
    node = node_type(alloc, 'enc', 3, 4, rng, emb)
    ids, mask = pad_sequences([[1, 2, 3], [4], [5, 2]])
    w = rng.normal(size=(3, 4))

    def loss():
        return float(np.sum(w * node.forward(emb.forward(ids), mask, keep_cache=False)))

    alloc.zero_grads()
    node.forward(emb.forward(ids), mask)
    emb.backward(node.backward(w))
    errors = gradient_check(loss, alloc)
    assert max(errors.values()) < 1e-6
    assert not np.any(alloc.dense_grad('emb.E')[0])


def test_dense_node():
    rng = np.random.default_rng(8)
    alloc = ParameterAllocation()
    node = DenseNode(alloc, 'd', 3, 2, 'linear', rng)
    x = rng.normal(size=(4, 3))
    np.testing.assert_allclose(node.forward(x), x @ alloc.params['d.M'].T)
    with pytest.raises(ShapeError):
        node.forward(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        DenseNode(alloc, 'e', 3, 2, 'tanh', rng)


def test_mlp_gradients():
    rng = np.random.default_rng(9)
    alloc = ParameterAllocation()
    mlp = MLP(alloc, 'pred', 5, [4, 3], rng)
    x = rng.normal(size=(6, 5))
    t = rng.uniform(size=6)

    def loss():
        return mse_loss(mlp.forward(x), t)

    alloc.zero_grads()
    p = mlp.forward(x)
    mlp.backward(mse_grad(p, t))
    assert max(gradient_check(loss, alloc).values()) < 1e-6


def test_mlp_forward_matches_node():
    rng = np.random.default_rng(10)
    mlp = MLP(ParameterAllocation(), 'pred', 5, [4], rng)
    x = rng.normal(size=(2, 5))
    out = mlp.forward(x)
    for b in range(2):
        assert mlp_forward(mlp.params(), x[b]) == pytest.approx(out[b], abs=1e-14)


def test_mlp_forward_examples():
    assert mlp_forward([(np.zeros((1, 3)), np.zeros(1))], np.ones(3)) == 0.5
    assert mlp_forward([(np.ones((1, 1)), np.zeros(1))], np.array([2.0])) == pytest.approx(0.8808, abs=1e-4)
    assert 0.0 < mlp_forward([(np.full((1, 1), 3.0), np.zeros(1))], np.array([-10.0])) < 1.0
    with pytest.raises(ShapeError):
        mlp_forward([(np.ones((1, 2)), np.zeros(1))], np.ones(3))
    with pytest.raises(ShapeError):
        mlp_forward([(np.ones((2, 1)), np.zeros(2))], np.ones(1))


def test_mse_loss():
    assert mse_loss([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert mse_loss([0.5], [1.0]) == 0.25
    assert mse_loss([0.0, 1.0], [1.0, 0.0]) == 1.0
    with pytest.raises(ShapeError):
        mse_loss([], [])
    with pytest.raises(ShapeError):
        mse_loss([0.1], [0.1, 0.2])

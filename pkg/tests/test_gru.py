import numpy as np
import pytest

from helpers import GRAD_TOL, check_param_grads, numeric_gradient, rel_err
from morecap.gru import BiGRU, GRUCell
from morecap.params import ParameterSet


def make_cell(n_in=3, n_hidden=4, seed=0, zero=False):
    params = ParameterSet()
    cell = GRUCell(params, "g", n_in, n_hidden, np.random.default_rng(seed))
    if zero:
        for _, p in params.items():
            p.value[...] = 0.0
    return params, cell


class TestGRUStep:
    def test_zero_weights_zero_state(self):
        _, cell = make_cell(zero=True)
        h, _ = cell.step(np.ones((1, 3)), np.zeros((1, 4)))
        assert np.array_equal(h, np.zeros((1, 4)))

    def test_zero_weights_ones_state(self):
        # z = sigmoid(0) = 0.5, candidate = tanh(0) = 0,
        # h = (1 - z) * 1 + z * 0 = 0.5
        _, cell = make_cell(zero=True)
        h, _ = cell.step(np.ones((1, 3)) * 7.0, np.ones((1, 4)))
        assert np.allclose(h, 0.5, atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        _, cell = make_cell()
        with pytest.raises(ValueError, match="input shape"):
            cell.step(np.ones((1, 5)), np.zeros((1, 4)))
        with pytest.raises(ValueError, match="state shape"):
            cell.step(np.ones((1, 3)), np.zeros((1, 5)))

    @pytest.mark.parametrize("seed", range(3))
    def test_step_gradients(self, seed):
        rng = np.random.default_rng(seed + 10)
        params, cell = make_cell(seed=seed)
        x = rng.standard_normal((2, 3))
        h0 = rng.standard_normal((2, 4))
        c = rng.standard_normal((2, 4))

        def loss():
            h, _ = cell.step(x, h0)
            return float((h * c).sum())

        params.zero_grads()
        _, cache = cell.step(x, h0)
        dx, dh0 = cell.step_backward(c, cache)
        check_param_grads(loss, params)
        assert rel_err(dx, numeric_gradient(loss, x)) < GRAD_TOL
        assert rel_err(dh0, numeric_gradient(loss, h0)) < GRAD_TOL


class TestGRUSequence:
    def test_rejects_empty(self):
        _, cell = make_cell()
        with pytest.raises(ValueError, match="non-empty"):
            cell.forward_sequence(np.zeros((0, 3)), np.zeros((1, 4)))

    @pytest.mark.parametrize("seed", range(2))
    def test_bptt_gradients(self, seed):
        rng = np.random.default_rng(seed + 20)
        params, cell = make_cell(seed=seed)
        xs = rng.standard_normal((5, 3))
        h0 = rng.standard_normal((1, 4))
        c = rng.standard_normal((5, 4))

        def loss():
            states, _ = cell.forward_sequence(xs, h0)
            return float((states * c).sum())

        params.zero_grads()
        _, caches = cell.forward_sequence(xs, h0)
        d_xs, dh0 = cell.backward_sequence(c, caches)
        check_param_grads(loss, params)
        assert rel_err(d_xs, numeric_gradient(loss, xs)) < GRAD_TOL
        assert rel_err(dh0, numeric_gradient(loss, h0)) < GRAD_TOL


def make_bigru(n_in=3, n_hidden=4, seed=0, shared=False):
    params = ParameterSet()
    bi = BiGRU(params, "b", n_in, n_hidden, np.random.default_rng(seed))
    if shared:
        for g in ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc"):
            getattr(bi.bwd, g).value[...] = getattr(bi.fwd, g).value
    return params, bi


class TestBiGRU:
    def test_length_one_is_two_single_steps(self):
        rng = np.random.default_rng(0)
        _, bi = make_bigru()
        x = rng.standard_normal((1, 3))
        out, _ = bi.forward(x)
        assert out.shape == (1, 8)
        h0 = np.zeros((1, 4))
        f, _ = bi.fwd.step(x, h0)
        b, _ = bi.bwd.step(x, h0)
        assert np.array_equal(out, np.concatenate([f, b], axis=1))

    def test_palindrome_symmetry_with_shared_params(self):
        rng = np.random.default_rng(1)
        _, bi = make_bigru(shared=True)
        half = rng.standard_normal((3, 3))
        xs = np.concatenate([half, half[::-1]], axis=0)  # palindrome
        out, _ = bi.forward(xs)
        T, h = xs.shape[0], 4
        for t in range(T):
            # forward state at t equals backward state at mirrored position
            assert np.allclose(out[t, :h], out[T - 1 - t, h:], atol=1e-12)

    def test_reversal_swaps_and_reverses_halves(self):
        rng = np.random.default_rng(2)
        _, bi = make_bigru(shared=True)
        xs = rng.standard_normal((4, 3))
        out, _ = bi.forward(xs)
        out_rev, _ = bi.forward(xs[::-1])
        h = 4
        swapped = np.concatenate([out[:, h:], out[:, :h]], axis=1)
        assert np.allclose(out_rev, swapped[::-1], atol=1e-12)

    def test_rejects_empty(self):
        _, bi = make_bigru()
        with pytest.raises(ValueError, match="non-empty"):
            bi.forward(np.zeros((0, 3)))

    @pytest.mark.parametrize("seed", range(2))
    def test_gradients_length_four(self, seed):
        rng = np.random.default_rng(seed + 30)
        params, bi = make_bigru(seed=seed)
        xs = rng.standard_normal((4, 3))
        c = rng.standard_normal((4, 8))

        def loss():
            out, _ = bi.forward(xs)
            return float((out * c).sum())

        params.zero_grads()
        _, caches = bi.forward(xs)
        d_xs = bi.backward(c, caches)
        check_param_grads(loss, params)
        assert rel_err(d_xs, numeric_gradient(loss, xs)) < GRAD_TOL

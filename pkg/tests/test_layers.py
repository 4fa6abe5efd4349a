import numpy as np
import pytest

from spikesev.layers import (
    Conv1DSpec,
    DenseSpec,
    DropoutSpec,
    LSTMSpec,
    MaxPool1DSpec,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    init_lstm,
    lstm_backward,
    lstm_forward,
    maxpool1d_backward,
    maxpool1d_forward,
    sample_dropout_mask,
    sigmoid,
)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestConv1D:
    def test_sliding_sum(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0]).reshape(1, 5, 1)
        w = np.ones((2, 1, 1))
        b = np.zeros(1)
        y, _ = conv1d_forward(x, w, b)
        assert y.reshape(-1).tolist() == [3.0, 5.0, 7.0, 9.0]

    def test_zero_weights_zero_output(self):
        x = np.random.default_rng(0).normal(size=(2, 9, 3))
        y, _ = conv1d_forward(x, np.zeros((4, 3, 5)), np.zeros(5))
        assert (y == 0).all()

    def test_input_shorter_than_kernel(self):
        with pytest.raises(ValueError, match="kernel"):
            conv1d_forward(np.zeros((1, 3, 1)), np.zeros((4, 1, 2)), np.zeros(2))

    def test_output_length(self):
        x = np.zeros((1, 16730, 1))
        y, _ = conv1d_forward(x, np.zeros((4, 1, 2)), np.zeros(2))
        assert y.shape == (1, 16727, 2)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 9, 3))
        w = rng.normal(size=(4, 3, 2))
        b = rng.normal(size=2)
        r = rng.normal(size=(2, 6, 2))  # random linear functional on the output

        def loss():
            y, _ = conv1d_forward(x, w, b)
            return float((y * r).sum())

        y, cache = conv1d_forward(x, w, b)
        dx, dw, db = conv1d_backward(r, cache, w)
        h = 1e-6
        for tensor, grad in ((x, dx), (w, dw), (b, db)):
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + h
                up = loss()
                tensor[idx] = orig - h
                down = loss()
                tensor[idx] = orig
                assert (up - down) / (2 * h) == pytest.approx(grad[idx], rel=1e-5, abs=1e-7)


class TestMaxPool1D:
    def test_basic_window_max(self):
        x = np.array([3.0, 5.0, 7.0, 9.0]).reshape(1, 4, 1)
        y, _ = maxpool1d_forward(x, 2)
        assert y.reshape(-1).tolist() == [5.0, 9.0]

    def test_remainder_dropped(self):
        x = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1)
        y, _ = maxpool1d_forward(x, 2)
        assert y.reshape(-1).tolist() == [2.0]

    def test_floor_semantics_at_scale(self):
        y, _ = maxpool1d_forward(np.zeros((1, 16727, 2)), 2)
        assert y.shape == (1, 8363, 2)

    def test_tie_takes_first_maximum(self):
        x = np.array([7.0, 7.0]).reshape(1, 2, 1)
        _, (arg, _) = maxpool1d_forward(x, 2)
        assert arg[0, 0, 0] == 0

    def test_backward_routes_each_gradient_to_one_position(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(3, 11, 4))
        y, cache = maxpool1d_forward(x, 2)
        dy = np.ones_like(y)
        dx = maxpool1d_backward(dy, cache, 2)
        # each pooled window contributes exactly one nonzero slot
        assert int((dx != 0).sum()) == y.size
        assert dx.sum() == pytest.approx(dy.sum())
        assert (dx[:, 10, :] == 0).all()  # dropped remainder gets no gradient


class TestDropout:
    def test_rate_zero_identity(self):
        x = np.random.default_rng(0).normal(size=(4, 5))
        mask = np.ones_like(x, dtype=bool)
        np.testing.assert_array_equal(dropout_forward(x, 0.0, mask), x)

    def test_inverted_scaling(self):
        x = np.ones((2, 4))
        mask = np.array([[True, False, True, True], [False, True, True, False]])
        y = dropout_forward(x, 0.5, mask)
        assert set(np.unique(y)) == {0.0, 2.0}
        np.testing.assert_array_equal(dropout_backward(np.ones_like(x), 0.5, mask), y)

    def test_empirical_drop_fraction(self):
        rng = np.random.default_rng(123)
        mask = sample_dropout_mask(rng, (100_000,), 0.166)
        dropped = 1.0 - mask.mean()
        assert abs(dropped - 0.166) < 0.01

    def test_expected_value_preserved(self):
        rng = np.random.default_rng(7)
        x = np.ones(100_000)
        mask = sample_dropout_mask(rng, x.shape, 0.166)
        y = dropout_forward(x, 0.166, mask)
        assert y.mean() == pytest.approx(1.0, abs=0.01)


class TestLSTM:
    def test_zero_parameters_zero_output(self):
        x = np.random.default_rng(0).normal(size=(2, 7, 3))
        h, _ = lstm_forward(x, np.zeros((3, 8)), np.zeros((2, 8)), np.zeros(8))
        assert (h == 0).all()

    def test_single_step_scalar_matches_hand_evaluation(self):
        # one unit, one channel, one step: h = o * tanh(i * g)
        w = np.array([[0.4, -0.3, 0.8, 0.2]])
        u = np.zeros((1, 4))
        b = np.array([0.1, 0.0, -0.2, 0.3])
        x_val = 1.7
        x = np.array([[[x_val]]])
        i = _sigmoid(0.4 * x_val + 0.1)
        g = np.tanh(0.8 * x_val - 0.2)
        o = _sigmoid(0.2 * x_val + 0.3)
        expected = o * np.tanh(i * g)
        h, _ = lstm_forward(x, w, u, b)
        assert h[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_two_step_scalar_matches_hand_evaluation(self):
        w = np.array([[0.4, -0.3, 0.8, 0.2]])
        u = np.array([[0.5, -0.1, 0.3, -0.7]])
        b = np.array([0.1, 0.2, -0.2, 0.3])
        xs = [1.7, -0.6]
        h_t, c_t = 0.0, 0.0
        for x_val in xs:
            i = _sigmoid(0.4 * x_val + 0.5 * h_t + 0.1)
            f = _sigmoid(-0.3 * x_val - 0.1 * h_t + 0.2)
            g = np.tanh(0.8 * x_val + 0.3 * h_t - 0.2)
            o = _sigmoid(0.2 * x_val - 0.7 * h_t + 0.3)
            c_t = f * c_t + i * g
            h_t = o * np.tanh(c_t)
        x = np.array(xs).reshape(1, 2, 1)
        h, _ = lstm_forward(x, w, u, b)
        assert h[0, 0] == pytest.approx(h_t, rel=1e-12)

    def test_parameter_count_formula(self):
        params = init_lstm(LSTMSpec(64), 24, np.random.default_rng(0), np.float64)
        total = sum(p.size for p in params.values())
        assert total == 4 * ((24 + 64) * 64 + 64) == 22784

    def test_forget_gate_bias_offset(self):
        params = init_lstm(LSTMSpec(3), 2, np.random.default_rng(0), np.float32)
        assert params["b"][3:6].tolist() == [1.0, 1.0, 1.0]
        assert params["b"][:3].tolist() == [0.0, 0.0, 0.0]

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError, match="zero time steps"):
            lstm_forward(np.zeros((1, 0, 2)), np.zeros((2, 4)), np.zeros((1, 4)), np.zeros(4))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 5, 3))
        w = rng.normal(size=(3, 16)) * 0.4
        u = rng.normal(size=(4, 16)) * 0.4
        b = rng.normal(size=16) * 0.2
        r = rng.normal(size=(2, 4))

        def loss():
            h, _ = lstm_forward(x, w, u, b)
            return float((h * r).sum())

        h, cache = lstm_forward(x, w, u, b)
        dx, dw, du, db = lstm_backward(r, cache, w, u)
        step = 1e-6
        for tensor, grad in ((x, dx), (w, dw), (u, du), (b, db)):
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + step
                up = loss()
                tensor[idx] = orig - step
                down = loss()
                tensor[idx] = orig
                assert (up - down) / (2 * step) == pytest.approx(grad[idx], rel=1e-4, abs=1e-8)


class TestDense:
    def test_sigmoid_at_zero(self):
        y, _ = dense_forward(np.zeros((1, 3)), np.zeros((3, 2)), np.zeros(2), "sigmoid")
        assert y.tolist() == [[0.5, 0.5]]

    def test_relu_clamps_negative(self):
        x = np.array([[-1.0, -2.0]])
        y, _ = dense_forward(x, np.eye(2), np.zeros(2), "relu")
        assert (y == 0).all()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="width"):
            dense_forward(np.zeros((1, 3)), np.zeros((4, 2)), np.zeros(2), "linear")

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        for activation in ("relu", "sigmoid", "linear"):
            x = rng.normal(size=(3, 4)) + 0.05  # keep relu inputs off the kink
            w = rng.normal(size=(4, 2))
            b = rng.normal(size=2)
            r = rng.normal(size=(3, 2))

            def loss():
                y, _ = dense_forward(x, w, b, activation)
                return float((y * r).sum())

            _, cache = dense_forward(x, w, b, activation)
            dx, dw, db = dense_backward(r, cache, w, activation)
            h = 1e-6
            for tensor, grad in ((x, dx), (w, dw), (b, db)):
                it = np.nditer(tensor, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = tensor[idx]
                    tensor[idx] = orig + h
                    up = loss()
                    tensor[idx] = orig - h
                    down = loss()
                    tensor[idx] = orig
                    assert (up - down) / (2 * h) == pytest.approx(grad[idx], rel=1e-4, abs=1e-8)


class TestSpecs:
    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            Conv1DSpec(0, 4)
        with pytest.raises(ValueError):
            MaxPool1DSpec(0)
        with pytest.raises(ValueError):
            DropoutSpec(1.0)
        with pytest.raises(ValueError):
            LSTMSpec(0)
        with pytest.raises(ValueError):
            DenseSpec(4, "softmax")


def test_stable_sigmoid_extremes():
    x = np.array([-800.0, 0.0, 800.0])
    y = sigmoid(x)
    assert y[0] == 0.0 and y[1] == 0.5 and y[2] == 1.0
    assert np.isfinite(sigmoid(np.array([-1e4, 1e4]))).all()

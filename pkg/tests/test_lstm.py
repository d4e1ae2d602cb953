"""Forecaster tests.

The single-step recurrence is pinned against hand-evaluated gate algebra,
the batched kernels against the single-step reference, and the analytic
gradients against central differences.  When the compiled kernel is present
it must agree with the numpy twin to float precision.  Training is checked
for determinism, loss descent on a learnable signal, and bit-exact
parameter serialization.
"""

import numpy as np
import pytest

from sleepload import (
    GATE_ORDER,
    LstmParams,
    LstmState,
    TrainConfig,
    WindowSample,
    backward_bptt,
    forward_sequence,
    init_params,
    kernel_backend,
    load_params,
    loss_mae,
    lstm_cell_forward,
    predict,
    predict_batch,
    save_params,
    train,
)
from sleepload import lstm as lstm_mod
from sleepload import _lstm_py

try:
    from sleepload import _lstm_cy
except ImportError:
    _lstm_cy = None

SIG1 = 0.7310585786300049  # sigmoid(1)
TANH1 = 0.7615941559557649  # tanh(1)


def unit_gate_params() -> LstmParams:
    """hidden=1 with every gate computing z = h_prev*0 + x*1, biases 0."""
    w = np.array([[0.0, 1.0]] * 4)
    return LstmParams(1, 1, w, np.zeros(4), np.ones(1), 0.0)


class TestCellForward:
    def test_hand_evaluated_step(self):
        # with z = 1 at every gate: f = i = o = sigmoid(1), g = tanh(1),
        # c = sigmoid(1) * tanh(1), h = sigmoid(1) * tanh(c)
        params = unit_gate_params()
        state, gates = lstm_cell_forward(params, 1.0)
        assert gates.forget[0] == pytest.approx(SIG1, abs=1e-15)
        assert gates.input[0] == pytest.approx(SIG1, abs=1e-15)
        assert gates.candidate[0] == pytest.approx(TANH1, abs=1e-15)
        assert gates.output[0] == pytest.approx(SIG1, abs=1e-15)
        assert state.c[0] == pytest.approx(0.5567699411459397, abs=1e-15)
        assert state.h[0] == pytest.approx(0.36960635293570576, abs=1e-15)

    def test_two_steps_carry_state(self):
        # second step with weights that also feed h back through x's column
        # only: z = h_prev * 0 + x * 1 = 1 again, but c carries over
        params = unit_gate_params()
        state, _ = lstm_cell_forward(params, 1.0)
        state, _ = lstm_cell_forward(params, 1.0, state)
        assert state.c[0] == pytest.approx(SIG1 * TANH1 * SIG1 + SIG1 * TANH1,
                                           abs=1e-15)

    def test_zero_input_zero_weights(self):
        params = LstmParams(2, 1, np.zeros((8, 3)), np.zeros(8), np.zeros(2), 0.25)
        state, gates = lstm_cell_forward(params, 0.0)
        np.testing.assert_array_equal(state.h, 0.0)
        np.testing.assert_array_equal(state.c, 0.0)
        np.testing.assert_array_equal(gates.forget, 0.5)
        np.testing.assert_array_equal(gates.candidate, 0.0)

    def test_input_validation(self):
        params = unit_gate_params()
        with pytest.raises(ValueError, match="shape"):
            lstm_cell_forward(params, [1.0, 2.0])
        with pytest.raises(ValueError, match="finite"):
            lstm_cell_forward(params, np.nan)


class TestForwardSequence:
    def test_matches_single_step_reference(self, rng):
        params = init_params(6, seed=9)
        window = rng.uniform(0, 1, 12)
        state = LstmState(np.zeros(6), np.zeros(6))
        for value in window:
            state, _ = lstm_cell_forward(params, value, state)
        reference = float(state.h @ params.w_out + params.b_out)
        assert forward_sequence(params, window) == pytest.approx(reference,
                                                                 abs=1e-12)

    def test_zero_recurrence_predicts_bias(self):
        params = LstmParams(3, 1, np.zeros((12, 4)), np.zeros(12),
                            np.ones(3), 0.4)
        # zero weights keep h at exactly 0 forever, so the head sees nothing
        assert forward_sequence(params, [0.3, 0.9, 0.1]) == 0.4

    def test_rejects_bad_window(self):
        params = unit_gate_params()
        with pytest.raises(ValueError, match="vector"):
            forward_sequence(params, [])
        with pytest.raises(ValueError, match="finite"):
            forward_sequence(params, [0.1, np.inf])

    def test_rejects_vector_input_dim(self):
        params = init_params(2, seed=0, input_dim=3)
        with pytest.raises(ValueError, match="scalar"):
            forward_sequence(params, [0.1, 0.2])


class TestParams:
    def test_init_bounds_and_determinism(self):
        a = init_params(5, seed=3, init_scale=0.1)
        b = init_params(5, seed=3, init_scale=0.1)
        assert np.array_equal(a.w_gates, b.w_gates)
        assert np.array_equal(a.w_out, b.w_out)
        assert a.b_out == b.b_out
        for arr in (a.w_gates, a.b_gates, a.w_out):
            assert np.all(np.abs(arr) <= 0.1)
        assert abs(a.b_out) <= 0.1

    def test_gate_blocks_cover_rows(self):
        params = init_params(4, seed=1)
        stacked = np.vstack([params.gate_weights(name) for name in GATE_ORDER])
        assert np.array_equal(stacked, params.w_gates)
        joined = np.concatenate([params.gate_bias(name) for name in GATE_ORDER])
        assert np.array_equal(joined, params.b_gates)

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="w_gates"):
            LstmParams(2, 1, np.zeros((4, 3)), np.zeros(8), np.zeros(2), 0.0)
        with pytest.raises(ValueError, match="w_out"):
            LstmParams(2, 1, np.zeros((8, 3)), np.zeros(8), np.zeros(3), 0.0)
        with pytest.raises(ValueError, match="finite"):
            LstmParams(1, 1, np.full((4, 2), np.nan), np.zeros(4),
                       np.zeros(1), 0.0)

    def test_copy_is_independent(self):
        params = init_params(3, seed=2)
        dup = params.copy()
        dup.w_gates[0, 0] += 1.0
        assert params.w_gates[0, 0] != dup.w_gates[0, 0]


class TestLoss:
    def test_hand_value(self):
        assert loss_mae([1.0, 2.0], [0.0, 4.0]) == 1.5

    def test_validation(self):
        with pytest.raises(ValueError, match="aligned"):
            loss_mae([1.0], [1.0, 2.0])


class TestGradients:
    def test_zero_residual_gives_zero_gradients(self):
        # an exact fit has sign(0) = 0 everywhere, so nothing flows back
        params = LstmParams(2, 1, np.zeros((8, 3)), np.zeros(8),
                            np.zeros(2), 0.3)
        samples = [WindowSample(np.array([0.1, 0.2]), 0.3)]
        grads = backward_bptt(params, samples)
        assert np.all(grads.w_gates == 0.0)
        assert np.all(grads.b_gates == 0.0)
        assert np.all(grads.w_out == 0.0)
        assert grads.b_out == 0.0

    def test_central_difference_spot_check(self):
        rng = np.random.default_rng(17)
        params = init_params(3, seed=5)
        x = rng.uniform(0, 1, (4, 6))
        y = rng.uniform(0, 1, 4)
        grads = backward_bptt(params, (x, y))

        def batch_loss(p):
            preds = np.array([forward_sequence(p, row) for row in x])
            return loss_mae(preds, y)

        eps = 1e-6
        flat_checks = []
        for r in range(0, 12, 5):
            for c in range(4):
                shifted = params.copy()
                shifted.w_gates[r, c] += eps
                up = batch_loss(shifted)
                shifted.w_gates[r, c] -= 2 * eps
                down = batch_loss(shifted)
                flat_checks.append(((up - down) / (2 * eps), grads.w_gates[r, c]))
        for numeric, analytic in flat_checks:
            assert analytic == pytest.approx(numeric, abs=1e-5)

    def test_accepts_array_pair(self, rng):
        params = init_params(2, seed=0)
        x = rng.uniform(0, 1, (3, 4))
        y = rng.uniform(0, 1, 3)
        grads = backward_bptt(params, (x, y))
        assert grads.w_gates.shape == (8, 3)
        assert grads.b_gates.shape == (8,)

    def test_mixed_window_sizes_rejected(self):
        params = init_params(2, seed=0)
        samples = [WindowSample(np.array([0.1, 0.2]), 0.3),
                   WindowSample(np.array([0.1, 0.2, 0.3]), 0.4)]
        with pytest.raises(ValueError, match="window_size"):
            backward_bptt(params, samples)

    def test_empty_batch_rejected(self):
        params = init_params(2, seed=0)
        with pytest.raises(ValueError, match="sample"):
            backward_bptt(params, [])


@pytest.mark.skipif(_lstm_cy is None, reason="compiled kernel unavailable")
class TestBackendParity:
    def test_forward_and_backward_agree(self, rng):
        hidden = 7
        params = init_params(hidden, seed=21, init_scale=0.5)
        x = rng.uniform(0, 1, (5, 9))
        h_py, cache_py = _lstm_py.forward_batch(params.w_gates, params.b_gates, x)
        h_cy, cache_cy = _lstm_cy.forward_batch(params.w_gates, params.b_gates, x)
        np.testing.assert_allclose(h_cy, h_py, atol=1e-13)
        d_h = rng.normal(size=(5, hidden))
        dw_py, db_py = _lstm_py.backward_batch(params.w_gates, x, cache_py, d_h)
        dw_cy, db_cy = _lstm_cy.backward_batch(params.w_gates, x, cache_cy, d_h)
        np.testing.assert_allclose(dw_cy, dw_py, atol=1e-12)
        np.testing.assert_allclose(db_cy, db_py, atol=1e-12)

    def test_active_backend_reported(self):
        assert kernel_backend() in ("cython", "numpy")
        if lstm_mod._kernels is _lstm_cy:
            assert kernel_backend() == "cython"


def sine_samples(count=120, window=6):
    t = np.arange(count + window + 1)
    series = 0.5 + 0.3 * np.sin(2 * np.pi * t / 24)
    return [WindowSample(series[i : i + window], series[i + window])
            for i in range(count)]


class TestTraining:
    def test_deterministic(self):
        samples = sine_samples(60)
        config = TrainConfig(hidden=4, epochs=3, seed=11)
        a = train(samples, config)
        b = train(samples, config)
        assert np.array_equal(a.params.w_gates, b.params.w_gates)
        assert np.array_equal(a.params.w_out, b.params.w_out)
        assert a.params.b_out == b.params.b_out
        assert a.epoch_losses == b.epoch_losses

    def test_seed_changes_outcome(self):
        samples = sine_samples(60)
        a = train(samples, TrainConfig(hidden=4, epochs=2, seed=1))
        b = train(samples, TrainConfig(hidden=4, epochs=2, seed=2))
        assert not np.array_equal(a.params.w_gates, b.params.w_gates)

    def test_loss_descends_on_learnable_signal(self):
        samples = sine_samples(150)
        result = train(samples, TrainConfig(hidden=8, epochs=30, seed=0,
                                            learning_rate=0.01))
        assert len(result.epoch_losses) == 30
        assert result.epoch_losses[-1] < 0.5 * result.epoch_losses[0]

    def test_config_validation(self):
        with pytest.raises(ValueError, match="hidden"):
            TrainConfig(hidden=0)
        with pytest.raises(ValueError, match="learning_rate"):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError, match="beta"):
            TrainConfig(beta1=1.0)
        with pytest.raises(ValueError, match="epsilon"):
            TrainConfig(epsilon=0.0)


class TestPredict:
    def test_clamps_to_unit_interval(self):
        high = LstmParams(1, 1, np.zeros((4, 2)), np.zeros(4), np.zeros(1), 9.0)
        low = LstmParams(1, 1, np.zeros((4, 2)), np.zeros(4), np.zeros(1), -9.0)
        assert predict(high, [0.5]) == 1.0
        assert predict(low, [0.5]) == 0.0

    def test_batch_matches_scalar(self, rng):
        params = init_params(5, seed=4)
        windows = rng.uniform(0, 1, (6, 8))
        batch = predict_batch(params, windows)
        singles = [predict(params, row) for row in windows]
        np.testing.assert_allclose(batch, singles, atol=1e-12)

    def test_batch_validation(self):
        params = init_params(2, seed=0)
        with pytest.raises(ValueError, match="batch"):
            predict_batch(params, np.zeros((0, 4)))

    def test_accepts_readonly_arrays(self):
        # grid load rows are write-protected views; both kernel backends
        # must take them as-is
        params = init_params(3, seed=1)
        params.w_gates.setflags(write=False)
        params.b_gates.setflags(write=False)
        window = np.linspace(0.1, 0.9, 6)
        window.setflags(write=False)
        value = predict(params, window)
        assert 0.0 <= value <= 1.0
        grads = backward_bptt(params, (window[None, :], np.array([0.5])))
        assert np.all(np.isfinite(grads.w_gates))


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        params = init_params(6, seed=13)
        path = tmp_path / "model.json"
        save_params(path, params, window_size=9)
        loaded, window_size = load_params(path)
        assert window_size == 9
        assert np.array_equal(loaded.w_gates, params.w_gates)
        assert np.array_equal(loaded.b_gates, params.b_gates)
        assert np.array_equal(loaded.w_out, params.w_out)
        assert loaded.b_out == params.b_out
        window = np.linspace(0, 1, 9)
        assert predict(loaded, window) == predict(params, window)

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}\n')
        with pytest.raises(ValueError, match="format"):
            load_params(path)

    def test_rejects_bad_window_size(self, tmp_path):
        params = init_params(2, seed=0)
        with pytest.raises(ValueError, match="window_size"):
            save_params(tmp_path / "m.json", params, window_size=0)

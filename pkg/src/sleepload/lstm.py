"""Single-layer LSTM forecaster for per-cell load series, built from scratch.

One LSTM layer reads a window of past loads one value per step; a linear
head maps the final hidden state to the next-slot prediction.  Training
minimizes mean absolute error with Adam over exact backpropagation through
time.  The recurrence kernels live in a compiled extension when available
and in a numpy twin otherwise; set ``SLEEPLOAD_PURE_PYTHON=1`` to force the
fallback.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._util import derive_seed
from .data import WindowSample

if os.environ.get("SLEEPLOAD_PURE_PYTHON"):
    from . import _lstm_py as _kernels
else:
    try:
        from . import _lstm_cy as _kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _lstm_py as _kernels


def kernel_backend() -> str:
    """Name of the active recurrence backend: "cython" or "numpy"."""
    return _kernels.BACKEND_NAME


GATE_ORDER = ("forget", "input", "candidate", "output")


@dataclass
class LstmParams:
    """All trainable weights.

    ``w_gates`` stacks the four gate weight matrices row-wise in
    :data:`GATE_ORDER`; each block is (hidden, hidden + input_dim) and acts
    on the concatenation [previous hidden state, current input].  ``w_out``
    and ``b_out`` form the linear readout of the final hidden state.
    """

    hidden: int
    input_dim: int
    w_gates: np.ndarray
    b_gates: np.ndarray
    w_out: np.ndarray
    b_out: float

    def __post_init__(self):
        if self.hidden < 1 or self.input_dim < 1:
            raise ValueError("hidden and input_dim must be positive")
        self.w_gates = np.asarray(self.w_gates, dtype=float)
        self.b_gates = np.asarray(self.b_gates, dtype=float)
        self.w_out = np.asarray(self.w_out, dtype=float)
        self.b_out = float(self.b_out)
        expected = (4 * self.hidden, self.hidden + self.input_dim)
        if self.w_gates.shape != expected:
            raise ValueError(f"w_gates must have shape {expected}")
        if self.b_gates.shape != (4 * self.hidden,):
            raise ValueError(f"b_gates must have shape ({4 * self.hidden},)")
        if self.w_out.shape != (self.hidden,):
            raise ValueError(f"w_out must have shape ({self.hidden},)")
        arrays = (self.w_gates, self.b_gates, self.w_out)
        if not all(np.all(np.isfinite(a)) for a in arrays) or not math.isfinite(self.b_out):
            raise ValueError("parameters must be finite")

    def _gate_block(self, name: str) -> slice:
        idx = GATE_ORDER.index(name)
        return slice(idx * self.hidden, (idx + 1) * self.hidden)

    def gate_weights(self, name: str) -> np.ndarray:
        """(hidden, hidden + input_dim) weight block of one gate."""
        return self.w_gates[self._gate_block(name)]

    def gate_bias(self, name: str) -> np.ndarray:
        return self.b_gates[self._gate_block(name)]

    def copy(self) -> "LstmParams":
        return LstmParams(self.hidden, self.input_dim, self.w_gates.copy(),
                          self.b_gates.copy(), self.w_out.copy(), self.b_out)


class LstmState(NamedTuple):
    """Recurrent carry: hidden state and cell state, each (hidden,)."""

    h: np.ndarray
    c: np.ndarray


class GateActivations(NamedTuple):
    forget: np.ndarray
    input: np.ndarray
    candidate: np.ndarray
    output: np.ndarray


def init_params(hidden: int, seed: int = 0, *, input_dim: int = 1,
                init_scale: float = 0.1) -> LstmParams:
    """Uniform(-init_scale, init_scale) initialization of every weight."""
    if not (init_scale > 0):
        raise ValueError("init_scale must be positive")
    rng = np.random.default_rng(seed)
    w_gates = rng.uniform(-init_scale, init_scale, (4 * hidden, hidden + input_dim))
    b_gates = rng.uniform(-init_scale, init_scale, 4 * hidden)
    w_out = rng.uniform(-init_scale, init_scale, hidden)
    b_out = float(rng.uniform(-init_scale, init_scale))
    return LstmParams(hidden, input_dim, w_gates, b_gates, w_out, b_out)


def _sigmoid_vec(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_cell_forward(params: LstmParams, x_t, state: LstmState | None = None
                      ) -> tuple[LstmState, GateActivations]:
    """One step of the gated recurrence (reference single-step form)."""
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    if x_t.shape != (params.input_dim,):
        raise ValueError(f"expected input of shape ({params.input_dim},)")
    if not np.all(np.isfinite(x_t)):
        raise ValueError("input must be finite")
    if state is None:
        state = LstmState(np.zeros(params.hidden), np.zeros(params.hidden))
    joined = np.concatenate([state.h, x_t])
    z = params.w_gates @ joined + params.b_gates
    hid = params.hidden
    f = _sigmoid_vec(z[:hid])
    i = _sigmoid_vec(z[hid : 2 * hid])
    g = np.tanh(z[2 * hid : 3 * hid])
    o = _sigmoid_vec(z[3 * hid :])
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return LstmState(h, c), GateActivations(f, i, g, o)


def _stack_samples(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, tuple) and len(samples) == 2:
        x, y = np.asarray(samples[0], dtype=float), np.asarray(samples[1], dtype=float)
    else:
        if len(samples) == 0:
            raise ValueError("need at least one sample")
        widths = {s.window_size for s in samples}
        if len(widths) != 1:
            raise ValueError("all windows must share one window_size")
        x = np.stack([s.inputs for s in samples])
        y = np.array([s.target for s in samples])
    if x.ndim != 2 or y.shape != (x.shape[0],) or x.shape[0] == 0:
        raise ValueError("expected inputs (batch, window) aligned with targets (batch,)")
    return x, y


def _require_scalar_input(params: LstmParams):
    if params.input_dim != 1:
        raise ValueError("sequence kernels support scalar inputs only (input_dim=1)")


def forward_sequence(params: LstmParams, window) -> float:
    """Prediction for one window: run the recurrence, apply the linear head."""
    _require_scalar_input(params)
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or window.size == 0:
        raise ValueError("window must be a non-empty vector")
    if not np.all(np.isfinite(window)):
        raise ValueError("window must be finite")
    h_last, _ = _kernels.forward_batch(params.w_gates, params.b_gates, window[None, :])
    return float(h_last[0] @ params.w_out + params.b_out)


def loss_mae(predictions, targets) -> float:
    """Mean absolute error between aligned vectors."""
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape or predictions.ndim != 1 or predictions.size == 0:
        raise ValueError("predictions and targets must be aligned non-empty vectors")
    return float(np.abs(predictions - targets).mean())


@dataclass
class LstmGradients:
    """Gradients of the mean batch loss, one array per parameter tensor."""

    w_gates: np.ndarray
    b_gates: np.ndarray
    w_out: np.ndarray
    b_out: float


def _forward_loss_backward(params: LstmParams, x: np.ndarray, y: np.ndarray
                           ) -> tuple[float, LstmGradients]:
    batch = x.shape[0]
    h_last, cache = _kernels.forward_batch(params.w_gates, params.b_gates, x)
    preds = h_last @ params.w_out + params.b_out
    resid = preds - y
    loss = float(np.abs(resid).mean())

    # MAE subgradient, zero at exact hits; scaled so grads are of the mean.
    d_pred = np.sign(resid) / batch
    d_w_out = h_last.T @ d_pred
    d_b_out = float(d_pred.sum())
    d_h_last = np.outer(d_pred, params.w_out)
    d_w_gates, d_b_gates = _kernels.backward_batch(params.w_gates, x, cache, d_h_last)

    grads = LstmGradients(d_w_gates, d_b_gates, d_w_out, d_b_out)
    for name in ("w_gates", "b_gates", "w_out"):
        if not np.all(np.isfinite(getattr(grads, name))):
            raise FloatingPointError(f"non-finite gradient in {name}")
    if not math.isfinite(grads.b_out):
        raise FloatingPointError("non-finite gradient in b_out")
    return loss, grads


def backward_bptt(params: LstmParams, samples) -> LstmGradients:
    """Exact gradients of the mean absolute error over a batch of windows.

    ``samples`` is a sequence of :class:`WindowSample` or an ``(x, y)`` pair
    of arrays with shapes (batch, window) and (batch,).
    """
    _require_scalar_input(params)
    x, y = _stack_samples(samples)
    _, grads = _forward_loss_backward(params, x, y)
    return grads


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (Adam on mean absolute error)."""

    hidden: int = 10
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden must be positive")
        if not (self.learning_rate > 0):
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not (self.epsilon > 0) or not (self.init_scale > 0):
            raise ValueError("epsilon and init_scale must be positive")


@dataclass
class TrainResult:
    """Fitted parameters plus the mean training loss after each epoch."""

    params: LstmParams
    epoch_losses: tuple[float, ...]


def train(samples: Sequence[WindowSample], config: TrainConfig = TrainConfig()
          ) -> TrainResult:
    """Fit the forecaster on windowed samples.

    Deterministic for a fixed (samples, config): initialization, shuffling
    and the optimizer all derive from ``config.seed``.
    """
    x, y = _stack_samples(samples)
    params = init_params(config.hidden, derive_seed(config.seed, "init"),
                         init_scale=config.init_scale)
    shuffle_rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))

    tensors = {
        "w_gates": params.w_gates.copy(),
        "b_gates": params.b_gates.copy(),
        "w_out": params.w_out.copy(),
        "b_out": np.array(params.b_out),
    }
    moment1 = {k: np.zeros_like(v) for k, v in tensors.items()}
    moment2 = {k: np.zeros_like(v) for k, v in tensors.items()}
    step = 0
    total = x.shape[0]
    losses = []
    for _ in range(config.epochs):
        perm = shuffle_rng.permutation(total)
        epoch_loss = 0.0
        for start in range(0, total, config.batch_size):
            idx = perm[start : start + config.batch_size]
            current = LstmParams(config.hidden, 1, tensors["w_gates"],
                                 tensors["b_gates"], tensors["w_out"],
                                 float(tensors["b_out"]))
            loss, grads = _forward_loss_backward(current, x[idx], y[idx])
            epoch_loss += loss * idx.size
            step += 1
            grad_map = {"w_gates": grads.w_gates, "b_gates": grads.b_gates,
                        "w_out": grads.w_out, "b_out": np.array(grads.b_out)}
            for key, grad in grad_map.items():
                moment1[key] = config.beta1 * moment1[key] + (1 - config.beta1) * grad
                moment2[key] = config.beta2 * moment2[key] + (1 - config.beta2) * grad**2
                m_hat = moment1[key] / (1 - config.beta1**step)
                v_hat = moment2[key] / (1 - config.beta2**step)
                tensors[key] = tensors[key] - config.learning_rate * m_hat / (
                    np.sqrt(v_hat) + config.epsilon
                )
        losses.append(epoch_loss / total)

    fitted = LstmParams(config.hidden, 1, tensors["w_gates"], tensors["b_gates"],
                        tensors["w_out"], float(tensors["b_out"]))
    return TrainResult(params=fitted, epoch_losses=tuple(losses))


def predict(params: LstmParams, window) -> float:
    """Next-slot load prediction, clamped to the valid range [0, 1]."""
    return float(min(max(forward_sequence(params, window), 0.0), 1.0))


def predict_batch(params: LstmParams, windows) -> np.ndarray:
    """Clamped predictions for a (batch, window) array of inputs."""
    _require_scalar_input(params)
    x = np.asarray(windows, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("windows must be a non-empty (batch, window) array")
    h_last, _ = _kernels.forward_batch(params.w_gates, params.b_gates, x)
    return np.clip(h_last @ params.w_out + params.b_out, 0.0, 1.0)


def save_params(path, params: LstmParams, window_size: int) -> None:
    """Serialize parameters to JSON, bit-exact across save/load."""
    if window_size < 1:
        raise ValueError("window_size must be positive")
    payload = {
        "format": "sleepload-lstm-v1",
        "hidden": params.hidden,
        "input_dim": params.input_dim,
        "window_size": int(window_size),
        "w_gates": params.w_gates.ravel().tolist(),
        "b_gates": params.b_gates.tolist(),
        "w_out": params.w_out.tolist(),
        "b_out": params.b_out,
    }
    with open(path, "w") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_params(path) -> tuple[LstmParams, int]:
    """Inverse of :func:`save_params`; returns (params, window_size)."""
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("format") != "sleepload-lstm-v1":
        raise ValueError("unrecognized parameter file format")
    hidden = int(payload["hidden"])
    input_dim = int(payload["input_dim"])
    params = LstmParams(
        hidden,
        input_dim,
        np.array(payload["w_gates"], dtype=float).reshape(4 * hidden, hidden + input_dim),
        np.array(payload["b_gates"], dtype=float),
        np.array(payload["w_out"], dtype=float),
        float(payload["b_out"]),
    )
    return params, int(payload["window_size"])

"""Pure-numpy LSTM sequence kernels (fallback backend).

Both backends expose the same two functions with identical semantics; the
compiled sibling merely runs the time recurrence in C loops.  Gate rows in
``w_gates``/``b_gates`` are packed [forget, input, candidate, output]; the
weight columns are the previous hidden state followed by the scalar input.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(w_gates, b_gates, x):
    """Run the recurrence over a batch of scalar-input windows.

    w_gates: (4H, H+1), b_gates: (4H,), x: (B, T).
    Returns (h_last (B, H), cache) where the cache holds the activated gates
    (T, B, 4H), cell states (T, B, H) and hidden states (T, B, H).
    """
    four_h = w_gates.shape[0]
    hidden = four_h // 4
    batch, steps = x.shape
    wh = w_gates[:, :hidden]
    wx = w_gates[:, hidden]

    gates = np.empty((steps, batch, four_h))
    cells = np.empty((steps, batch, hidden))
    hiddens = np.empty((steps, batch, hidden))
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    for t in range(steps):
        z = h @ wh.T + np.outer(x[:, t], wx) + b_gates
        f = _sigmoid(z[:, :hidden])
        i = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :, :hidden] = f
        gates[t, :, hidden : 2 * hidden] = i
        gates[t, :, 2 * hidden : 3 * hidden] = g
        gates[t, :, 3 * hidden :] = o
        cells[t] = c
        hiddens[t] = h
    return h.copy(), (gates, cells, hiddens)


def backward_batch(w_gates, x, cache, d_h_last):
    """Backpropagate through the full recurrence.

    d_h_last: (B, H) gradient arriving at the final hidden state.
    Returns (d_w_gates (4H, H+1), d_b_gates (4H,)) summed over the batch.
    """
    gates, cells, hiddens = cache
    steps, batch, four_h = gates.shape
    hidden = four_h // 4
    wh = w_gates[:, :hidden]

    dw = np.zeros_like(w_gates)
    db = np.zeros(four_h)
    dh = d_h_last.copy()
    dc = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        f = gates[t, :, :hidden]
        i = gates[t, :, hidden : 2 * hidden]
        g = gates[t, :, 2 * hidden : 3 * hidden]
        o = gates[t, :, 3 * hidden :]
        tanh_c = np.tanh(cells[t])
        c_prev = cells[t - 1] if t > 0 else np.zeros((batch, hidden))
        h_prev = hiddens[t - 1] if t > 0 else np.zeros((batch, hidden))

        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        dz = np.empty((batch, four_h))
        dz[:, :hidden] = dc * c_prev * f * (1.0 - f)
        dz[:, hidden : 2 * hidden] = dc * g * i * (1.0 - i)
        dz[:, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
        dz[:, 3 * hidden :] = dh * tanh_c * o * (1.0 - o)

        dw[:, :hidden] += dz.T @ h_prev
        dw[:, hidden] += dz.T @ x[:, t]
        db += dz.sum(axis=0)
        dh = dz @ wh
        dc = dc * f
    return dw, db

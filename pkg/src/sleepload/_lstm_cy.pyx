# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled LSTM sequence kernels.

Contract-identical to the pure-numpy backend: same packing (rows
[forget, input, candidate, output], columns [previous hidden, scalar input]),
same cache layout, same return values.  Only the loop execution differs.
"""

from libc.math cimport exp, tanh

import numpy as np

BACKEND_NAME = "cython"


cdef inline double _sig(double z) nogil:
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    cdef double ez = exp(z)
    return ez / (1.0 + ez)


def forward_batch(w_gates, b_gates, x):
    """Run the recurrence over a batch of scalar-input windows.

    w_gates: (4H, H+1), b_gates: (4H,), x: (B, T).
    Returns (h_last (B, H), cache) where the cache holds the activated gates
    (T, B, 4H), cell states (T, B, H) and hidden states (T, B, H).
    """
    # const views so read-only (write-protected) arrays are accepted
    cdef const double[:, ::1] w = np.ascontiguousarray(w_gates, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(b_gates, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)

    cdef Py_ssize_t four_h = w.shape[0]
    cdef Py_ssize_t hidden = four_h // 4
    cdef Py_ssize_t batch = xv.shape[0]
    cdef Py_ssize_t steps = xv.shape[1]

    gates_arr = np.empty((steps, batch, four_h))
    cells_arr = np.empty((steps, batch, hidden))
    hiddens_arr = np.empty((steps, batch, hidden))
    h_last_arr = np.zeros((batch, hidden))
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] cells = cells_arr
    cdef double[:, :, ::1] hiddens = hiddens_arr
    cdef double[:, ::1] h_last = h_last_arr

    cdef Py_ssize_t t, bi, j, k, u
    cdef double z, xt, f, i, g, o, c_prev, c, h_prev_k

    with nogil:
        for t in range(steps):
            for bi in range(batch):
                xt = xv[bi, t]
                for j in range(four_h):
                    z = b[j] + w[j, hidden] * xt
                    if t > 0:
                        for k in range(hidden):
                            z += w[j, k] * hiddens[t - 1, bi, k]
                    gates[t, bi, j] = z
                for u in range(hidden):
                    f = _sig(gates[t, bi, u])
                    i = _sig(gates[t, bi, hidden + u])
                    g = tanh(gates[t, bi, 2 * hidden + u])
                    o = _sig(gates[t, bi, 3 * hidden + u])
                    c_prev = cells[t - 1, bi, u] if t > 0 else 0.0
                    c = f * c_prev + i * g
                    gates[t, bi, u] = f
                    gates[t, bi, hidden + u] = i
                    gates[t, bi, 2 * hidden + u] = g
                    gates[t, bi, 3 * hidden + u] = o
                    cells[t, bi, u] = c
                    hiddens[t, bi, u] = o * tanh(c)
        for bi in range(batch):
            for u in range(hidden):
                h_last[bi, u] = hiddens[steps - 1, bi, u]

    return h_last_arr, (gates_arr, cells_arr, hiddens_arr)


def backward_batch(w_gates, x, cache, d_h_last):
    """Backpropagate through the full recurrence.

    d_h_last: (B, H) gradient arriving at the final hidden state.
    Returns (d_w_gates (4H, H+1), d_b_gates (4H,)) summed over the batch.
    """
    gates_arr, cells_arr, hiddens_arr = cache
    cdef const double[:, ::1] w = np.ascontiguousarray(w_gates, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, ::1] gates = np.ascontiguousarray(gates_arr, dtype=np.float64)
    cdef const double[:, :, ::1] cells = np.ascontiguousarray(cells_arr, dtype=np.float64)
    cdef const double[:, :, ::1] hiddens = np.ascontiguousarray(hiddens_arr, dtype=np.float64)

    cdef Py_ssize_t steps = gates.shape[0]
    cdef Py_ssize_t batch = gates.shape[1]
    cdef Py_ssize_t four_h = gates.shape[2]
    cdef Py_ssize_t hidden = four_h // 4

    dw_arr = np.zeros((four_h, hidden + 1))
    db_arr = np.zeros(four_h)
    dh_arr = np.array(d_h_last, dtype=np.float64, copy=True)
    dc_arr = np.zeros((batch, hidden))
    dz_arr = np.empty((batch, four_h))
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dc = dc_arr
    cdef double[:, ::1] dz = dz_arr

    cdef Py_ssize_t t, bi, j, k, u
    cdef double f, i, g, o, tc, c_prev, dhu, dcu, dzj, s

    with nogil:
        for t in range(steps - 1, -1, -1):
            for bi in range(batch):
                for u in range(hidden):
                    f = gates[t, bi, u]
                    i = gates[t, bi, hidden + u]
                    g = gates[t, bi, 2 * hidden + u]
                    o = gates[t, bi, 3 * hidden + u]
                    tc = tanh(cells[t, bi, u])
                    c_prev = cells[t - 1, bi, u] if t > 0 else 0.0
                    dhu = dh[bi, u]
                    dcu = dc[bi, u] + dhu * o * (1.0 - tc * tc)
                    dz[bi, u] = dcu * c_prev * f * (1.0 - f)
                    dz[bi, hidden + u] = dcu * g * i * (1.0 - i)
                    dz[bi, 2 * hidden + u] = dcu * i * (1.0 - g * g)
                    dz[bi, 3 * hidden + u] = dhu * tc * o * (1.0 - o)
                    dc[bi, u] = dcu * f
            for bi in range(batch):
                for j in range(four_h):
                    dzj = dz[bi, j]
                    db[j] += dzj
                    if t > 0:
                        for k in range(hidden):
                            dw[j, k] += dzj * hiddens[t - 1, bi, k]
                    dw[j, hidden] += dzj * xv[bi, t]
            for bi in range(batch):
                for k in range(hidden):
                    s = 0.0
                    for j in range(four_h):
                        s += dz[bi, j] * w[j, k]
                    dh[bi, k] = s

    return dw_arr, db_arr

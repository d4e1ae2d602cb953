"""Benchmark the two recurrence backends against each other.

The package ships the forward/backward batch kernels twice: a Cython
extension (``sleepload._lstm_cy``) and a numpy fallback
(``sleepload._lstm_py``) that is used when the extension is missing or
``SLEEPLOAD_PURE_PYTHON=1`` is set.  This script times both on the same
inputs across a few representative problem sizes and prints a table with
the per-call times and the speedup, after asserting that the two backends
agree numerically.

Run from the repository root:

    python3 benchmarks/bench_lstm.py
"""

import time

import numpy as np

from sleepload import _lstm_py

try:
    from sleepload import _lstm_cy
except ImportError:  # extension not built; nothing to compare against
    _lstm_cy = None

# (batch, window, hidden units); the first row is the default training shape,
# the last is far beyond it to show where the BLAS-backed fallback overtakes
SIZES = [
    (32, 12, 10),
    (128, 24, 16),
    (512, 48, 32),
]

MIN_REPEATS = 5
TARGET_SECONDS = 0.35


def make_problem(batch: int, window: int, hidden: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    w_gates = rng.normal(0.0, 0.2, (4 * hidden, hidden + 1))
    b_gates = rng.normal(0.0, 0.2, 4 * hidden)
    x = rng.uniform(0.0, 1.0, (batch, window))
    d_h_last = rng.normal(0.0, 1.0, (batch, hidden))
    return w_gates, b_gates, x, d_h_last


def check_agreement(problem) -> None:
    w, b, x, dh = problem
    h_py, cache_py = _lstm_py.forward_batch(w, b, x)
    h_cy, cache_cy = _lstm_cy.forward_batch(w, b, x)
    np.testing.assert_allclose(h_cy, h_py, rtol=0, atol=1e-12)
    dw_py, db_py = _lstm_py.backward_batch(w, x, cache_py, dh)
    dw_cy, db_cy = _lstm_cy.backward_batch(w, x, cache_cy, dh)
    np.testing.assert_allclose(dw_cy, dw_py, rtol=0, atol=1e-9)
    np.testing.assert_allclose(db_cy, db_py, rtol=0, atol=1e-9)


def time_call(fn, *args) -> float:
    """Best-of-N wall time for one call, with N adapted to the call cost."""
    fn(*args)  # warm up
    start = time.perf_counter()
    fn(*args)
    once = time.perf_counter() - start
    repeats = max(MIN_REPEATS, int(TARGET_SECONDS / max(once, 1e-9)))
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(module, problem):
    w, b, x, dh = problem
    fwd = time_call(module.forward_batch, w, b, x)
    _, cache = module.forward_batch(w, b, x)
    bwd = time_call(module.backward_batch, w, x, cache, dh)
    return fwd, bwd


def fmt(seconds: float) -> str:
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    return f"{seconds * 1e3:8.2f} ms"


def main() -> int:
    if _lstm_cy is None:
        print("cython extension is not built; run pip install -e . first")
        return 1

    print(f"backends: numpy ({_lstm_py.BACKEND_NAME}) vs "
          f"cython ({_lstm_cy.BACKEND_NAME})")
    header = (f"{'batch':>6} {'window':>6} {'hidden':>6} {'pass':>8} "
              f"{'numpy':>11} {'cython':>11} {'speedup':>8}")
    print(header)
    print("-" * len(header))
    for batch, window, hidden in SIZES:
        problem = make_problem(batch, window, hidden)
        check_agreement(problem)
        np_fwd, np_bwd = bench_backend(_lstm_py, problem)
        cy_fwd, cy_bwd = bench_backend(_lstm_cy, problem)
        for name, np_t, cy_t in (("forward", np_fwd, cy_fwd),
                                 ("backward", np_bwd, cy_bwd)):
            print(f"{batch:>6} {window:>6} {hidden:>6} {name:>8} "
                  f"{fmt(np_t)} {fmt(cy_t)} {np_t / cy_t:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

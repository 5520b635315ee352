#!/usr/bin/env python3
"""Benchmark the njit kernels against the pure-numpy fallback.

Times each hot kernel at desk-run shapes, checks both backends agree,
then times full training steps on a small classification model. Run
after any kernel change; the numba path must not silently regress below
the numpy baseline.
"""

import argparse
import time

import numpy as np

from coqe import kernels


def time_call(fn, args, repeats):
    fn(*args)  # warmup (and JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng):
    # shapes taken from the desk classification preset: batch 24, 17
    # tokens, embed 64, 8 heads
    rows, tokens, embed = 24 * 8 * 17, 24 * 17, 64
    x_sm = rng.normal(size=(rows, 17)).astype(np.float32)
    y_sm = kernels.softmax_fwd(x_sm)
    g_sm = rng.normal(size=x_sm.shape).astype(np.float32)
    x_ln = rng.normal(size=(tokens, embed)).astype(np.float32)
    gain = np.ones(embed, dtype=np.float32)
    bias = np.zeros(embed, dtype=np.float32)
    _, xhat, rstd = kernels.layer_norm_fwd(x_ln, gain, bias, np.float32(1e-5))
    g_ln = rng.normal(size=x_ln.shape).astype(np.float32)
    x_relu = rng.normal(size=(tokens, 4 * embed)).astype(np.float32)
    g_relu = rng.normal(size=x_relu.shape).astype(np.float32)
    logits = rng.normal(size=(24, 64)).astype(np.float32)
    targets = rng.integers(0, 64, size=24)
    _, probs = kernels.cross_entropy_fwd(logits, targets)
    n_params = 200_000
    adam_args = (
        rng.normal(size=n_params).astype(np.float32),
        rng.normal(size=n_params).astype(np.float32),
        np.zeros(n_params, dtype=np.float32),
        np.zeros(n_params, dtype=np.float32),
        np.float32(1e-4), np.float32(0.9), np.float32(0.999),
        np.float32(1e-8), np.float32(0.9), np.float32(0.999), np.float32(1.0),
    )
    return [
        ("softmax_fwd", (x_sm,)),
        ("softmax_bwd", (g_sm, y_sm)),
        ("layer_norm_fwd", (x_ln, gain, bias, np.float32(1e-5))),
        ("layer_norm_bwd", (g_ln, xhat, rstd, gain)),
        ("relu_fwd", (x_relu,)),
        ("relu_bwd", (g_relu, x_relu)),
        ("cross_entropy_fwd", (logits, targets)),
        ("cross_entropy_bwd", (probs, targets, np.float32(1.0 / 24))),
        ("adam_update", adam_args),
    ]


def as_tuple(result):
    return result if isinstance(result, tuple) else (result,)


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    print(f"{'kernel':<20} {'numpy':>10} {'numba':>10} {'speedup':>8}  match")
    for name, args in cases:
        results = {}
        times = {}
        for backend in kernels.available_backends():
            # adam mutates its buffers; give each backend fresh copies
            call_args = tuple(
                a.copy() if isinstance(a, np.ndarray) else a for a in args
            )
            kernels.set_backend(backend)
            times[backend] = time_call(getattr(kernels, name), call_args,
                                       repeats)
            out = getattr(kernels, name)(*call_args)
            # adam mutates p/m/v in place and returns nothing
            results[backend] = call_args[:4] if out is None else as_tuple(out)
        if "numba" not in times:
            print(f"{name:<20} {times['numpy'] * 1e3:>9.3f}ms  (numba absent)")
            continue
        match = all(
            np.allclose(a, b, rtol=1e-5, atol=1e-6)
            for a, b in zip(results["numpy"], results["numba"])
        )
        print(f"{name:<20} {times['numpy'] * 1e3:>9.3f}ms "
              f"{times['numba'] * 1e3:>9.3f}ms "
              f"{times['numpy'] / times['numba']:>7.2f}x  {match}")


def bench_training(steps):
    from coqe.harness.config import load_config
    from coqe.harness.train import build_model, run_classification

    cfg = load_config("smoke-classification")
    cfg["training"]["steps"] = steps
    cfg["eval"]["cadence"] = steps
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            cfg["out_dir"] = tmp
            t0 = time.perf_counter()
            run_classification(cfg)
            dt = time.perf_counter() - t0
        print(f"{steps} training steps [{backend:>5}]: {dt:.2f}s "
              f"({dt / steps * 1e3:.1f} ms/step)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50,
                        help="timing repeats per kernel (best-of)")
    parser.add_argument("--train-steps", type=int, default=100,
                        help="steps for the end-to-end comparison; 0 skips")
    args = parser.parse_args()
    print(f"backends available: {kernels.available_backends()}")
    bench_kernels(args.repeats)
    if args.train_steps:
        bench_training(args.train_steps)


if __name__ == "__main__":
    main()

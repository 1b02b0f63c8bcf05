"""Time contour integration with the compiled and the pure-Python flow kernels.

    python benchmarks/bench_flow.py [--images 5] [--dim 201]
"""
import argparse
import time

from modelbench.disk2d import DegradeConfig, make_sample
from modelbench.pointflow import available, compute_fields, integrate_contours
from modelbench.streams import stream


def bench(backend, images, repeat=1):
    best = float("inf")
    total = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        total = 0
        for _, img in images:
            total += len(integrate_contours(img, rng=stream(0, "bench"), backend=backend))
        best = min(best, time.perf_counter() - t0)
    return best, total


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--images", type=int, default=5)
    ap.add_argument("--dim", type=int, default=201)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    images = [make_sample(0, i, args.dim, DegradeConfig()) for i in range(args.images)]
    t0 = time.perf_counter()
    for _, img in images:
        compute_fields(img)
    fields_s = (time.perf_counter() - t0) / len(images)
    print(f"fields: {1e3 * fields_s:.1f} ms/image (shared by both backends)")

    results = {}
    for backend in available():
        secs, n = bench(backend, images, args.repeat if backend == "compiled" else 1)
        results[backend] = secs
        print(f"{backend:>9}: {1e3 * secs / len(images):8.1f} ms/image, {n} contours")
    if len(results) == 2:
        print(f"speedup: {results['python'] / results['compiled']:.1f}x")


if __name__ == "__main__":
    main()

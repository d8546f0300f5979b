"""Time the numba kernels against their numpy twins.

Per-kernel numbers call both implementations directly. The pipeline numbers
run one augmentation epoch in a child process per backend, since the backend
is fixed at import time by VCECLF_BACKEND.

    python benchmarks/bench_kernels.py --repeat 20
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vceclf import kernels
from vceclf.augment import gaussian_kernel

PIPELINE_SNIPPET = """
import time, numpy as np
from vceclf.augment import AugmentConfig, apply_pipeline
from vceclf.data_io import ImageBuffer
img = ImageBuffer(np.random.default_rng(0).random(({h}, {w}, 3)))
cfg = AugmentConfig()
apply_pipeline(img, cfg, 0, 0)  # warm-up (jit compile or cache load)
t0 = time.perf_counter()
for i in range({n}):
    apply_pipeline(img, cfg, 1, i)
print((time.perf_counter() - t0) / {n})
"""


def kernel_cases(rng, size):
    img = rng.random((size, size, 3))
    hinv = np.array([[1.02, 0.05, -3.0], [-0.04, 0.98, 2.0], [1e-4, -2e-4, 1.0]])
    x = rng.random((256, 192))
    w = rng.normal(size=(64, 192))
    b = rng.normal(size=64)
    k = gaussian_kernel(1.5)
    return {
        "resize_bilinear": lambda m: m.resize_bilinear(img, 224, 224),
        "warp_homography": lambda m: m.warp_homography(img, hinv),
        "hue_shift": lambda m: m.hue_shift(img, 0.03),
        "color_jitter": lambda m: m.color_jitter(img, 1.1, 0.9, 1.2, 0.02),
        "blur_separable": lambda m: m.blur_separable(img, k),
        "dense_forward": lambda m: m.dense_forward(x, w, b),
    }


def pipeline_time(backend, size, n):
    env = dict(os.environ, VCECLF_BACKEND=backend)
    code = PIPELINE_SNIPPET.format(h=size, w=size, n=n)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=256, help="square input image side")
    p.add_argument("--repeat", type=int, default=10)
    p.add_argument("--pipeline-samples", type=int, default=50)
    args = p.parse_args()

    if kernels.numba_impl is None:
        sys.exit("numba is not importable; nothing to compare")
    cases = kernel_cases(np.random.default_rng(0), args.size)
    print(f"{'kernel':<18s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        fn(kernels.numba_impl)  # compile outside the timed region
        t_np = min(timeit.repeat(lambda: fn(kernels.numpy_impl), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fn(kernels.numba_impl), number=1, repeat=args.repeat))
        print(f"{name:<18s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.2f}")

    t_np = pipeline_time("numpy", args.size, args.pipeline_samples)
    t_nb = pipeline_time("numba", args.size, args.pipeline_samples)
    print(f"{'full pipeline':<18s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()

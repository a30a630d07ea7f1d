"""Time the compiled and pure-Python kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--size 128] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from misr_refkit import _kernels


def _cases(k, size, rng):
    img = rng.random((size, size))
    gy, gx = np.gradient(img)
    err = rng.normal(0, 0.01, img.shape)
    valid = rng.random(img.shape) > 0.1
    n = 12 * size * size
    px, py = rng.uniform(0, 3 * size, n), rng.uniform(0, 3 * size, n)
    vals, wts = rng.random(n), rng.random(n)
    hr = rng.random((3 * size, 3 * size))
    clear = rng.random((3 * size - 6, 3 * size - 6)) > 0.2
    return {
        "translate_bicubic": lambda: k.translate(img, 0.37, -1.21, 3),
        "translate_bilinear": lambda: k.translate(img, 0.37, -1.21, 1),
        "ic_sums": lambda: k.ic_sums(gx, gy, err, valid),
        "splat_12_views": lambda: k.splat(px, py, vals, wts, 3 * size, 3 * size, 0.5, 1.5),
        "cpsnr_scan": lambda: k.cpsnr_scan(hr[3:-3, 3:-3], clear, hr, 7),
    }


def _time(fn, repeat):
    fn()
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def _registration_time(pure, size, repeat):
    """Run a full registration in a child process so backend selection happens at import."""
    code = (
        "import timeit, numpy as np\n"
        "from misr_refkit.imaging import warp\n"
        "from misr_refkit.registration import estimate_translation\n"
        "from misr_refkit.synthetic import smooth_field\n"
        "rng = np.random.default_rng(0)\n"
        f"fixed = 0.2 + 0.5 * smooth_field(rng, ({size}, {size}), 4.0)\n"
        "moving, _ = warp(fixed, (0.8, -1.3))\n"
        "fn = lambda: estimate_translation(moving, fixed)\n"
        "fn()\n"
        f"print(min(timeit.repeat(fn, number=3, repeat={repeat})) / 3)\n"
    )
    env = dict(os.environ, MISR_REFKIT_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128, help="LR image side")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args(argv)

    backends = _kernels.backends()
    results = {}
    for name, mod in sorted(backends.items()):
        for case, fn in _cases(mod, args.size, np.random.default_rng(1)).items():
            results.setdefault(case, {})[name] = _time(fn, args.repeat)
    for name in backends:
        results.setdefault("estimate_translation", {})[name] = _registration_time(
            name == "python", args.size, args.repeat)

    if args.json:
        print(json.dumps(results, indent=2, sort_keys=True))
        return 0
    names = sorted(backends)
    print(f"{'kernel':24s}" + "".join(f"{n:>14s}" for n in names) + ("   speedup" if len(names) == 2 else ""))
    for case, row in results.items():
        line = f"{case:24s}" + "".join(f"{row[n] * 1e3:12.3f}ms" for n in names)
        if len(names) == 2 and "cython" in row:
            line += f"   {row['python'] / row['cython']:6.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Compiled vs numpy ADMM kernel timings.

Usage: python benchmarks/bench_anm.py [--repeat N] [--sizes 2x2 4x4 6x6]

Each case solves the same reduced ANM problem with both backends and
reports the median wall time, the iteration count and the largest
difference between the two solutions.
"""

import argparse
import math
import statistics
import time

import numpy as np

from starloc import _anm_py, kernels
from starloc.estimator import AnmConfig, localizer_for
from starloc.scenario import Scenario
from starloc.signal import build_measurement_matrices, sigma2_from_snr_db, synthesize_observation
from starloc.star_ris import PowerConfig, dft_design


def reduced_problem(nx, nz, snr_db, seed):
    """Normalized (evals, evecs, R^H b, mu) for a noisy single-atom channel."""
    rng = np.random.default_rng(seed)
    size = nx * nz
    r = np.triu(rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)))
    r += 3 * np.eye(size)
    ox = np.repeat(np.arange(nx) - (nx - 1) / 2, nz)
    oz = np.tile(np.arange(nz) - (nz - 1) / 2, nx)
    h = np.exp(1j * (1.1 * ox - 0.7 * oz))
    sigma = 10 ** (-snr_db / 20) * np.linalg.norm(r @ h) / math.sqrt(size)
    b = r @ h + sigma * (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)
    c, s = np.linalg.norm(r, 2), np.linalg.norm(b)
    rn, bn = r / c, b / s
    evals, evecs = np.linalg.eigh(rn.conj().T @ rn)
    mu = sigma * math.sqrt(size * math.log(size)) / (c * s)
    return np.maximum(evals, 0.0), np.ascontiguousarray(evecs), rn.conj().T @ bn, mu


def time_call(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times), out


def bench_kernels(sizes, repeat, snr_db=20.0):
    backends = [("python", _anm_py)]
    if kernels.compiled_backend is not None:
        backends.append(("cython", kernels.compiled_backend))
    print(f"{'size':>6} {'backend':>8} {'iters':>7} {'median s':>10} {'speed-up':>9} {'max |dh|':>10}")
    for nx, nz in sizes:
        args = reduced_problem(nx, nz, snr_db, 0)
        results = {}
        for name, mod in backends:
            t, out = time_call(lambda: mod.admm_solve(*args, 1.0, nx, nz, 1e-7, 50000), repeat)
            results[name] = (t, out)
        ref_t, ref = results["python"]
        for name, (t, out) in results.items():
            diff = float(np.max(np.abs(out[0] - ref[0])))
            print(f"{nx}x{nz:<4} {name:>8} {out[3]:>7d} {t:>10.4f} {ref_t / t:>8.1f}x {diff:>10.1e}")


def bench_localize(repeat, snr_db=20.0):
    sc = Scenario.table1(m=16, n=16)
    schedule = dft_design(16, 33)
    pc = PowerConfig(math.sqrt(0.9), math.sqrt(0.5))
    h1, h2, h3, h4 = sc.channels()
    mm = build_measurement_matrices(h4, schedule)
    sigma2 = sigma2_from_snr_db(snr_db)
    y = synthesize_observation(mm, h1, h2, h3, pc, sigma2, 0).y
    names = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    print(f"\nend-to-end localize, desk profile, {snr_db:g} dB")
    base = None
    for name in names:
        loc = localizer_for(sc, schedule, pc, AnmConfig(backend=name))
        t, _ = time_call(lambda: loc.localize(y, sigma2), repeat)
        base = t if base is None else base
        print(f"{name:>8} {t:>10.4f} s {base / t:>8.1f}x")


def parse_size(text):
    nx, nz = text.lower().split("x")
    return int(nx), int(nz)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", nargs="+", type=parse_size, default=[(2, 2), (4, 4), (6, 6)])
    args = parser.parse_args()
    if kernels.compiled_backend is None:
        print("compiled extension not built; timing the numpy backend only")
    bench_kernels(args.sizes, args.repeat)
    bench_localize(args.repeat)


if __name__ == "__main__":
    main()

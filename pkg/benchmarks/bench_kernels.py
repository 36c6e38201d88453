"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--n 10] [--repeat 5]

Both variants are importable in one process regardless of DETSCHED_NUMBA;
the first numba call (compilation, or loading the on-disk cache) is
excluded from the timings.
"""
import argparse
import timeit

import numpy as np

from detsched import kernels
from detsched._jit import HAVE_NUMBA
from detsched.coverage import SinrParams, link_factors
from detsched.dpp import SymmetricKernel, gaussian_similarity
from detsched.geometry import generate_network


def cases(n: int, rng: np.random.Generator):
    net = generate_network(n, seed=1)
    S = np.ascontiguousarray(gaussian_similarity(net, 10.0).matrix)
    omh, wvec = link_factors(net, SinrParams(10.0))
    w = rng.normal(size=n)
    K = kernels.marginal_from_log_quality_np(w, S)
    lam, V = SymmetricKernel.marginal(K).eigh()
    V = np.ascontiguousarray(V)
    uniforms = rng.random((2000, 2 * n))
    masks = rng.random((2000, n)) < 0.3
    fades = rng.exponential(1.0, (2000, n, n))
    G = np.ascontiguousarray(net.pathloss.gain(net.cross_distances()))
    return {
        "marginal_from_log_quality": (w, S),
        "coverage_terms": (K, omh, wvec),
        "utility_log_quality": (w, S, omh, wvec, 0.0),
        "fd_gradient": (w, S, omh, wvec, 0.0, 1e-6),
        "sample_masks (2000 draws)": (lam, V, uniforms),
        "sinr_success (2000 draws)": (masks, fades, G, 0.0, 10.0),
    }


def best_time(fn, args, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10, help="number of pairs")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"n = {args.n}")
    print(f"{'kernel':<28}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, call_args in cases(args.n, rng).items():
        base = name.split()[0]
        nb = getattr(kernels, base + "_nb")
        np_ = getattr(kernels, base + "_np")
        nb(*call_args)  # compile / load cache
        t_nb = best_time(nb, call_args, args.repeat)
        t_np = best_time(np_, call_args, args.repeat)
        print(f"{name:<28}{t_nb * 1e6:>10.1f}us{t_np * 1e6:>10.1f}us{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()

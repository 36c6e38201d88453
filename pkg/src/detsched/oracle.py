"""Independent checks for the determinant formulas.

Two routes that share no code with :mod:`detsched.coverage`'s Palm/scaling
path: exact enumeration over all subsets of an L-ensemble, and direct
Monte Carlo simulation of scheduler draws plus Rayleigh fading.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coverage import SinrParams, h_func, w_func
from .dpp import Role, SymmetricKernel, all_subsets, as_subset, sample_many
from .errors import InvalidArgument, SizeLimit
from .fairness import lower
from .geometry import Network, _check_index

MAX_ENUM_PAIRS = 12
MC_CHUNK = 20_000


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int

    def within(self, value: float, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= k * self.std_error

    @classmethod
    def from_count(cls, hits: int, samples: int, seed: int) -> "McEstimate":
        mean = hits / samples
        return cls(mean, math.sqrt(mean * (1.0 - mean) / samples), samples, seed)


def conditional_coverage_given_subset(net: Network, i: int, psi, p: SinrParams) -> float:
    """Coverage of link ``i`` when exactly ``psi`` transmits: ``w * prod h``."""
    i = _check_index(net, i)
    idx = as_subset(psi, net.n)
    if i not in idx:
        raise InvalidArgument(f"link {i} is not in the active set")
    p = p.resolve(net)
    r = float(np.hypot(*(net.transmitters[i] - net.receivers[i])))
    value = w_func(r, p, net.pathloss)
    for j in idx:
        if j != i:
            s = float(np.hypot(*(net.transmitters[j] - net.receivers[i])))
            value *= h_func(s, r, p, net.pathloss)
    return float(value)


def _enum_guard(n: int):
    if n > MAX_ENUM_PAIRS:
        raise SizeLimit(f"enumeration is limited to {MAX_ENUM_PAIRS} pairs, got {n}")


def subset_law(L: SymmetricKernel):
    """Yield ``(psi, P(Psi = psi))`` for all subsets, by explicit determinants."""
    _enum_guard(L.n)
    A = np.asarray(L.matrix)
    norm = np.linalg.det(A + np.eye(L.n))
    for psi in all_subsets(L.n):
        num = np.linalg.det(A[np.ix_(psi, psi)]) if psi else 1.0
        yield psi, num / norm


def enumerate_coverage(L: SymmetricKernel, net: Network, i: int, p: SinrParams) -> float:
    """Ground-truth coverage of link ``i``: sum over active sets containing it."""
    if L.role is Role.MARGINAL:
        raise InvalidArgument("enumerate_coverage needs an L-kernel")
    if L.n != net.n:
        raise InvalidArgument("kernel size does not match the network")
    _enum_guard(net.n)
    i = _check_index(net, i)
    total = 0.0
    for psi, prob in subset_law(L):
        if i in psi:
            total += prob * conditional_coverage_given_subset(net, i, psi, p)
    return total


def enumeration_mass(L: SymmetricKernel) -> float:
    return math.fsum(prob for _, prob in subset_law(L))


def _gain_matrix(net: Network) -> np.ndarray:
    return np.ascontiguousarray(net.pathloss.gain(net.cross_distances()))


def mc_coverage_all(
    spec, net: Network, p: SinrParams, samples: int, seed: int
) -> list:
    """Monte Carlo coverage of every link from the same scheduler/fading draws.

    ``spec`` is a scheduler spec or a marginal kernel. Per chunk, the
    scheduler uniforms are drawn first, then one exponential fade (mean
    ``fading_mean``) per transmitter-receiver path.
    """
    if samples < 100:
        raise InvalidArgument("need at least 100 samples")
    K = spec if isinstance(spec, SymmetricKernel) else lower(spec, net.n)
    p = p.resolve(net)
    G = _gain_matrix(net)
    n = net.n
    rng = np.random.default_rng(seed)
    hits = np.zeros(n, dtype=np.int64)
    done = 0
    while done < samples:
        m = min(MC_CHUNK, samples - done)
        masks = sample_many(K, m, rng)
        fades = rng.exponential(p.fading_mean, size=(m, n, n))
        covered = kernels.sinr_success(masks, fades, G, float(p.noise), float(p.tau))
        hits += covered.sum(axis=0)
        done += m
    return [McEstimate.from_count(int(h), samples, seed) for h in hits]


def mc_coverage(spec, net: Network, i: int, p: SinrParams, samples: int, seed: int) -> McEstimate:
    i = _check_index(net, i)
    return mc_coverage_all(spec, net, p, samples, seed)[i]


def mc_inclusion(K: SymmetricKernel, samples: int, seed: int) -> list:
    """Empirical inclusion frequency of every index."""
    if samples < 100:
        raise InvalidArgument("need at least 100 samples")
    rng = np.random.default_rng(seed)
    counts = np.zeros(K.n, dtype=np.int64)
    done = 0
    while done < samples:
        m = min(MC_CHUNK, samples - done)
        counts += sample_many(K, m, rng).sum(axis=0)
        done += m
    return [McEstimate.from_count(int(c), samples, seed) for c in counts]


ORACLE_HEADER = ["link", "exact_det", "exact_enum", "mc_mean", "mc_se", "abs_diff"]


def write_oracle_csv(fh, rows):
    """``rows``: iterable of (link, exact_det, exact_enum, mc_mean, mc_se).

    ``abs_diff`` is ``|exact_det - exact_enum|``.
    """
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ORACLE_HEADER)
    for link, det, enum_, mc, se in rows:
        w.writerow([link, repr(det), repr(enum_), repr(mc), repr(se), repr(abs(det - enum_))])

"""SINR coverage probabilities and throughputs under a determinantal scheduler.

With Rayleigh fading, an active interferer ``j`` leaves link ``i`` covered
with probability ``h_{x_i}(x_j)`` and noise with probability ``W_{x_i}``.
Averaging the product of these factors over a DPP with kernel ``K``,
conditioned on ``i`` transmitting, gives ``det(I - K^!_i{h_i}) W_i``, where
``K^!_i`` is the reduced Palm kernel and ``{h}`` the square-root scaling.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate

from . import kernels
from .dpp import EIG_TOL, Role, SymmetricKernel, palm_reduce, scale_kernel
from .errors import DivergingIntegral, InvalidArgument, InvalidKernel
from .geometry import SINGULAR, Network, PathLossModel, _check_index

# Test hook: when set, the determinant path uses 1 - h instead of h.
# The enumeration oracle calls h_func directly and is unaffected.
_TAMPER_H = False


@dataclass(frozen=True)
class SinrParams:
    """SINR threshold and noise settings.

    ``noise=None`` means "use the network's noise power". A fading mean
    ``mu`` other than 1 only rescales the noise (W is replaced by W/mu);
    the interference factor h does not depend on it.
    """

    tau: float = 10.0
    noise: Optional[float] = None
    fading_mean: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidArgument("tau must be positive")
        if not self.fading_mean > 0:
            raise InvalidArgument("fading_mean must be positive")
        if self.noise is not None and not self.noise >= 0:
            raise InvalidArgument("noise must be nonnegative")

    def resolve(self, net: Network) -> "SinrParams":
        if self.noise is None:
            return replace(self, noise=net.noise)
        return self

    @property
    def effective_noise(self) -> float:
        return (self.noise or 0.0) / self.fading_mean


def h_func(s, r, p: SinrParams, model: PathLossModel):
    """Probability that one active interferer at distance ``s`` from the
    receiver does not break a link of length ``r``.

    For the singular power law this is ``u / (u + tau)`` with
    ``u = (s / r) ** beta``; in general ``1 / (1 + tau gain(s) / gain(r))``.
    """
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InvalidArgument("link length r must be positive")
    if np.any(s < 0):
        raise InvalidArgument("distance s must be nonnegative")
    if model.kind == SINGULAR:
        u = (s / r) ** model.beta
        out = u / (u + p.tau)
    else:
        ratio = model.inverse_gain(r) / model.inverse_gain(s)
        out = 1.0 / (1.0 + p.tau * ratio)
    return out if out.ndim else float(out)


def w_func(r, p: SinrParams, model: PathLossModel):
    """Noise factor ``exp(-tau (W / mu) / gain(r))``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InvalidArgument("link length r must be positive")
    out = np.exp(-p.tau * p.effective_noise * model.inverse_gain(r))
    return out if out.ndim else float(out)


def link_factors(net: Network, p: SinrParams):
    """``(omh, wvec)``: ``omh[i, j] = 1 - h_{x_i}(x_j)`` (0 on the diagonal)
    and ``wvec[i] = W_{x_i}``."""
    p = p.resolve(net)
    D = net.cross_distances()
    r = np.diag(D).copy()
    h = h_func(D, r[:, None], p, net.pathloss)
    if _TAMPER_H:
        h = 1.0 - h
    omh = 1.0 - h
    np.fill_diagonal(omh, 0.0)
    return np.ascontiguousarray(omh), np.atleast_1d(w_func(r, p, net.pathloss))


def _marginal(K) -> SymmetricKernel:
    if isinstance(K, SymmetricKernel):
        K._require(Role.MARGINAL, "coverage")
        return K
    return SymmetricKernel.marginal(K)


def _check_size(K: SymmetricKernel, net: Network):
    if K.n != net.n:
        raise InvalidArgument(f"kernel is {K.n}x{K.n} but the network has {net.n} pairs")


def _det_one_minus(M: np.ndarray) -> float:
    if M.shape[0] == 0:
        return 1.0
    lam = np.linalg.eigvalsh(M)
    if lam[0] < -EIG_TOL or lam[-1] > 1 + EIG_TOL:
        raise InvalidKernel("scaled Palm kernel has eigenvalues outside [0, 1]")
    return float(np.prod(1.0 - np.clip(lam, 0.0, 1.0)))


def conditional_coverage(K, net: Network, i: int, p: SinrParams) -> float:
    """P(SINR_i > tau | x_i scheduled)."""
    K = _marginal(K)
    _check_size(K, net)
    i = _check_index(net, i)
    omh, wvec = link_factors(net, p)
    palm = palm_reduce(K, i)
    others = [j for j in range(net.n) if j != i]
    scaled = scale_kernel(palm, 1.0 - omh[i, others])
    return min(max(_det_one_minus(scaled.matrix) * wvec[i], 0.0), 1.0)


def coverage_prob(K, net: Network, i: int, p: SinrParams) -> float:
    """P(x_i scheduled and SINR_i > tau) = [K]_ii * conditional coverage."""
    K = _marginal(K)
    _check_size(K, net)
    i = _check_index(net, i)
    kii = K.matrix[i, i]
    if kii <= kernels.PALM_EPS:
        return 0.0
    return float(kii * conditional_coverage(K, net, i, p))


def coverage_matrix(K, net: Network, i: int, p: SinrParams) -> np.ndarray:
    """The n x n matrix whose determinant is the coverage probability of link i.

    Block ``I - K^!_i{h_i}`` on the other links, ``W_i [K]_ii`` at (i, i).
    """
    K = _marginal(K)
    _check_size(K, net)
    i = _check_index(net, i)
    n = net.n
    omh, wvec = link_factors(net, p)
    out = np.zeros((n, n))
    kii = K.matrix[i, i]
    out[i, i] = wvec[i] * kii
    others = np.array([j for j in range(n) if j != i], dtype=int)
    if others.size:
        if kii <= kernels.PALM_EPS:
            # Palm kernel undefined; the block is irrelevant because the
            # (i, i) entry is 0. Use the identity so the matrix stays regular.
            block = np.eye(others.size)
        else:
            col = K.matrix[others, i]
            palm = K.matrix[np.ix_(others, others)] - np.outer(col, col) / kii
            s = np.sqrt(omh[i, others])
            block = np.eye(others.size) - s[:, None] * palm * s[None, :]
        out[np.ix_(others, others)] = block
    return out


@dataclass(frozen=True, eq=False)
class CoverageReport:
    inclusion: np.ndarray
    conditional: np.ndarray
    coverage: np.ndarray
    throughput: np.ndarray

    @property
    def n(self) -> int:
        return self.inclusion.shape[0]

    def rows(self):
        for i in range(self.n):
            yield i, self.inclusion[i], self.conditional[i], self.coverage[i], self.throughput[i]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            write_coverage_csv(fh, self)


COVERAGE_HEADER = ["link", "inclusion", "conditional", "coverage", "throughput"]


def write_coverage_csv(fh, report: CoverageReport):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COVERAGE_HEADER)
    for i, inc, cond, cov, thr in report.rows():
        w.writerow([i, f"{inc:.12g}", f"{cond:.12g}", f"{cov:.12g}", f"{thr:.12g}"])


def coverage_report(K, net: Network, p: SinrParams, R0: float = 1.0) -> CoverageReport:
    """Coverage of every link at once (fast path through the hot kernels)."""
    if not R0 > 0:
        raise InvalidArgument("R0 must be positive")
    K = _marginal(K)
    _check_size(K, net)
    omh, wvec = link_factors(net, p)
    incl, cond = kernels.coverage_terms(np.ascontiguousarray(K.matrix), omh, wvec)
    cov = np.where(incl > kernels.PALM_EPS, incl * np.nan_to_num(cond, nan=0.0), 0.0)
    return CoverageReport(incl, cond, cov, R0 * cov)


# ----------------------------------------------------------------- rates


def throughput_constant(cov: float, R0: float) -> float:
    if not R0 > 0:
        raise InvalidArgument("R0 must be positive")
    if not -1e-12 <= cov <= 1 + 1e-12:
        raise InvalidArgument("coverage probability must lie in [0, 1]")
    return R0 * cov


@dataclass(frozen=True)
class ShannonRate:
    """``r(t) = C log(1 + t)`` with inverse ``exp(v / C) - 1``."""

    C: float = 1.0

    def __post_init__(self):
        if not self.C > 0:
            raise InvalidArgument("C must be positive")

    def __call__(self, t):
        return self.C * np.log1p(t)

    def inverse(self, v):
        return np.expm1(v / self.C)


V_CAP = 1e6
TAIL_FLOOR = 1e-10
TAU_CEIL = 1e300


def throughput_variable(
    K, net: Network, i: int, p: SinrParams, rate_fn=None, v_cap: float = V_CAP
) -> float:
    """Mean rate ``integral_0^inf P_i(r^-1(v)) dv`` for an invertible rate function."""
    rate_fn = ShannonRate() if rate_fn is None else rate_fn
    inverse = getattr(rate_fn, "inverse", None)
    if not callable(inverse):
        raise InvalidArgument("rate_fn must provide an inverse(v) method")
    K = _marginal(K)
    _check_size(K, net)
    i = _check_index(net, i)
    peak = float(K.matrix[i, i])  # coverage at tau = 0
    if peak <= kernels.PALM_EPS:
        return 0.0

    def integrand(v):
        with np.errstate(over="ignore"):
            tau = float(inverse(v))
        if tau <= 0:
            return peak
        # past this threshold every factor has reached its limit
        return coverage_prob(K, net, i, replace(p, tau=min(tau, TAU_CEIL)))

    floor = TAIL_FLOOR * peak
    v_max = 1.0
    while integrand(v_max) >= floor:
        v_max *= 2.0
        if v_max > v_cap:
            raise DivergingIntegral(
                f"coverage of link {i} stays above {floor:.3g} up to rate {v_cap:g}"
            )
    value, _ = integrate.quad(integrand, 0.0, v_max, epsrel=1e-8, epsabs=0.0, limit=500)
    return float(value)


class GCase(enum.Enum):
    SEPARATE = "separate"
    ROUND_ROBIN = "round_robin"
    OPPORTUNISTIC = "opportunistic"


def cardinality_rate(peak: float, g_case, m: int) -> float:
    """Rate of an active node when ``m`` nodes transmit: ``peak * g(m)``."""
    g_case = GCase(g_case)
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise InvalidArgument("cardinality m must be >= 1")
    if not peak > 0:
        raise InvalidArgument("peak rate must be positive")
    m = int(m)
    if g_case is GCase.SEPARATE:
        g = 1.0
    elif g_case is GCase.ROUND_ROBIN:
        g = 1.0 / m
    else:
        g = math.fsum(1.0 / k for k in range(1, m + 1)) / m
    return peak * g

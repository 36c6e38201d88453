"""Proportionally fair scheduling: log-utility evaluation and maximization.

Three scheduler families are supported. Each lowers to a marginal kernel:

* ``FixedAloha(p)``: ``diag(p, ..., p)``
* ``AdaptiveAloha(p)``: ``diag(p_1, ..., p_n)``
* ``LEnsemble(S, q)``: ``L (L + I)^-1`` with ``L = diag(q) S diag(q)``

The L-ensemble optimizer works in log-quality coordinates ``w = log q`` on a
box, using central finite-difference gradients.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .coverage import SinrParams, coverage_matrix, coverage_report, link_factors
from .dpp import (
    QualityVector,
    Role,
    SymmetricKernel,
    build_L,
    marginal_from_L,
)
from .errors import InfeasibleStart, InvalidArgument
from .geometry import Network, _check_index

MAX_OPT_PAIRS = 32


@dataclass(frozen=True)
class FixedAloha:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidArgument("access probability must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class AdaptiveAloha:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise InvalidArgument("access probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True, eq=False)
class LEnsemble:
    S: SymmetricKernel
    q: QualityVector

    def __post_init__(self):
        if not isinstance(self.q, QualityVector):
            object.__setattr__(self, "q", QualityVector(self.q))
        self.S._require(Role.SIMILARITY, "LEnsemble")
        if self.q.n != self.S.n:
            raise InvalidArgument("quality and similarity sizes differ")


SchedulerSpec = Union[FixedAloha, AdaptiveAloha, LEnsemble]


def lower(spec: SchedulerSpec, n: int) -> SymmetricKernel:
    """Marginal kernel of a scheduler on ``n`` nodes."""
    if isinstance(spec, FixedAloha):
        return SymmetricKernel.marginal(np.diag(np.full(n, spec.p)))
    if isinstance(spec, AdaptiveAloha):
        if spec.p.shape[0] != n:
            raise InvalidArgument("access-probability vector has the wrong length")
        return SymmetricKernel.marginal(np.diag(spec.p))
    if isinstance(spec, LEnsemble):
        if spec.S.n != n:
            raise InvalidArgument("L-ensemble size does not match the network")
        return marginal_from_L(build_L(spec.S, spec.q))
    raise InvalidArgument(f"unknown scheduler spec {spec!r}")


def aloha_quality(p) -> QualityVector:
    """Quality vector ``q = sqrt(p / (1 - p))`` giving ``LEnsemble(I, q) == AdaptiveAloha(p)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p >= 1):
        raise InvalidArgument("p = 1 has no finite quality")
    return QualityVector(np.sqrt(p / (1.0 - p)))


def identity_similarity(n: int) -> SymmetricKernel:
    return SymmetricKernel.similarity(np.eye(n))


def _utility_from_report(report, R0: float) -> float:
    thr = report.throughput
    if np.any(thr <= 0):
        return -math.inf
    return float(np.sum(np.log(thr)))


def utility(spec: SchedulerSpec, net: Network, p: SinrParams, R0: float = 1.0) -> float:
    """Proportional-fair utility ``sum_i log(R0 * P_i(tau))`` (``-inf`` if any link starves)."""
    K = lower(spec, net.n)
    return _utility_from_report(coverage_report(K, net, p, R0), R0)


def utility_eigen(spec: SchedulerSpec, net: Network, p: SinrParams, R0: float = 1.0) -> float:
    """Same utility summed over log-eigenvalues of the per-link coverage matrices."""
    if not R0 > 0:
        raise InvalidArgument("R0 must be positive")
    K = lower(spec, net.n)
    total = net.n * math.log(R0)
    for i in range(net.n):
        if K.matrix[i, i] <= kernels.PALM_EPS:
            return -math.inf
        lam = np.linalg.eigvalsh(coverage_matrix(K, net, i, p))
        if lam[0] <= 0:
            return -math.inf
        total += float(np.sum(np.log(lam)))
    return total


# ---------------------------------------------------------------- optimizers


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 2000
    gradient_step: float = 1e-6
    initial_step: float = 0.1
    utility_tolerance: float = 1e-9
    w_bounds: tuple = (-20.0, 20.0)
    # "bfgs" preconditions the ascent direction; "gradient" is plain steepest ascent.
    method: str = "bfgs"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be >= 1")
        for name in ("gradient_step", "initial_step", "utility_tolerance"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        lo, hi = self.w_bounds
        if not lo < hi:
            raise InvalidArgument("w_bounds must satisfy w_min < w_max")
        if self.method not in ("bfgs", "gradient"):
            raise InvalidArgument("method must be 'bfgs' or 'gradient'")
        object.__setattr__(self, "w_bounds", (float(lo), float(hi)))


@dataclass
class TraceRow:
    iteration: int
    utility: float
    step_size: float
    grad_norm: float
    active_bounds: int


@dataclass
class LEnsembleOptimum:
    q: QualityVector
    utility: float
    bound_active: np.ndarray
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def w(self) -> np.ndarray:
        return self.q.log()

    def __iter__(self):
        yield self.q
        yield self.utility


@dataclass
class AlohaOptimum:
    p: Union[float, np.ndarray]
    utility: float
    iterations: int = 0
    bound_active: Optional[np.ndarray] = None
    trace: list = field(default_factory=list)

    def __iter__(self):
        yield self.p
        yield self.utility


class LogQualityObjective:
    """``U_S(exp(w))`` for a fixed network, similarity matrix and SINR model."""

    def __init__(self, net: Network, S: SymmetricKernel, p: SinrParams, R0: float = 1.0):
        if not R0 > 0:
            raise InvalidArgument("R0 must be positive")
        S._require(Role.SIMILARITY, "objective")
        if S.n != net.n:
            raise InvalidArgument("similarity size does not match the network")
        self.n = net.n
        self.S = np.ascontiguousarray(S.matrix)
        self.omh, self.wvec = link_factors(net, p)
        self.log_r0 = math.log(R0)

    def __call__(self, w) -> float:
        w = np.ascontiguousarray(w, dtype=float)
        return float(kernels.utility_log_quality(w, self.S, self.omh, self.wvec, self.log_r0))

    def gradient(self, w, step: float = 1e-6) -> np.ndarray:
        w = np.ascontiguousarray(w, dtype=float)
        return kernels.fd_gradient(w, self.S, self.omh, self.wvec, self.log_r0, step)


def _check_opt_size(net: Network):
    if net.n > MAX_OPT_PAIRS:
        raise InvalidArgument(f"optimization is capped at {MAX_OPT_PAIRS} pairs")


def ascend(
    objective: Callable,
    gradient: Callable,
    w0: np.ndarray,
    settings: OptimizerSettings,
    record_trace: bool = False,
):
    """Projected ascent with halving line search on the box ``settings.w_bounds``.

    Returns ``(w_best, U_best, iterations, converged, trace)``. The search
    direction is the gradient, optionally preconditioned by a BFGS estimate
    of the inverse negative Hessian; the first step size that increases the
    objective is accepted.
    """
    lo, hi = settings.w_bounds
    w = np.clip(np.asarray(w0, dtype=float), lo, hi)
    n = w.shape[0]
    u = objective(w)
    g = gradient(w)
    H = np.eye(n)
    step0 = settings.initial_step
    trace = []
    converged = False
    it = 0
    for it in range(1, settings.max_iterations + 1):
        # coordinates pinned at a bound with the gradient pushing outward
        pinned = ((w <= lo) & (g < 0)) | ((w >= hi) & (g > 0))
        gp = np.where(pinned, 0.0, g)
        if not np.all(np.isfinite(gp)):
            break
        if settings.method == "bfgs":
            d = H @ gp
            d[pinned] = 0.0
            if not d @ gp > 0:
                H = np.eye(n)
                d = gp
            t = 1.0 if d is not gp else step0
        else:
            d = gp
            t = step0
        if not np.any(d):
            converged = True
            break
        # the BFGS direction carries its own scale; cap the first trial step
        dmax = np.max(np.abs(d))
        if dmax * t > 2.0:
            t = 2.0 / dmax
        accepted = False
        while t >= 1e-12:
            w_new = np.clip(w + t * d, lo, hi)
            u_new = objective(w_new)
            if u_new > u:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if settings.method == "bfgs" and not np.allclose(H, np.eye(n)):
                H = np.eye(n)
                continue
            converged = True
            break
        g_new = gradient(w_new)
        s = w_new - w
        y = g - g_new  # gradient of -U changes by -(g_new - g)
        du = u_new - u
        w, u = w_new, u_new
        if settings.method == "bfgs":
            sy = s @ y
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y) and np.all(np.isfinite(g_new)):
                rho = 1.0 / sy
                V = np.eye(n) - rho * np.outer(s, y)
                H = V @ H @ V.T + rho * np.outer(s, s)
        else:
            step0 = min(2.0 * t, 1e3)
        g = g_new
        if record_trace:
            active = int(np.sum((w <= lo) | (w >= hi)))
            trace.append(TraceRow(it, u, t, float(np.linalg.norm(gp)), active))
        if abs(du) < settings.utility_tolerance:
            converged = True
            break
    w, u = _probe_bounds(objective, w, u, g, lo, hi)
    return w, u, it, converged, trace


def _probe_bounds(objective, w, u, g, lo, hi):
    # A tiny gradient that still points at a bound means the optimum lies on
    # the bound (e.g. a lone link wants p -> 1); jump there if U does not drop.
    target = np.where(g > 0, hi, np.where(g < 0, lo, w))
    for cand in [target] + [np.where(np.arange(w.size) == k, target, w) for k in range(w.size)]:
        if np.array_equal(cand, w) or not np.all(np.isfinite(g)):
            continue
        u_new = objective(cand)
        if u_new >= u:
            return cand, u_new
    return w, u


def optimize_lensemble(
    net: Network,
    S: SymmetricKernel,
    p: SinrParams,
    R0: float = 1.0,
    settings: Optional[OptimizerSettings] = None,
    w0=None,
    record_trace: bool = False,
) -> LEnsembleOptimum:
    """Maximize ``U_S(exp(w))`` over ``w`` in the box; starts at ``w = 0`` unless
    ``w0`` is given."""
    settings = settings or OptimizerSettings()
    _check_opt_size(net)
    obj = LogQualityObjective(net, S, p, R0)
    lo, hi = settings.w_bounds
    w = np.zeros(net.n) if w0 is None else np.clip(np.asarray(w0, dtype=float), lo, hi)
    if obj(w) == -math.inf:
        w = np.zeros(net.n)
        if obj(w) == -math.inf:
            raise InfeasibleStart("utility is -inf at w = 0; some link can never be covered")
    w, u, its, conv, trace = ascend(
        obj, lambda x: obj.gradient(x, settings.gradient_step), w, settings, record_trace
    )
    bound_active = (w <= lo) | (w >= hi)
    return LEnsembleOptimum(QualityVector.from_log(w), u, bound_active, its, conv, trace)


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LOG_P_MIN = -40.0


def optimize_fixed_aloha(
    net: Network, p: SinrParams, R0: float = 1.0, settings: Optional[OptimizerSettings] = None
) -> AlohaOptimum:
    """Best common access probability, by golden-section search over ``log p``.

    The fixed-Aloha utility is concave in ``log p``, so the search is exact
    up to the bracket tolerance (``|dp| < 1e-9``).
    """
    _check_opt_size(net)
    obj = LogQualityObjective(net, identity_similarity(net.n), p, R0)

    def u_of(t):
        pp = math.exp(t)
        # diagonal kernel: evaluate through the coverage kernel directly
        return _fixed_utility(obj, pp)

    a, b = LOG_P_MIN, 0.0
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = u_of(c), u_of(d)
    its = 0
    while math.exp(b) - math.exp(a) >= 1e-9 and its < 10_000:
        its += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = u_of(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = u_of(d)
    t = 0.5 * (a + b)
    best_p, best_u = math.exp(t), u_of(t)
    u1 = u_of(0.0)
    if u1 >= best_u:
        best_p, best_u = 1.0, u1
    if best_u == -math.inf:
        raise InfeasibleStart("utility is -inf for every access probability")
    return AlohaOptimum(best_p, best_u, its)


def _fixed_utility(obj: LogQualityObjective, pp: float) -> float:
    K = np.diag(np.full(obj.n, pp))
    incl, cond = kernels.coverage_terms(K, obj.omh, obj.wvec)
    if not (np.all(incl > kernels.PALM_EPS) and np.all(cond > 0)):
        return -math.inf
    return float(obj.n * obj.log_r0 + np.sum(np.log(incl)) + np.sum(np.log(cond)))


def optimize_adaptive_aloha(
    net: Network,
    p: SinrParams,
    R0: float = 1.0,
    settings: Optional[OptimizerSettings] = None,
    record_trace: bool = False,
) -> AlohaOptimum:
    """Per-link access probabilities maximizing the utility.

    Runs the L-ensemble optimizer with ``S = I`` from the better of ``w = 0``
    and the fixed-Aloha optimum, so the result never falls below fixed Aloha.
    """
    settings = settings or OptimizerSettings()
    fixed = optimize_fixed_aloha(net, p, R0, settings)
    S = identity_similarity(net.n)
    obj = LogQualityObjective(net, S, p, R0)
    lo, hi = settings.w_bounds
    if fixed.p < 1.0:
        w_fixed = np.full(net.n, 0.5 * math.log(fixed.p / (1.0 - fixed.p)))
    else:
        w_fixed = np.full(net.n, hi)
    w_fixed = np.clip(w_fixed, lo, hi)
    w0 = w_fixed if obj(w_fixed) > obj(np.zeros(net.n)) else None
    res = optimize_lensemble(net, S, p, R0, settings, w0=w0, record_trace=record_trace)
    q2 = res.q.q**2
    p_star = np.where(np.isinf(q2), 1.0, q2 / (1.0 + q2))
    return AlohaOptimum(p_star, res.utility, res.iterations, res.bound_active, res.trace)


def write_trace_csv(fh, trace):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["iteration", "utility", "step_size", "grad_norm", "active_bounds"])
    for row in trace:
        w.writerow(
            [row.iteration, repr(row.utility), repr(row.step_size), repr(row.grad_norm), row.active_bounds]
        )


def aloha_gradient(net: Network, p: SinrParams, w, R0: float = 1.0) -> np.ndarray:
    """Closed-form gradient of the adaptive-Aloha utility in ``w = log q``.

    With ``p_j = sigmoid(2 w_j)`` and ``a_ij = 1 - h_{x_i}(x_j)``::

        dU/dw_j = 2 p_j (1 - p_j) (1 / p_j - sum_{i != j} a_ij / (1 - p_j a_ij))

    Serves as the reference for :func:`gradient_check`.
    """
    omh, _ = link_factors(net, p)
    w = np.asarray(w, dtype=float)
    pj = 0.5 * (1.0 + np.tanh(w))
    a = omh  # a[i, j], zero on the diagonal
    inner = 1.0 / pj - np.sum(a / (1.0 - pj[None, :] * a), axis=0)
    return 2.0 * pj * (1.0 - pj) * inner


def gradient_check(
    grad_fn: Callable,
    objective: Callable,
    points,
    step: float = 1e-6,
) -> float:
    """Largest relative error between ``grad_fn`` and central differences of
    ``objective`` over ``points``."""
    worst = 0.0
    for w in points:
        w = np.asarray(w, dtype=float)
        fd = np.empty_like(w)
        for k in range(w.shape[0]):
            e = np.zeros_like(w)
            e[k] = step
            fd[k] = (objective(w + e) - objective(w - e)) / (2 * step)
        g = np.asarray(grad_fn(w))
        err = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(err))
    return worst


# ------------------------------------------------------------------ features


def _receiver_distance(net: Network, i: int) -> float:
    d = np.hypot(*(net.receivers - net.transmitters[i]).T)
    d = np.delete(d, i)
    return float(d.min())


def _transmitter_distance(net: Network, i: int) -> float:
    d = np.hypot(*(net.transmitters - net.transmitters[i]).T)
    d = np.delete(d, i)
    return float(d.min())


DISTANCE_FEATURES = {
    "receiver": _receiver_distance,
    "transmitter": _transmitter_distance,
}


def extract_features(net: Network, i: int, kind: str = "receiver") -> np.ndarray:
    """Feature vector ``(1, min_{j != i} |x_i - y_j|)`` of node ``i``.

    ``kind="transmitter"`` measures to the other transmitters instead. With a
    single pair the distance is replaced by the window diagonal (or
    ``sqrt(2)`` for a network without a recorded window).
    """
    i = _check_index(net, i)
    if kind not in DISTANCE_FEATURES:
        raise InvalidArgument(f"unknown feature kind {kind!r}")
    if net.n == 1:
        side = net.window if net.window is not None else 1.0
        return np.array([1.0, side * math.sqrt(2.0)])
    return np.array([1.0, DISTANCE_FEATURES[kind](net, i)])


@dataclass(frozen=True, eq=False)
class FeatureModel:
    theta: np.ndarray
    feature_fn: str = "receiver"

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size < 1 or not np.all(np.isfinite(theta)):
            raise InvalidArgument("theta must be a nonempty finite vector")
        if self.feature_fn not in DISTANCE_FEATURES:
            raise InvalidArgument(f"unknown feature extractor {self.feature_fn!r}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def features(self, net: Network) -> np.ndarray:
        return np.vstack([extract_features(net, i, self.feature_fn) for i in range(net.n)])


def quality_from_features(model: FeatureModel, net: Network, features=None) -> QualityVector:
    """``q_i = exp(theta . f_i)``; ``features`` overrides the model's extractor."""
    F = model.features(net) if features is None else np.atleast_2d(np.asarray(features, float))
    if F.shape[1] != model.theta.shape[0]:
        raise InvalidArgument(
            f"feature dimension {F.shape[1]} does not match theta ({model.theta.shape[0]})"
        )
    return QualityVector.from_log(F @ model.theta)

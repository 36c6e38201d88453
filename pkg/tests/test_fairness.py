import io
import itertools
import math

import numpy as np
import pytest

from detsched.coverage import SinrParams, coverage_prob, w_func
from detsched.dpp import QualityVector, SymmetricKernel, gaussian_similarity
from detsched.errors import InfeasibleStart, InvalidArgument
from detsched.fairness import (
    AdaptiveAloha,
    FeatureModel,
    FixedAloha,
    LEnsemble,
    LogQualityObjective,
    OptimizerSettings,
    aloha_gradient,
    aloha_quality,
    extract_features,
    gradient_check,
    identity_similarity,
    lower,
    optimize_adaptive_aloha,
    optimize_fixed_aloha,
    optimize_lensemble,
    quality_from_features,
    utility,
    utility_eigen,
    write_trace_csv,
)
from detsched.geometry import Network, PathLossModel, generate_network

from conftest import two_point_net

BOUND = PathLossModel.bounded(4.0)
P10 = SinrParams(10.0)


def seeded(n, seed, noise=0.0):
    return generate_network(n, 1.0, 0.1, BOUND, noise, seed=seed)


def single(noise=0.0):
    return Network(np.array([[0.5, 0.5]]), np.array([[0.55, 0.5]]), BOUND, noise)


# ------------------------------------------------------------------ utility


def test_utility_nobody_transmits(net5):
    assert utility(FixedAloha(0.0), net5, P10) == -math.inf
    assert utility_eigen(FixedAloha(0.0), net5, P10) == -math.inf


@pytest.mark.parametrize("pp", [0.1, 0.5, 1.0])
def test_utility_single_link(pp):
    R0 = 3.0
    assert utility(FixedAloha(pp), single(), P10, R0) == pytest.approx(math.log(R0 * pp), abs=1e-14)


def test_utility_eigen_single_link_with_noise():
    net = single(noise=0.05)
    w = w_func(net.link_lengths()[0], P10.resolve(net), BOUND)
    assert utility_eigen(FixedAloha(0.3), net, P10) == pytest.approx(math.log(0.3) + math.log(w), abs=1e-12)


def test_utility_matches_coverage(net5):
    spec = AdaptiveAloha([0.2, 0.4, 0.6, 0.3, 0.5])
    K = lower(spec, 5)
    expected = sum(math.log(2.0 * coverage_prob(K, net5, i, P10)) for i in range(5))
    assert utility(spec, net5, P10, 2.0) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("seed", range(8))
def test_utility_paths_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    net = seeded(n, seed, noise=float(rng.choice([0.0, 1e-3])))
    S = gaussian_similarity(net, float(rng.uniform(0.05, 1.0)))
    specs = [
        FixedAloha(float(rng.uniform(0.05, 0.95))),
        AdaptiveAloha(rng.uniform(0.05, 0.95, n)),
        LEnsemble(S, QualityVector(np.exp(rng.normal(size=n)))),
    ]
    for spec in specs:
        u1, u2 = utility(spec, net, P10), utility_eigen(spec, net, P10)
        assert math.isfinite(u1)
        assert abs(u1 - u2) < 1e-8


def test_utility_paths_zero_inclusion(net5):
    spec = AdaptiveAloha([0.5, 0.0, 0.5, 0.5, 0.5])
    assert utility(spec, net5, P10) == -math.inf
    assert utility_eigen(spec, net5, P10) == -math.inf


def test_utility_bad_r0(net5):
    with pytest.raises(InvalidArgument):
        utility_eigen(FixedAloha(0.5), net5, P10, 0.0)


# ---------------------------------------------------------------- nesting


def test_nesting_kernels_identical(rng):
    for n in (1, 3, 7):
        pp = rng.uniform(0.0, 0.99, n)
        a = lower(AdaptiveAloha(pp), n).matrix
        b = lower(LEnsemble(identity_similarity(n), aloha_quality(pp)), n).matrix
        assert np.max(np.abs(a - b)) < 1e-12


def test_fixed_lowers_to_scaled_identity():
    assert np.array_equal(lower(FixedAloha(0.25), 3).matrix, 0.25 * np.eye(3))


def test_aloha_quality_rejects_one():
    with pytest.raises(InvalidArgument):
        aloha_quality([0.5, 1.0])


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        FixedAloha(1.5)
    with pytest.raises(InvalidArgument):
        AdaptiveAloha([0.2, -0.1])
    with pytest.raises(InvalidArgument):
        LEnsemble(identity_similarity(2), QualityVector([1.0, 1.0, 1.0]))
    with pytest.raises(InvalidArgument):
        lower(AdaptiveAloha([0.5, 0.5]), 3)


# ---------------------------------------------------------------- fixed Aloha


def test_fixed_single_link_full_access():
    res = optimize_fixed_aloha(single(), P10)
    assert res.p == 1.0
    assert res.utility == pytest.approx(0.0, abs=1e-12)


def test_fixed_symmetric_label_invariance():
    net = two_point_net([0.3, 0.5], [0.35, 0.5], [0.7, 0.5], [0.65, 0.5], BOUND)
    swapped = net.permuted([1, 0])
    a, b = optimize_fixed_aloha(net, P10), optimize_fixed_aloha(swapped, P10)
    assert a.p == b.p
    assert a.utility == b.utility


def test_fixed_matches_grid_scan(net5):
    res = optimize_fixed_aloha(net5, P10)
    grid = np.arange(1, 10001) * 1e-4
    values = [utility(FixedAloha(float(g)), net5, P10) for g in grid]
    best = grid[int(np.argmax(values))]
    assert abs(res.p - best) < 1e-3
    assert res.utility >= max(values) - 1e-12


# ------------------------------------------------------------- adaptive Aloha


def test_adaptive_single_link_full_access():
    res = optimize_adaptive_aloha(single(), P10)
    assert np.array_equal(res.p, [1.0])
    assert res.bound_active.all()


@pytest.mark.parametrize("seed", range(5))
def test_adaptive_dominates_fixed(seed):
    net = seeded(int(3 + seed % 4), 100 + seed)
    fixed = optimize_fixed_aloha(net, P10)
    adapt = optimize_adaptive_aloha(net, P10)
    assert fixed.utility <= adapt.utility + 1e-9


def test_adaptive_matches_grid_scan():
    net = seeded(3, 5)
    res = optimize_adaptive_aloha(net, P10)
    obj = LogQualityObjective(net, identity_similarity(3), P10)
    grid = (np.arange(50) + 0.5) / 50
    best = -math.inf
    for c in itertools.product(grid, repeat=3):
        pp = np.array(c)
        best = max(best, obj(0.5 * np.log(pp / (1 - pp))))
    assert res.utility >= best - 1e-12
    assert res.utility - best < 1e-3


# ---------------------------------------------------------------- L-ensemble


@pytest.mark.parametrize("seed", range(3))
def test_lensemble_identity_matches_adaptive(seed):
    net = seeded(5, 200 + seed)
    a = optimize_adaptive_aloha(net, P10)
    b = optimize_lensemble(net, identity_similarity(5), P10)
    assert abs(a.utility - b.utility) < 1e-6


def test_lensemble_single_link_bound_active():
    res = optimize_lensemble(single(), SymmetricKernel.similarity([[1.0]]), P10)
    assert res.bound_active.all()
    assert res.w[0] == 20.0
    # p = e^40 / (1 + e^40): utility is log p up to the box truncation
    assert res.utility == pytest.approx(0.0, abs=1e-15)
    q, u = res
    assert u == res.utility and q is res.q


def test_lensemble_stationary(net5):
    S = gaussian_similarity(net5, 10.0)
    res = optimize_lensemble(net5, S, P10)
    assert res.converged
    obj = LogQualityObjective(net5, S, P10)
    g = obj.gradient(res.w)
    interior = ~res.bound_active
    assert interior.any()
    assert np.max(np.abs(g[interior])) < 1e-4


def test_lensemble_gradient_method_agrees(net5):
    S = gaussian_similarity(net5, 10.0)
    a = optimize_lensemble(net5, S, P10)
    b = optimize_lensemble(net5, S, P10, settings=OptimizerSettings(method="gradient"))
    assert abs(a.utility - b.utility) < 1e-5


def test_lensemble_label_invariance(net5):
    perm = [3, 0, 4, 1, 2]
    S = gaussian_similarity(net5, 10.0)
    net_p = net5.permuted(perm)
    a = optimize_lensemble(net5, S, P10)
    b = optimize_lensemble(net_p, gaussian_similarity(net_p, 10.0), P10)
    assert abs(a.utility - b.utility) < 1e-9
    assert np.allclose(a.q.q[perm], b.q.q, rtol=1e-4)


def test_lensemble_sigma_limit(net5):
    a = optimize_adaptive_aloha(net5, P10)
    b = optimize_lensemble(net5, gaussian_similarity(net5, 1e-6), P10)
    assert abs(a.utility - b.utility) < 1e-4


def test_lensemble_determinantal_beats_adaptive(net5):
    a = optimize_adaptive_aloha(net5, P10)
    b = optimize_lensemble(net5, gaussian_similarity(net5, 10.0), P10)
    assert b.utility >= a.utility - 1e-6


def test_lensemble_infeasible_start():
    # noise so large that every noise factor underflows to zero
    net = seeded(3, 7, noise=1e4)
    with pytest.raises(InfeasibleStart):
        optimize_lensemble(net, identity_similarity(3), P10)
    with pytest.raises(InfeasibleStart):
        optimize_fixed_aloha(net, P10)
    with pytest.raises(InfeasibleStart):
        optimize_adaptive_aloha(net, P10)


def test_lensemble_reinitializes_bad_start(net5):
    S = identity_similarity(5)
    w0 = np.array([-20.0, 0.0, 0.0, 0.0, 0.0])
    res = optimize_lensemble(net5, S, P10, w0=w0)
    ref = optimize_lensemble(net5, S, P10)
    assert abs(res.utility - ref.utility) < 1e-6


def test_lensemble_size_cap():
    with pytest.raises(InvalidArgument):
        optimize_lensemble(seeded(33, 0), identity_similarity(33), P10)


def test_trace_csv(net5):
    res = optimize_lensemble(net5, gaussian_similarity(net5, 10.0), P10, record_trace=True)
    buf = io.StringIO()
    write_trace_csv(buf, res.trace)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,utility,step_size,grad_norm,active_bounds"
    assert len(lines) == len(res.trace) + 1
    us = [row.utility for row in res.trace]
    assert all(b > a for a, b in zip(us, us[1:]))


def test_settings_validation():
    with pytest.raises(InvalidArgument):
        OptimizerSettings(w_bounds=(1.0, -1.0))
    with pytest.raises(InvalidArgument):
        OptimizerSettings(gradient_step=0.0)
    with pytest.raises(InvalidArgument):
        OptimizerSettings(method="newton")


# ---------------------------------------------------------------- concavity


def midpoint_slack(obj, wa, wb):
    return obj(0.5 * (wa + wb)) - 0.5 * (obj(wa) + obj(wb))


def test_concavity_counterexample():
    # Two Aloha links that strongly interfere. Along the diagonal, once both
    # access probabilities approach 1, each link's log coverage flattens out
    # at log h, so the utility is convex there.
    net = two_point_net([0.3, 0.5], [0.35, 0.5], [0.4, 0.5], [0.45, 0.5], BOUND)
    obj = LogQualityObjective(net, identity_similarity(2), P10)
    slack = midpoint_slack(obj, np.full(2, 1.0), np.full(2, 5.0))
    assert slack < -1e-3


def test_concave_without_interference():
    # far-apart links: U is a sum of log-sigmoids, which is concave
    net = two_point_net([0.0, 0.0], [0.01, 0.0], [1e6, 0.0], [1e6 + 0.01, 0.0], BOUND)
    obj = LogQualityObjective(net, identity_similarity(2), P10)
    rng = np.random.default_rng(3)
    for _ in range(100):
        wa, wb = rng.uniform(-3, 3, (2, 2))
        assert midpoint_slack(obj, wa, wb) >= -1e-9


# ---------------------------------------------------------------- gradients


def test_aloha_gradient_check(net5):
    obj = LogQualityObjective(net5, identity_similarity(5), P10)
    rng = np.random.default_rng(11)
    points = rng.uniform(-2, 2, (10, 5))
    err = gradient_check(lambda w: aloha_gradient(net5, P10, w), obj, points)
    assert err < 1e-3


def test_fd_gradient_matches_closed_form(net5):
    obj = LogQualityObjective(net5, identity_similarity(5), P10)
    w = np.linspace(-1, 1, 5)
    assert np.allclose(obj.gradient(w), aloha_gradient(net5, P10, w), rtol=1e-5, atol=1e-7)


# ---------------------------------------------------------------- features


def test_features_single_candidate():
    net = two_point_net([0.0, 0.0], [0.1, 0.0], [2.0, 2.0], [3.0, 4.0], BOUND)
    assert np.allclose(extract_features(net, 0), [1.0, 5.0])


def test_features_transmitter_kind():
    net = two_point_net([0.0, 0.0], [0.1, 0.0], [3.0, 4.0], [3.1, 4.0], BOUND)
    assert np.allclose(extract_features(net, 1, "transmitter"), [1.0, 5.0])
    with pytest.raises(InvalidArgument):
        extract_features(net, 0, "nearest")


def test_features_equivariant(net5):
    perm = [2, 4, 0, 1, 3]
    F = np.vstack([extract_features(net5, i) for i in range(5)])
    Fp = np.vstack([extract_features(net5.permuted(perm), i) for i in range(5)])
    assert np.array_equal(F[perm], Fp)


def test_features_single_pair_sentinel():
    net = generate_network(1, 2.0, 0.1, BOUND, seed=0)
    assert np.allclose(extract_features(net, 0), [1.0, 2.0 * math.sqrt(2.0)])


def test_quality_theta_zero(net5):
    assert np.array_equal(quality_from_features(FeatureModel([0.0, 0.0]), net5).q, np.ones(5))


def test_quality_constant_feature(net5):
    q = quality_from_features(FeatureModel([0.7, 0.0]), net5).q
    assert np.allclose(q, math.exp(0.7), rtol=1e-15)


def test_quality_two_feature_model(net5):
    theta = np.array([0.4, -3.0])
    q = quality_from_features(FeatureModel(theta), net5).q
    x, y = net5.transmitters, net5.receivers
    for i in range(5):
        d = min(math.dist(x[i], y[j]) for j in range(5) if j != i)
        assert q[i] == pytest.approx(math.exp(theta[0] + theta[1] * d), rel=1e-13)


def test_quality_dimension_mismatch(net5):
    with pytest.raises(InvalidArgument):
        quality_from_features(FeatureModel([1.0, 2.0, 3.0]), net5)
    with pytest.raises(InvalidArgument):
        FeatureModel([math.nan])

"""Experiment drivers behind the ``compare`` and ``verify`` commands."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .coverage import coverage_matrix, coverage_prob, coverage_report, write_coverage_csv, CoverageReport
from .dpp import build_L, gaussian_similarity
from .errors import InfeasibleStart
from .fairness import (
    AdaptiveAloha,
    FixedAloha,
    LEnsemble,
    aloha_quality,
    identity_similarity,
    lower,
    optimize_adaptive_aloha,
    optimize_fixed_aloha,
    optimize_lensemble,
)
from .formats import save_network
from .geometry import Network, generate_network
from .oracle import enumerate_coverage, mc_coverage_all, write_oracle_csv

log = logging.getLogger(__name__)

PER_REALIZATION_HEADER = [
    "realization",
    "seed",
    "scheduler",
    "link",
    "inclusion",
    "conditional",
    "coverage",
    "throughput",
    "utility",
    "status",
]
AGGREGATE_HEADER = ["scheduler", "link", "coverage_mean", "coverage_se", "utility_mean", "utility_se"]


def realization_network(cfg: ExperimentConfig, r: int) -> Network:
    return generate_network(
        cfg.n_pairs, cfg.window, cfg.r_max, cfg.pathloss, cfg.noise, seed=cfg.seed + r
    )


@dataclass
class SchedulerRun:
    scheduler: str
    status: str
    utility: float
    report: CoverageReport = None
    spec: object = None


def optimize_scheduler(name: str, net: Network, cfg: ExperimentConfig) -> SchedulerRun:
    p = cfg.sinr
    try:
        if name == "fixed":
            res = optimize_fixed_aloha(net, p, cfg.R0, cfg.optimizer)
            spec = FixedAloha(res.p)
        elif name == "adaptive":
            res = optimize_adaptive_aloha(net, p, cfg.R0, cfg.optimizer)
            spec = AdaptiveAloha(res.p)
        else:
            S = gaussian_similarity(net, cfg.sigma)
            res = optimize_lensemble(net, S, p, cfg.R0, cfg.optimizer)
            spec = LEnsemble(S, res.q)
    except InfeasibleStart as exc:
        log.warning("realization infeasible for %s: %s", name, exc)
        return SchedulerRun(name, "infeasible", -math.inf)
    K = lower(spec, net.n)
    rep = coverage_report(K, net, p, cfg.R0)
    # coverage as the determinant of the extended per-link matrix
    cov = np.array([np.linalg.det(coverage_matrix(K, net, i, p)) for i in range(net.n)])
    rep = CoverageReport(rep.inclusion, rep.conditional, cov, cfg.R0 * cov)
    return SchedulerRun(name, "ok", res.utility, rep, spec)


def run_realization(cfg: ExperimentConfig, r: int):
    net = realization_network(cfg, r)
    return net, [optimize_scheduler(name, net, cfg) for name in cfg.schedulers]


def _se(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def _mean(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.mean(values)) if values.size else math.nan


def aggregate_rows(rows, schedulers, n_pairs):
    """Aggregate per-realization rows (dicts with float fields) into
    ``(scheduler, link, cov_mean, cov_se, u_mean, u_se)`` tuples.

    Only rows with status ``ok`` contribute.
    """
    out = []
    for name in schedulers:
        ok = [r for r in rows if r["scheduler"] == name and r["status"] == "ok"]
        utilities = {}
        for r in ok:
            utilities[r["realization"]] = r["utility"]
        u = [utilities[k] for k in sorted(utilities)]
        for link in range(n_pairs):
            cov = [r["coverage"] for r in ok if r["link"] == link]
            out.append((name, link, _mean(cov), _se(cov), _mean(u), _se(u)))
    return out


def _fmt(x: float) -> str:
    return f"{x:.12g}"


@dataclass
class CompareResult:
    rows: list = field(default_factory=list)
    aggregate: list = field(default_factory=list)
    warnings: int = 0


def run_compare(cfg: ExperimentConfig, out_dir=None) -> CompareResult:
    out_dir = out_dir or cfg.output_dir
    os.makedirs(os.path.join(out_dir, "reports"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "networks"), exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        fh.write(cfg.dumps())
    result = CompareResult()
    for r in range(cfg.realizations):
        net, runs = run_realization(cfg, r)
        save_network(net, os.path.join(out_dir, "networks", f"r{r:04d}.json"))
        for run in runs:
            if run.status != "ok":
                result.warnings += 1
                for link in range(net.n):
                    result.rows.append(
                        dict(realization=r, seed=cfg.seed + r, scheduler=run.scheduler, link=link,
                             inclusion=math.nan, conditional=math.nan, coverage=math.nan,
                             throughput=math.nan, utility=run.utility, status=run.status)
                    )
                continue
            path = os.path.join(out_dir, "reports", f"r{r:04d}_{run.scheduler}.csv")
            with open(path, "w", newline="") as fh:
                write_coverage_csv(fh, run.report)
            for link, inc, cond, cov, thr in run.report.rows():
                result.rows.append(
                    dict(realization=r, seed=cfg.seed + r, scheduler=run.scheduler, link=link,
                         inclusion=float(inc), conditional=float(cond), coverage=float(cov),
                         throughput=float(thr), utility=float(run.utility), status="ok")
                )
    with open(os.path.join(out_dir, "per_realization.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PER_REALIZATION_HEADER)
        for row in result.rows:
            w.writerow([row[k] if isinstance(row[k], (int, str)) else repr(row[k]) for k in PER_REALIZATION_HEADER])
    result.aggregate = aggregate_rows(result.rows, cfg.schedulers, cfg.n_pairs)
    with open(os.path.join(out_dir, "aggregate.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for name, link, cm, cse, um, use in result.aggregate:
            w.writerow([name, link, _fmt(cm), _fmt(cse), _fmt(um), _fmt(use)])
    with open(os.path.join(out_dir, "plot_coverage.py"), "w") as fh:
        fh.write(plot_script(os.path.abspath(out_dir), cfg))
    return result


def read_per_realization(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                dict(
                    realization=int(rec["realization"]),
                    seed=int(rec["seed"]),
                    scheduler=rec["scheduler"],
                    link=int(rec["link"]),
                    status=rec["status"],
                    **{k: float(rec[k]) for k in ("inclusion", "conditional", "coverage", "throughput", "utility")},
                )
            )
    return rows


PLOT_TEMPLATE = '''"""Per-link coverage: single realization and averaged ({n_pairs} pairs).

Generated by `detsched compare`; needs matplotlib.
"""
import csv

import matplotlib.pyplot as plt

PER_REALIZATION = {per!r}
AGGREGATE = {agg!r}
SCHEDULERS = {schedulers!r}
N_PAIRS = {n_pairs}

single = {{s: [0.0] * N_PAIRS for s in SCHEDULERS}}
with open(PER_REALIZATION) as fh:
    for row in csv.DictReader(fh):
        if row["realization"] == "0" and row["status"] == "ok":
            single[row["scheduler"]][int(row["link"])] = float(row["coverage"])

mean = {{s: [0.0] * N_PAIRS for s in SCHEDULERS}}
err = {{s: [0.0] * N_PAIRS for s in SCHEDULERS}}
with open(AGGREGATE) as fh:
    for row in csv.DictReader(fh):
        mean[row["scheduler"]][int(row["link"])] = float(row["coverage_mean"])
        se = float(row["coverage_se"])
        err[row["scheduler"]][int(row["link"])] = 0.0 if se != se else se

fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
width = 0.8 / len(SCHEDULERS)
for k, s in enumerate(SCHEDULERS):
    xs = [i + (k - (len(SCHEDULERS) - 1) / 2) * width for i in range(N_PAIRS)]
    axes[0].bar(xs, single[s], width, label=s)
    axes[1].bar(xs, mean[s], width, yerr=err[s], label=s)
axes[0].set_title("single realization")
axes[1].set_title("averaged")
for ax in axes:
    ax.set_xlabel("link")
    ax.set_xticks(range(N_PAIRS))
axes[0].set_ylabel("coverage probability")
axes[1].legend()
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def plot_script(out_dir: str, cfg: ExperimentConfig) -> str:
    return PLOT_TEMPLATE.format(
        per=os.path.join(out_dir, "per_realization.csv"),
        agg=os.path.join(out_dir, "aggregate.csv"),
        png=os.path.join(out_dir, f"coverage_{cfg.n_pairs}pairs.png"),
        schedulers=list(cfg.schedulers),
        n_pairs=cfg.n_pairs,
    )


# ---------------------------------------------------------------- verify


@dataclass
class VerifyCheck:
    instance: int
    scheduler: str
    link: int
    exact_det: float
    exact_enum: float
    mc_mean: float
    mc_se: float
    passed: bool


def verification_schedulers(net: Network, cfg: ExperimentConfig, rng: np.random.Generator):
    """Randomized scheduler of each family, paired with its L-kernel."""
    n = net.n
    p_fixed = float(rng.uniform(0.1, 0.9))
    p_adapt = rng.uniform(0.1, 0.9, n)
    q = np.exp(rng.normal(0.0, 1.0, n))
    S = gaussian_similarity(net, cfg.sigma)
    I = identity_similarity(n)
    return [
        ("fixed", FixedAloha(p_fixed), build_L(I, aloha_quality(np.full(n, p_fixed)))),
        ("adaptive", AdaptiveAloha(p_adapt), build_L(I, aloha_quality(p_adapt))),
        ("determinantal", LEnsemble(S, q), build_L(S, q)),
    ]


ENUM_TOL = 1e-10
MC_BAND = 4.0


def run_verify(cfg: ExperimentConfig, out_dir=None):
    """Cross-check determinant coverage against enumeration and Monte Carlo.

    Returns the list of :class:`VerifyCheck`; writes one oracle CSV per
    (instance, scheduler).
    """
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    p = cfg.sinr
    checks = []
    for k in range(cfg.verify_instances):
        seed = cfg.seed + k
        net = realization_network(cfg, k)
        rng = np.random.default_rng(seed)
        for name, spec, L in verification_schedulers(net, cfg, rng):
            K = lower(spec, net.n)
            det = [coverage_prob(K, net, i, p) for i in range(net.n)]
            if cfg.enumerate:
                enum = [enumerate_coverage(L, net, i, p) for i in range(net.n)]
            else:
                enum = list(det)
            if cfg.mc_samples:
                mc = mc_coverage_all(spec, net, p, cfg.mc_samples, seed)
            else:
                mc = None
            rows = []
            for i in range(net.n):
                ok = abs(det[i] - enum[i]) < ENUM_TOL
                mm, se = (math.nan, math.nan)
                if mc is not None:
                    mm, se = mc[i].mean, mc[i].std_error
                    ok = ok and abs(mm - det[i]) <= MC_BAND * max(se, 1.0 / cfg.mc_samples)
                checks.append(VerifyCheck(k, name, i, det[i], enum[i], mm, se, ok))
                rows.append((i, det[i], enum[i], mm, se))
            with open(os.path.join(out_dir, f"oracle_{k:02d}_{name}.csv"), "w", newline="") as fh:
                write_oracle_csv(fh, rows)
    return checks

import json
import math
import os

import numpy as np
import pytest

from detsched import coverage
from detsched.cli import main
from detsched.config import ExperimentConfig
from detsched.dpp import SymmetricKernel
from detsched.experiment import AGGREGATE_HEADER, aggregate_rows, read_per_realization
from detsched.formats import load_network, save_kernel
from detsched.oracle import McEstimate

from conftest import random_orthogonal


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


# -------------------------------------------------------------------- gen


def test_gen_writes_network(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "--seed", 1, "--out", tmp_path)
    assert code == 0
    net = load_network(tmp_path / "network.json")
    assert net.n == ExperimentConfig().n_pairs
    assert out.strip() == str(tmp_path / "network.json")


def test_gen_deterministic(tmp_path, capsys):
    run(capsys, "gen", "--seed", 4, "--n-pairs", 7, "--out", tmp_path / "a")
    run(capsys, "gen", "--seed", 4, "--n-pairs", 7, "--out", tmp_path / "b")
    assert read(tmp_path / "a" / "network.json") == read(tmp_path / "b" / "network.json")


def test_gen_zero_pairs(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--n-pairs", 0, "--out", tmp_path)
    assert code == 2
    assert "n_pairs must be >= 1" in err


def test_gen_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_pairs": 3, "colour": "blue"}))
    code, _, err = run(capsys, "gen", "--config", cfg, "--out", tmp_path)
    assert code == 2 and "unknown config keys" in err
    cfg.write_text("{not json")
    assert run(capsys, "gen", "--config", cfg)[0] == 2
    assert run(capsys, "gen", "--config", tmp_path / "missing.json")[0] == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_pairs": 3, "seed": 9, "tau": 5.0}))
    run(capsys, "gen", "--config", cfg, "--n-pairs", 4, "--out", tmp_path)
    assert load_network(tmp_path / "network.json").n == 4


def test_config_roundtrip():
    cfg = ExperimentConfig(n_pairs=7, schedulers=("fixed",), tau=3.5)
    assert ExperimentConfig.from_dict(json.loads(cfg.dumps())) == cfg


# ---------------------------------------------------------------- compare


@pytest.fixture(scope="module")
def compare_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cmp")
    assert main(["compare", "--n-pairs", "5", "--realizations", "20", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_compare_outputs(compare_dir):
    for name in ("config.json", "per_realization.csv", "aggregate.csv", "plot_coverage.py"):
        assert (compare_dir / name).exists()
    assert len(os.listdir(compare_dir / "networks")) == 20
    assert len(os.listdir(compare_dir / "reports")) == 60
    echoed = ExperimentConfig.load(compare_dir / "config.json")
    assert echoed.n_pairs == 5 and echoed.realizations == 20 and echoed.seed == 3


def test_compare_aggregate_shape(compare_dir):
    lines = (compare_dir / "aggregate.csv").read_text().splitlines()
    assert lines[0] == ",".join(AGGREGATE_HEADER)
    keys = [tuple(line.split(",")[:2]) for line in lines[1:]]
    assert keys == [(s, str(i)) for s in ("fixed", "adaptive", "determinantal") for i in range(5)]


def test_compare_reaggregation(compare_dir):
    rows = read_per_realization(compare_dir / "per_realization.csv")
    assert len(rows) == 20 * 3 * 5
    again = aggregate_rows(rows, ("fixed", "adaptive", "determinantal"), 5)
    lines = (compare_dir / "aggregate.csv").read_text().splitlines()[1:]
    for line, agg in zip(lines, again):
        fields = line.split(",")
        assert fields[0] == agg[0] and int(fields[1]) == agg[1]
        assert fields[2:] == [f"{x:.12g}" for x in agg[2:]]


def test_compare_adaptive_not_below_fixed(compare_dir):
    rows = read_per_realization(compare_dir / "per_realization.csv")
    u = {(r["realization"], r["scheduler"]): r["utility"] for r in rows}
    for k in range(20):
        assert u[k, "adaptive"] >= u[k, "fixed"] - 1e-9


def test_compare_utility_matches_coverage(compare_dir):
    rows = read_per_realization(compare_dir / "per_realization.csv")
    for k in range(3):
        for s in ("fixed", "adaptive", "determinantal"):
            sel = [r for r in rows if r["realization"] == k and r["scheduler"] == s]
            assert math.fsum(math.log(r["throughput"]) for r in sel) == pytest.approx(sel[0]["utility"], abs=1e-8)


def test_compare_deterministic(compare_dir, tmp_path):
    assert main(["compare", "--n-pairs", "5", "--realizations", "20", "--seed", "3", "--out", str(tmp_path)]) == 0
    for name in ("per_realization.csv", "aggregate.csv", "reports/r0007_determinantal.csv"):
        assert read(compare_dir / name) == read(tmp_path / name)


def test_compare_infeasible(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"noise": 1e4, "n_pairs": 3, "realizations": 2}))
    code, _, err = run(capsys, "compare", "--config", cfg, "--out", tmp_path / "o")
    assert code == 0
    assert "6 scheduler run(s) infeasible" in err
    rows = read_per_realization(tmp_path / "o" / "per_realization.csv")
    assert {r["status"] for r in rows} == {"infeasible"}
    agg = (tmp_path / "o" / "aggregate.csv").read_text().splitlines()
    assert len(agg) == 1 + 3 * 3


def test_plot_script_compiles(compare_dir):
    src = (compare_dir / "plot_coverage.py").read_text()
    compile(src, "plot_coverage.py", "exec")
    assert str(compare_dir / "aggregate.csv") in src


# ----------------------------------------------------------------- verify


def test_verify_passes(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--n-pairs", 6, "--instances", 2, "--mc-samples", 20000, "--out", tmp_path)
    assert code == 0
    assert out.strip() == "36/36 checks passed"
    header = (tmp_path / "oracle_00_determinantal.csv").read_text().splitlines()[0]
    assert header == "link,exact_det,exact_enum,mc_mean,mc_se,abs_diff"


def test_verify_tampered(tmp_path, capsys):
    code, _, err = run(capsys, "verify", "--n-pairs", 6, "--instances", 1, "--mc-samples", 2000, "--out", tmp_path, "--tamper-h")
    assert code == 1
    assert "FAIL instance=0" in err and "diff=" in err
    assert coverage._TAMPER_H is False


def test_verify_size_limit(tmp_path, capsys):
    code, _, err = run(capsys, "verify", "--n-pairs", 13, "--out", tmp_path)
    assert code == 2 and "12" in err


# ----------------------------------------------------------------- sample


def sample_lines(tmp_path, capsys, K, count, seed=0):
    path = tmp_path / "k.csv"
    save_kernel(K, path)
    code, _, _ = run(capsys, "sample", "--kernel", path, "--count", count, "--seed", seed, "--out", tmp_path)
    assert code == 0
    return (tmp_path / "subsets.txt").read_text().split("\n")[:-1]


def test_sample_empty_kernel(tmp_path, capsys):
    lines = sample_lines(tmp_path, capsys, SymmetricKernel.marginal(np.zeros((4, 4))), 50)
    assert lines == [""] * 50


def test_sample_diagonal_frequencies(tmp_path, capsys):
    diag = np.array([0.1, 0.5, 0.8])
    m = 20000
    lines = sample_lines(tmp_path, capsys, SymmetricKernel.marginal(np.diag(diag)), m)
    counts = np.zeros(3, dtype=int)
    for line in lines:
        for tok in line.split():
            counts[int(tok)] += 1
    for i in range(3):
        assert McEstimate.from_count(int(counts[i]), m, 0).within(diag[i])


def test_sample_projection(tmp_path, capsys, rng):
    V = random_orthogonal(5, rng)[:, :2]
    lines = sample_lines(tmp_path, capsys, SymmetricKernel.marginal(V @ V.T), 300)
    for line in lines:
        idx = [int(t) for t in line.split()]
        assert len(idx) == 2 and idx == sorted(idx)


def test_sample_ensemble_kernel_and_determinism(tmp_path, capsys):
    L = SymmetricKernel.ensemble(np.eye(3) * 2.0)
    a = sample_lines(tmp_path, capsys, L, 100, seed=5)
    b = sample_lines(tmp_path, capsys, L, 100, seed=5)
    assert a == b


def test_sample_from_config(tmp_path, capsys):
    code, _, _ = run(capsys, "sample", "--n-pairs", 4, "--count", 10, "--out", tmp_path)
    assert code == 0
    assert len((tmp_path / "subsets.txt").read_text().splitlines()) == 10


def test_sample_bad_kernel_file(tmp_path, capsys):
    path = tmp_path / "k.csv"
    path.write_text("1,2\n3,4\n")
    assert run(capsys, "sample", "--kernel", path, "--out", tmp_path)[0] == 2

"""End-to-end exercises of the command-line interface (in process)."""

import numpy as np
import pytest

from worstpath import load_env, read_report
from worstpath.cli import main
from worstpath.harness import load_snapshot


@pytest.fixture()
def env_file(tmp_path):
    path = tmp_path / "env.txt"
    rc = main(["gen", "--states", "40", "--seed", "3", "--out", str(path)])
    assert rc == 0
    return path


def test_gen_writes_loadable_env(env_file):
    mdp, base = load_env(env_file)
    assert mdp.num_states == 40
    assert mdp.validate() == []


def test_gen_respects_flags(tmp_path):
    path = tmp_path / "env.txt"
    main([
        "gen", "--states", "24", "--seed", "1", "--gamma", "0.9",
        "--bb-fraction", "0.5", "--out", str(path),
    ])
    mdp, _ = load_env(path)
    assert mdp.gamma == 0.9
    assert int(mdp.building_block.sum()) == 12


def test_train_then_eval(tmp_path, env_file):
    snap = tmp_path / "snap.txt"
    metrics = tmp_path / "metrics.csv"
    rc = main([
        "train", str(env_file), "--beta", "5", "--seed", "0",
        "--iterations", "4", "--trees-per-iter", "8", "--workers", "2",
        "--out", str(snap), "--metrics", str(metrics),
    ])
    assert rc == 0
    mdp, base, pi, values = load_snapshot(snap)
    assert mdp.num_states == 40
    assert metrics.read_text().count("\n") == 5  # header + 4 iterations

    report = tmp_path / "report.csv"
    depth = tmp_path / "depth.csv"
    rc = main([
        "eval", str(snap), "--budget", "0", "--budget", "10",
        "--seed", "0", "--max-targets", "10",
        "--out", str(report), "--depth-out", str(depth),
    ])
    assert rc == 0
    rows = read_report(report)
    assert {r.budget for r in rows} == {0, 10}
    assert depth.read_text().startswith("target,estimated_depth,realised_depth")


def test_eval_base_policy_flag(tmp_path, env_file):
    snap = tmp_path / "snap.txt"
    main([
        "train", str(env_file), "--seed", "0", "--iterations", "2",
        "--trees-per-iter", "6", "--workers", "1", "--out", str(snap),
    ])
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    main(["eval", str(snap), "--budget", "0", "--out", str(out_a), "--base-policy"])
    main(["eval", str(snap), "--budget", "0", "--out", str(out_b), "--base-policy"])
    assert out_a.read_bytes() == out_b.read_bytes()


def test_train_fraction_flag(tmp_path, env_file):
    snap = tmp_path / "snap.txt"
    rc = main([
        "train", str(env_file), "--seed", "0", "--iterations", "2",
        "--trees-per-iter", "6", "--workers", "1", "--fraction", "0.3",
        "--out", str(snap),
    ])
    assert rc == 0


def test_oracle_check_passes():
    assert main(["oracle-check", "--seed", "0", "--envs", "4"]) == 0

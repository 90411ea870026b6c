import json

import numpy as np
import pytest

from orlkit.cli import main, validate_config
from orlkit.data import load_dataset


def run_cli(*args):
    return main([str(a) for a in args])


def collect(tmp_path, env, policy, n, seed, name):
    out = tmp_path / name
    assert run_cli("collect", "--env", env, "--policy", policy, "--n", n,
                   "--seed", seed, "--out", out) == 0
    return out


def base_config(tmp_path, dataset, agent, **over):
    cfg = {
        "env": "twinpeaks1d",
        "datasets": [str(dataset)],
        "agent": agent,
        "seed": 1,
        "out_dir": str(tmp_path / f"run_{agent}_{over.get('tag', '')}"),
        "registry": str(tmp_path / "registry.json"),
        "hyperparams": {"steps": 200, "batch_size": 64, "hidden": [16, 16],
                        "eval_every": 100, "eval_episodes": 5},
        "bc": {"epochs": 2, "batch_size": 64},
    }
    over.pop("tag", None)
    for key, val in over.items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_collect_writes_dataset_and_manifest(tmp_path):
    out = collect(tmp_path, "twinpeaks1d", "expert", 400, 1, "e.orld")
    ds = load_dataset(out)
    assert len(ds) == 400
    assert ds.manifest.sources[0].policy == "expert"
    assert (tmp_path / "e.orld.manifest.json").exists()


def test_collect_unknown_policy_is_usage_error(tmp_path, capsys):
    rc = run_cli("collect", "--env", "twinpeaks1d", "--policy", "oracle",
                 "--n", 10, "--seed", 0, "--out", tmp_path / "x.orld")
    assert rc == 1
    assert "unknown policy" in capsys.readouterr().err


def test_collect_repeat_is_byte_identical(tmp_path):
    a = collect(tmp_path, "pointmass2d", "medium", 300, 7, "a.orld")
    b = collect(tmp_path, "pointmass2d", "medium", 300, 7, "b.orld")
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.orld.manifest.json").read_text() == (
        tmp_path / "b.orld.manifest.json").read_text()


def test_mix_concatenates_and_checks_env(tmp_path):
    a = collect(tmp_path, "twinpeaks1d", "random", 300, 1, "r.orld")
    b = collect(tmp_path, "twinpeaks1d", "expert", 200, 2, "e.orld")
    out = tmp_path / "mix.orld"
    assert run_cli("mix", "--out", out, a, b) == 0
    mixed = load_dataset(out)
    assert len(mixed) == 500
    assert sum(s.count for s in mixed.manifest.sources) == 500

    c = collect(tmp_path, "pointmass2d", "random", 100, 3, "pm.orld")
    assert run_cli("mix", "--out", tmp_path / "bad.orld", a, c) == 2


def test_mix_needs_two_inputs(tmp_path):
    a = collect(tmp_path, "twinpeaks1d", "random", 100, 1, "r1.orld")
    assert run_cli("mix", "--out", tmp_path / "m.orld", a) == 1


def fit_behavior_on_mixture(tmp_path, tag, seed=3):
    r = collect(tmp_path, "pointmass2d", "random", 3000, 11, f"r{tag}.orld")
    e = collect(tmp_path, "pointmass2d", "expert", 3000, 12, f"e{tag}.orld")
    mix = tmp_path / f"mix{tag}.orld"
    assert run_cli("mix", "--out", mix, r, e) == 0
    out = tmp_path / f"bm{tag}"
    assert run_cli("fit-behavior", "--dataset", mix, "--out", out,
                   "--epochs", 8, "--hidden", "32,32", "--seed", seed,
                   "--calibrate") == 0
    return out


def test_fit_behavior_report_orders_sources(tmp_path):
    out = fit_behavior_on_mixture(tmp_path, "1")
    summary = json.loads((out / "weight_summary.json").read_text())
    assert summary["mean_lambda"]["random"] < summary["mean_lambda"]["expert"]
    total = sum(sum(c) for c in summary["bin_counts"].values())
    assert total == summary["count"] == 6000
    report_lines = (out / "weight_report.jsonl").read_text().splitlines()
    assert len(report_lines) == 6000
    rec = json.loads(report_lines[0])
    assert set(rec) == {"source", "state", "beta_hat", "lambda"}


def test_fit_behavior_rerun_identical(tmp_path):
    a = fit_behavior_on_mixture(tmp_path, "a")
    b = fit_behavior_on_mixture(tmp_path, "b")
    assert (a / "weight_report.jsonl").read_bytes() == (
        b / "weight_report.jsonl").read_bytes()


def test_train_td3rkl_smoke_and_reduction(tmp_path):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 2000, 5, "tp.orld")
    bm = tmp_path / "bm"
    assert run_cli("fit-behavior", "--dataset", ds, "--out", bm,
                   "--epochs", 2, "--hidden", "16,16") == 0

    cfg_rkl = base_config(tmp_path, ds, "td3rkl", tag="red",
                          behavior=str(bm),
                          weights={"zeta1": 0.0, "zeta2": 1000.0},
                          regularizer={"alpha": 0.0})
    cfg_bc = base_config(tmp_path, ds, "td3bc", tag="red")
    p_rkl = write_config(tmp_path, cfg_rkl, "rkl.json")
    p_bc = write_config(tmp_path, cfg_bc, "bc.json")
    assert run_cli("train", "--config", p_rkl) == 0
    assert run_cli("train", "--config", p_bc) == 0

    out_rkl = tmp_path / "run_td3rkl_red"
    out_bc = tmp_path / "run_td3bc_red"
    summary = json.loads((out_rkl / "summary.json").read_text())
    assert np.isfinite(summary["final_normalized_score"])
    assert (out_rkl / "config.json").exists()
    assert (out_rkl / "checkpoint" / "actor.orlw").exists()
    # reduced td3rkl replays td3bc exactly, metrics files included
    assert (out_rkl / "metrics.jsonl").read_bytes() == (
        out_bc / "metrics.jsonl").read_bytes()


def test_train_metrics_are_step_ordered(tmp_path):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 1000, 6, "tp2.orld")
    cfg = base_config(tmp_path, ds, "td3bc", tag="ord")
    assert run_cli("train", "--config", write_config(tmp_path, cfg)) == 0
    lines = (tmp_path / "run_td3bc_ord" / "metrics.jsonl").read_text().splitlines()
    steps = [json.loads(l)["step"] for l in lines]
    assert steps == sorted(steps) and len(set(steps)) == len(steps)


def test_train_missing_behavior_is_preflight_error(tmp_path, capsys):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 500, 7, "tp3.orld")
    cfg = base_config(tmp_path, ds, "td3rkl", tag="nob")
    rc = run_cli("train", "--config", write_config(tmp_path, cfg))
    assert rc == 1
    assert "behavior" in capsys.readouterr().err


def test_train_bc_only_agent(tmp_path):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 1000, 8, "tp4.orld")
    cfg = base_config(tmp_path, ds, "bc-mse", tag="bc")
    assert run_cli("train", "--config", write_config(tmp_path, cfg)) == 0
    summary = json.loads(
        (tmp_path / "run_bc-mse_bc" / "summary.json").read_text())
    assert np.isfinite(summary["final_normalized_score"])


def test_config_validation_enumerates_problems(tmp_path, capsys):
    cfg = {
        "env": "twinpeaks1d",
        "datasets": ["/nonexistent/path.orld"],
        "agent": "td3rkl",
        "out_dir": str(tmp_path / "x"),
        "regularizer": {"kind": "mse-bc"},
        "hyperparams": {"steps": -5},
    }
    rc = run_cli("train", "--config", write_config(tmp_path, cfg))
    assert rc == 1
    err = capsys.readouterr().err
    assert "steps" in err
    assert "nonexistent" in err
    assert "requires regularizer kind" in err


def test_config_rejects_unknown_keys(tmp_path):
    cfg = {"env": "twinpeaks1d", "datasets": ["x"], "agent": "td3bc",
           "out_dir": "y", "zeta_one": 3}
    with pytest.raises(Exception):
        validate_config(cfg)


def test_orl_seed_env_override(tmp_path, monkeypatch):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 300, 9, "tp5.orld")
    cfg = {"env": "twinpeaks1d", "datasets": [str(ds)], "agent": "td3bc",
           "seed": 1, "out_dir": str(tmp_path / "r")}
    monkeypatch.setenv("ORL_SEED", "42")
    assert validate_config(cfg)["seed"] == 42
    monkeypatch.delenv("ORL_SEED")
    assert validate_config(cfg)["seed"] == 1


def test_eval_checkpoint(tmp_path, capsys):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 1000, 10, "tp6.orld")
    cfg = base_config(tmp_path, ds, "td3bc", tag="ev")
    assert run_cli("train", "--config", write_config(tmp_path, cfg)) == 0
    rc = run_cli("eval", "--env", "twinpeaks1d",
                 "--checkpoint", tmp_path / "run_td3bc_ev" / "checkpoint",
                 "--episodes", 20, "--seed", 3,
                 "--registry", tmp_path / "registry.json")
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert {"mean_return", "std_return", "normalized_score",
            "episodes"} <= set(out)
    assert np.isfinite(out["normalized_score"])


def test_sweep_aggregates_scores(tmp_path):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 800, 11, "tp7.orld")
    cfg = base_config(tmp_path, ds, "bc-mse", tag="sw")
    cfg["out_dir"] = str(tmp_path / "sweep")
    assert run_cli("sweep", "--config", write_config(tmp_path, cfg),
                   "--seeds", 1, 2) == 0
    summary = json.loads((tmp_path / "sweep" / "sweep_summary.json").read_text())
    scores = [summary["scores"]["1"], summary["scores"]["2"]]
    assert summary["mean"] == pytest.approx(np.mean(scores))
    assert summary["std"] == pytest.approx(np.std(scores))
    assert not summary["partial"]
    assert (tmp_path / "sweep" / "seed_1" / "summary.json").exists()


def test_sweep_single_seed_reports_zero_std(tmp_path):
    ds = collect(tmp_path, "twinpeaks1d", "expert", 800, 12, "tp8.orld")
    cfg = base_config(tmp_path, ds, "bc-mse", tag="sw1")
    cfg["out_dir"] = str(tmp_path / "sweep1")
    assert run_cli("sweep", "--config", write_config(tmp_path, cfg),
                   "--seeds", 5) == 0
    summary = json.loads(
        (tmp_path / "sweep1" / "sweep_summary.json").read_text())
    assert summary["std"] == 0.0


def test_usage_error_exit_code():
    assert run_cli("collect", "--env", "twinpeaks1d") == 1

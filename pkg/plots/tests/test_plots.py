"""Secondary-component tests: render figures from real orlkit outputs.

A small workspace of runs is produced once through the primary CLI (its
external interface), then every figure kind is rendered from those files.
The last test is the [SECONDARY] acceptance criterion and prints its
pass/fail line.
"""

import json

import numpy as np
import pytest

from orlkit.cli import main as orl_main
from orlplots.cli import main as plots_main
from orlplots.series import (eval_curve, grouped_score_curves,
                             lambda_histograms, load_weight_report,
                             run_label, uncertainty_scatter)


def orl(*args):
    rc = orl_main([str(a) for a in args])
    assert rc == 0, f"orl {' '.join(str(a) for a in args)} -> {rc}"


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    ws = tmp_path_factory.mktemp("ws")
    registry = ws / "registry.json"

    # weight report on a two-source pointmass mixture (criterion-4 artifact)
    orl("collect", "--env", "pointmass2d", "--policy", "random",
        "--n", 2000, "--seed", 1, "--out", ws / "random.orld")
    orl("collect", "--env", "pointmass2d", "--policy", "expert",
        "--n", 2000, "--seed", 2, "--out", ws / "expert.orld")
    orl("mix", "--out", ws / "mix.orld", ws / "random.orld", ws / "expert.orld")
    orl("fit-behavior", "--dataset", ws / "mix.orld", "--out", ws / "bm",
        "--epochs", 5, "--hidden", "32,32", "--calibrate")

    # BC-only runs with two losses, two seeds each (criterion-7 artifacts)
    tp = ws / "tp.orld"
    orl("collect", "--env", "twinpeaks1d", "--policy", "expert",
        "--n", 1500, "--seed", 3, "--out", tp)
    run_dirs = {"bc-mse": [], "bc-rkl": []}
    for agent in run_dirs:
        for seed in (0, 1):
            out_dir = ws / f"{agent}_s{seed}"
            cfg = {
                "env": "twinpeaks1d", "datasets": [str(tp)], "agent": agent,
                "seed": seed, "out_dir": str(out_dir),
                "registry": str(registry),
                "hyperparams": {"hidden": [16, 16], "eval_episodes": 20},
                "bc": {"epochs": 3, "eval_every_epochs": 1},
            }
            cfg_path = ws / f"{agent}_s{seed}.json"
            cfg_path.write_text(json.dumps(cfg))
            orl("train", "--config", cfg_path)
            run_dirs[agent].append(out_dir)

    # a td3bc sweep for the training-curves kind (criterion-5/6 artifact)
    sweep_dir = ws / "sweep"
    cfg = {
        "env": "twinpeaks1d", "datasets": [str(tp)], "agent": "td3bc",
        "out_dir": str(sweep_dir), "registry": str(registry),
        "hyperparams": {"steps": 200, "batch_size": 64, "hidden": [16, 16],
                        "eval_every": 50, "eval_episodes": 20},
    }
    cfg_path = ws / "sweep.json"
    cfg_path.write_text(json.dumps(cfg))
    assert orl_main(["sweep", "--config", str(cfg_path),
                     "--seeds", "0", "1"]) == 0
    return {
        "report": ws / "bm" / "weight_report.jsonl",
        "bc_runs": run_dirs["bc-mse"] + run_dirs["bc-rkl"],
        "sweep_runs": [sweep_dir / "seed_0", sweep_dir / "seed_1"],
        "ws": ws,
    }


def test_run_label_uses_config_echo(workspace):
    labels = {run_label(p) for p in workspace["bc_runs"]}
    assert labels == {"bc-mse", "bc-rkl (alpha=1.0)"}


def test_eval_curve_extraction(workspace):
    steps, scores = eval_curve(workspace["bc_runs"][0])
    assert list(steps) == [1, 2, 3]
    assert np.all(np.isfinite(scores))


def test_grouped_curves_aggregate_by_label(workspace):
    groups = grouped_score_curves(workspace["bc_runs"])
    assert set(groups) == {"bc-mse", "bc-rkl (alpha=1.0)"}
    for steps, mean, std, n in groups.values():
        assert n == 2
        assert len(steps) == len(mean) == len(std) == 3
        assert np.all(std >= 0)


def test_weight_report_parsing(workspace):
    report = load_weight_report(workspace["report"])
    assert set(report) == {"expert", "random"}
    total = sum(len(v["lam"]) for v in report.values())
    assert total == 4000
    edges, counts = lambda_histograms(workspace["report"])
    assert sum(int(c.sum()) for c in counts.values()) == 4000
    assert len(edges) == 51
    scatter = uncertainty_scatter(workspace["report"])
    assert scatter["random"][0].shape == scatter["random"][1].shape


def test_render_all_kinds_via_cli(workspace, tmp_path):
    jobs = [
        ("lambda-hist", [workspace["report"]]),
        ("uncertainty-scatter", [workspace["report"]]),
        ("bc-curves", workspace["bc_runs"]),
        ("training-curves", workspace["sweep_runs"]),
    ]
    for kind, inputs in jobs:
        out = tmp_path / f"{kind}.png"
        rc = plots_main(["render", "--kind", kind,
                         "--in", *[str(p) for p in inputs],
                         "--out", str(out)])
        assert rc == 0
        assert out.exists() and out.stat().st_size > 1000


def test_empty_metrics_file_is_explicit_error(tmp_path):
    empty = tmp_path / "metrics.jsonl"
    empty.write_text("")
    rc = plots_main(["render", "--kind", "training-curves",
                     "--in", str(empty), "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert not (tmp_path / "x.png").exists()


def test_missing_input_is_explicit_error(tmp_path):
    rc = plots_main(["render", "--kind", "lambda-hist",
                     "--in", str(tmp_path / "nope.jsonl"),
                     "--out", str(tmp_path / "x.png")])
    assert rc == 2


def test_rendering_does_not_mutate_inputs(workspace, tmp_path):
    report = workspace["report"]
    before = report.read_bytes()
    plots_main(["render", "--kind", "lambda-hist", "--in", str(report),
                "--out", str(tmp_path / "h.png")])
    assert report.read_bytes() == before


def test_criterion_9_all_kinds_render_and_series_deterministic(workspace,
                                                               tmp_path):
    jobs = [
        ("lambda-hist", [workspace["report"]]),
        ("uncertainty-scatter", [workspace["report"]]),
        ("bc-curves", workspace["bc_runs"]),
        ("training-curves", workspace["sweep_runs"]),
    ]
    rendered = 0
    for kind, inputs in jobs:
        for attempt in ("a", "b"):
            out = tmp_path / f"{kind}_{attempt}.png"
            rc = plots_main(["render", "--kind", kind,
                             "--in", *[str(p) for p in inputs],
                             "--out", str(out)])
            assert rc == 0 and out.exists()
        rendered += 1

    def snapshot():
        edges, counts = lambda_histograms(workspace["report"])
        scatter = uncertainty_scatter(workspace["report"])
        curves = grouped_score_curves(workspace["bc_runs"])
        sweep = grouped_score_curves(workspace["sweep_runs"])
        return edges, counts, scatter, curves, sweep

    a, b = snapshot(), snapshot()
    edges_eq = np.array_equal(a[0], b[0])
    counts_eq = all(np.array_equal(a[1][k], b[1][k]) for k in a[1])
    scatter_eq = all(np.array_equal(a[2][k][i], b[2][k][i])
                     for k in a[2] for i in (0, 1))
    curves_eq = all(
        np.array_equal(a[3][k][i], b[3][k][i]) for k in a[3] for i in (0, 1, 2))
    sweep_eq = all(
        np.array_equal(a[4][k][i], b[4][k][i]) for k in a[4] for i in (0, 1, 2))
    ok = (rendered == 4 and edges_eq and counts_eq and scatter_eq
          and curves_eq and sweep_eq)
    line = (f"[{'PASS' if ok else 'FAIL'}] criterion 9: all four figure kinds "
            f"render; re-rendering yields identical data series")
    print(line)
    assert ok, line

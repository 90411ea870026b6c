"""Pure data extraction from orlkit's line-delimited JSON outputs.

Everything here is deterministic: identical input files yield identical
series, which the renderer then draws without further transformation.
Inputs are the documented formats only (metrics.jsonl records with an
optional eval block, fit-behavior weight reports, and the run-directory
config.json echoes used for legend labels).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class InputError(Exception):
    """A metrics or report input is missing, empty, or malformed."""


def _read_jsonl(path) -> list:
    path = Path(path)
    if not path.exists():
        raise InputError(f"input does not exist: {path}")
    records = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{i}: not valid JSON: {exc}") from exc
    if not records:
        raise InputError(f"input holds no records: {path}")
    return records


def resolve_metrics_path(path) -> Path:
    """Accept either a metrics.jsonl file or a run directory containing one."""
    path = Path(path)
    if path.is_dir():
        return path / "metrics.jsonl"
    return path


def run_label(path) -> str:
    """Legend label from the run's config echo, else the file stem."""
    metrics = resolve_metrics_path(path)
    cfg_path = metrics.parent / "config.json"
    if cfg_path.exists():
        try:
            cfg = json.loads(cfg_path.read_text())
        except json.JSONDecodeError:
            return metrics.parent.name
        agent = cfg.get("agent")
        if agent:
            reg = cfg.get("regularizer") or {}
            if agent in ("td3rkl", "bc-rkl") and "alpha" in reg:
                return f"{agent} (alpha={reg['alpha']})"
            return str(agent)
    return metrics.parent.name if metrics.name == "metrics.jsonl" else metrics.stem


def load_metrics(path) -> list:
    return _read_jsonl(resolve_metrics_path(path))


def eval_curve(path):
    """(steps, normalized scores) from one metrics file's eval records."""
    steps, scores = [], []
    for rec in load_metrics(path):
        ev = rec.get("eval")
        if ev is not None and ev.get("normalized_score") is not None:
            steps.append(int(rec["step"]))
            scores.append(float(ev["normalized_score"]))
    if not steps:
        raise InputError(
            f"no evaluation records in {resolve_metrics_path(path)}")
    return np.array(steps), np.array(scores)


def grouped_score_curves(paths) -> dict:
    """Group runs by label; mean and std of the score at each shared step.

    Returns {label: (steps, mean, std, n_runs)} using the intersection of
    step grids within each group so partially logged runs still align.
    """
    groups: dict = {}
    for path in paths:
        groups.setdefault(run_label(path), []).append(eval_curve(path))
    out = {}
    for label, curves in sorted(groups.items()):
        common = sorted(set.intersection(*[set(s.tolist())
                                           for s, _ in curves]))
        if not common:
            raise InputError(
                f"runs labelled {label!r} share no evaluation steps")
        steps = np.array(common)
        rows = []
        for s, v in curves:
            lookup = dict(zip(s.tolist(), v.tolist()))
            rows.append([lookup[t] for t in common])
        rows = np.array(rows)
        out[label] = (steps, rows.mean(axis=0), rows.std(axis=0), len(curves))
    return out


def load_weight_report(path) -> dict:
    """Per-source state/beta/lambda arrays from a fit-behavior report."""
    by_source: dict = {}
    for i, rec in enumerate(_read_jsonl(path)):
        try:
            src = rec["source"]
            entry = by_source.setdefault(src,
                                         {"state": [], "beta": [], "lam": []})
            entry["state"].append(rec["state"])
            entry["beta"].append(float(rec["beta_hat"]))
            entry["lam"].append(float(rec["lambda"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{path}: record {i} malformed: {exc}") from exc
    return {
        src: {
            "state": np.array(v["state"]),
            "beta": np.array(v["beta"]),
            "lam": np.array(v["lam"]),
        }
        for src, v in sorted(by_source.items())
    }


def lambda_histograms(path, bins: int = 50):
    """(edges, {source: counts}) over [0, 1] for the weight histogram."""
    report = load_weight_report(path)
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts = {src: np.histogram(v["lam"], bins=edges)[0]
              for src, v in report.items()}
    return edges, counts


def uncertainty_scatter(path) -> dict:
    """{source: (first state dim, beta_hat)} for the uncertainty figure."""
    report = load_weight_report(path)
    return {src: (v["state"][:, 0], v["beta"]) for src, v in report.items()}

"""Matplotlib rendering of the four figure kinds.

The renderer never mutates its inputs; all data comes from the pure
series module, so re-rendering identical inputs plots identical series.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .series import (InputError, grouped_score_curves, lambda_histograms,
                     uncertainty_scatter)

KINDS = ("bc-curves", "uncertainty-scatter", "lambda-hist", "training-curves")


def _score_curves_figure(paths, title):
    groups = grouped_score_curves(paths)
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for label, (steps, mean, std, n) in groups.items():
        line, = ax.plot(steps, mean, label=f"{label} (n={n})")
        ax.fill_between(steps, mean - std, mean + std,
                        color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("training step")
    ax.set_ylabel("normalized score")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    return fig


def render_bc_curves(paths, out):
    fig = _score_curves_figure(paths, "behavior-cloning-only training")
    fig.savefig(out, dpi=120)
    plt.close(fig)


def render_training_curves(paths, out):
    fig = _score_curves_figure(paths, "training curves (mean +- std)")
    fig.savefig(out, dpi=120)
    plt.close(fig)


def render_uncertainty_scatter(paths, out):
    if len(paths) != 1:
        raise InputError("uncertainty-scatter takes exactly one report file")
    data = uncertainty_scatter(paths[0])
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for src, (x, beta) in data.items():
        ax.scatter(x, beta, s=4, alpha=0.4, label=src, linewidths=0)
    ax.set_xlabel("state (first dimension)")
    ax.set_ylabel("estimated log-variance")
    ax.set_title("predicted aleatoric uncertainty by state")
    ax.legend(markerscale=3)
    ax.grid(alpha=0.3)
    fig.savefig(out, dpi=120)
    plt.close(fig)


def render_lambda_hist(paths, out):
    if len(paths) != 1:
        raise InputError("lambda-hist takes exactly one report file")
    edges, counts = lambda_histograms(paths[0])
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for src, c in counts.items():
        ax.bar(centers, c, width=width, alpha=0.55, label=src)
    ax.set_xlabel("per-state BC weight")
    ax.set_ylabel("count")
    ax.set_title("per-state weight histogram by source")
    ax.legend()
    fig.savefig(out, dpi=120)
    plt.close(fig)


_RENDERERS = {
    "bc-curves": render_bc_curves,
    "training-curves": render_training_curves,
    "uncertainty-scatter": render_uncertainty_scatter,
    "lambda-hist": render_lambda_hist,
}


def render(kind: str, paths, out) -> None:
    if kind not in _RENDERERS:
        raise ValueError(f"unknown figure kind {kind!r}; choose from {KINDS}")
    if not paths:
        raise InputError("no input paths given")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _RENDERERS[kind](list(paths), out)

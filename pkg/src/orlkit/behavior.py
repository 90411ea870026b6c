"""Gaussian behavior cloning and the per-state adaptive BC weight.

A diagonal-Gaussian model of the behavior policy is fitted by maximum
likelihood; only its log-variance head matters downstream, where it is
turned into a per-state weight lambda(s) = 1 / (1 + exp(z1 * beta - z2))
that throttles the behavior-cloning signal on high-variance states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import OfflineDataset, normalize_state
from .nets import AdamState, MlpNet, TrainingDiverged, adam_step, load_net, make_rng, save_net

BETA_MIN = -10.0
BETA_MAX = 4.0
LN_2PI = float(np.log(2.0 * np.pi))


@dataclass
class WeightConfig:
    zeta1: float = 10.0
    zeta2: float = 5.0

    def __post_init__(self):
        if self.zeta1 < 0:
            raise ValueError("zeta1 must be >= 0 (weight decreasing in variance)")


class GaussianBehaviorModel:
    """Cloned behavior policy: mean net + log-variance net over states.

    The two heads are separate MLPs sharing no parameters. Inputs are
    normalized states; log-variances are clamped to [beta_min, beta_max].
    """

    def __init__(self, mean_net: MlpNet, logvar_net: MlpNet,
                 beta_min: float = BETA_MIN, beta_max: float = BETA_MAX):
        if mean_net.in_dim != logvar_net.in_dim:
            raise ValueError("mean/log-variance nets disagree on input dim")
        if mean_net.out_dim != logvar_net.out_dim:
            raise ValueError("mean/log-variance nets disagree on output dim")
        if beta_min >= beta_max:
            raise ValueError("beta_min must be below beta_max")
        self.mean_net = mean_net
        self.logvar_net = logvar_net
        self.beta_min = float(beta_min)
        self.beta_max = float(beta_max)
        self.nll_history: list = []

    @property
    def obs_dim(self) -> int:
        return self.mean_net.in_dim

    @property
    def act_dim(self) -> int:
        return self.mean_net.out_dim

    def mean(self, s):
        return self.mean_net.forward(s)

    def log_var(self, s):
        return np.clip(self.logvar_net.forward(s), self.beta_min, self.beta_max)

    def beta_hat(self, s):
        """Scalar log-variance per state: mean of per-dim clamped betas."""
        return self.log_var(s).mean(axis=-1)


def _nll_rows(mu, beta, a):
    e = a - mu
    return 0.5 * np.sum(LN_2PI + beta + e * e * np.exp(-beta), axis=-1)


def gaussian_nll(model: GaussianBehaviorModel, s, a):
    """Diagonal-Gaussian negative log-likelihood, summed over action dims."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))):
        raise ValueError("non-finite inputs to gaussian_nll")
    if a.shape[-1] != model.act_dim:
        raise ValueError(f"action dim {a.shape[-1]} != model dim {model.act_dim}")
    return _nll_rows(model.mean(s), model.log_var(s), a)


def beta_hat(model: GaussianBehaviorModel, s):
    return model.beta_hat(s)


def compute_lambda(cfg: WeightConfig, beta):
    """Adaptive BC weight 1 / (1 + exp(zeta1 * beta - zeta2)) in (0, 1)."""
    return expit(cfg.zeta2 - cfg.zeta1 * np.asarray(beta, dtype=np.float64))


def calibrate_weights(model: GaussianBehaviorModel, states,
                      zeta1: float = 10.0) -> WeightConfig:
    """Place the sigmoid midpoint at the median estimated log-variance.

    Mirrors how the slope/shift pair is meant to be chosen: from the
    pre-estimated log-variance scale of the action samples, so that the
    resulting weights are spread out instead of saturated.
    """
    med = float(np.median(model.beta_hat(states)))
    return WeightConfig(zeta1=zeta1, zeta2=zeta1 * med)


def fit_behavior(dataset: OfflineDataset, epochs: int = 50, rng=None, *,
                 batch_size: int = 256, lr: float = 3e-4,
                 hidden=(256, 256), beta_min: float = BETA_MIN,
                 beta_max: float = BETA_MAX) -> GaussianBehaviorModel:
    """Fit the Gaussian behavior model by minibatch NLL minimization.

    States are normalized with the dataset's statistics before they reach
    the networks, so the returned model operates on normalized states.
    """
    if len(dataset) == 0:
        raise ValueError("cannot fit a behavior model on an empty dataset")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if rng is None:
        rng = make_rng(0)
    n = len(dataset)
    s_all = normalize_state(dataset.stats, dataset.states)
    a_all = dataset.actions
    sizes = [dataset.obs_dim, *hidden, dataset.act_dim]
    model = GaussianBehaviorModel(
        MlpNet(sizes, head="linear", rng=rng),
        MlpNet(sizes, head="linear", rng=rng),
        beta_min=beta_min, beta_max=beta_max,
    )
    adam_mu = AdamState(model.mean_net.params, lr=lr)
    adam_lv = AdamState(model.logvar_net.params, lr=lr)
    model.nll_history.append(float(np.mean(gaussian_nll(model, s_all, a_all))))
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            s_b, a_b = s_all[rows], a_all[rows]
            nb = len(rows)
            mu, cache_mu = model.mean_net.forward_cached(s_b)
            raw, cache_lv = model.logvar_net.forward_cached(s_b)
            beta = np.clip(raw, model.beta_min, model.beta_max)
            inv = np.exp(-beta)
            e = a_b - mu
            loss = float(np.mean(_nll_rows(mu, beta, a_b)))
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"behavior NLL became non-finite (epoch loss {loss})"
                )
            epoch_loss += loss * nb
            d_mu = (mu - a_b) * inv / nb
            clamp_open = (raw > model.beta_min) & (raw < model.beta_max)
            d_raw = 0.5 * (1.0 - e * e * inv) / nb * clamp_open
            g_mu, _ = model.mean_net.backward(cache_mu, d_mu)
            g_lv, _ = model.logvar_net.backward(cache_lv, d_raw)
            adam_step(model.mean_net.params, g_mu, adam_mu)
            adam_step(model.logvar_net.params, g_lv, adam_lv)
        model.nll_history.append(epoch_loss / n)
    return model


def save_behavior(model: GaussianBehaviorModel, dir_path) -> None:
    """Two ORLW nets plus a JSON sidecar with the clamp bounds."""
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    save_net(model.mean_net, d / "mean.orlw")
    save_net(model.logvar_net, d / "logvar.orlw")
    meta = {
        "beta_min": model.beta_min,
        "beta_max": model.beta_max,
        "obs_dim": model.obs_dim,
        "act_dim": model.act_dim,
    }
    with open(d / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_behavior(dir_path) -> GaussianBehaviorModel:
    d = Path(dir_path)
    with open(d / "meta.json") as fh:
        meta = json.load(fh)
    return GaussianBehaviorModel(
        load_net(d / "mean.orlw"),
        load_net(d / "logvar.orlw"),
        beta_min=meta["beta_min"],
        beta_max=meta["beta_max"],
    )

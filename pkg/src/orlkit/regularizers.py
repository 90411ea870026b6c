"""Behavior-cloning loss terms, as pure differentiable functions.

Four regularizers share one calling convention (1-d inputs give a scalar,
2-d batches give per-row losses): squared-error cloning, its contrastive
variant with globally sampled negative action pairs, and the two
stochastic-policy baselines (forward KL alias Gaussian NLL, and a
reparameterized Monte-Carlo reverse KL against a cloned behavior model).
Gradient helpers are exposed alongside so training code and the
finite-difference suite share the exact same formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behavior import LN_2PI, GaussianBehaviorModel
from .nets import MlpNet

REGULARIZER_KINDS = (
    "mse-bc",
    "rkl-contrastive",
    "forward-kl",
    "reverse-kl-stochastic",
)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class RegularizerSpec:
    kind: str
    alpha: float = 1.0
    mc_samples: int = 10

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha,
                "mc_samples": self.mc_samples}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], alpha=float(d.get("alpha", 1.0)),
                   mc_samples=int(d.get("mc_samples", 10)))


class StochasticPolicy:
    """Diagonal Gaussian policy with separate mean and log-std networks.

    Log-stds are clamped to [LOG_STD_MIN, LOG_STD_MAX]; no squashing
    correction is applied to densities, actions are clipped to the bound
    only when interacting with an environment.
    """

    def __init__(self, mean_net: MlpNet, logstd_net: MlpNet,
                 log_std_min: float = LOG_STD_MIN,
                 log_std_max: float = LOG_STD_MAX,
                 stats=None, bound: float = 1.0):
        if mean_net.in_dim != logstd_net.in_dim:
            raise ValueError("mean/log-std nets disagree on input dim")
        if mean_net.out_dim != logstd_net.out_dim:
            raise ValueError("mean/log-std nets disagree on output dim")
        self.mean_net = mean_net
        self.logstd_net = logstd_net
        self.log_std_min = float(log_std_min)
        self.log_std_max = float(log_std_max)
        self.stats = stats
        self.bound = float(bound)

    @property
    def obs_dim(self) -> int:
        return self.mean_net.in_dim

    @property
    def act_dim(self) -> int:
        return self.mean_net.out_dim

    def mean(self, s):
        return self.mean_net.forward(s)

    def log_std(self, s):
        return np.clip(self.logstd_net.forward(s),
                       self.log_std_min, self.log_std_max)

    def act(self, obs, rng):
        """Sample an action for a raw observation, clipped to the bound."""
        s = np.asarray(obs, dtype=np.float64)
        if self.stats is not None:
            s = (s - self.stats.mean) / self.stats.std
        mu = self.mean(s)
        sigma = np.exp(self.log_std(s))
        a = mu + sigma * rng.standard_normal(mu.shape)
        return np.clip(a, -self.bound, self.bound)


def mse_bc_loss(mu, a):
    """Squared-error cloning term, summed over action dims."""
    mu = np.asarray(mu, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if mu.shape != a.shape:
        raise ValueError(f"shape mismatch {mu.shape} vs {a.shape}")
    return np.sum((mu - a) ** 2, axis=-1)


def mse_bc_grad(mu, a):
    return 2.0 * (np.asarray(mu, dtype=np.float64)
                  - np.asarray(a, dtype=np.float64))


def rkl_contrastive_loss(mu, a, a1, a2, alpha: float):
    """Contrastive cloning term: pull to data, push from negative midpoints.

    The negative sample is the midpoint of two actions drawn from the whole
    dataset, so it lies inside the convex hull of the action samples.
    """
    mu = np.asarray(mu, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if not (mu.shape == a.shape == a1.shape == a2.shape):
        raise ValueError("shape mismatch between mu, a, a1, a2")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    mid = 0.5 * (a1 + a2)
    return np.sum((mu - a) ** 2 - alpha * (mu - mid) ** 2, axis=-1)


def rkl_contrastive_grad(mu, a, a1, a2, alpha: float):
    mu = np.asarray(mu, dtype=np.float64)
    mid = 0.5 * (np.asarray(a1, dtype=np.float64)
                 + np.asarray(a2, dtype=np.float64))
    return 2.0 * (mu - np.asarray(a, dtype=np.float64)) - 2.0 * alpha * (mu - mid)


def _policy_nll_rows(mu, log_std, a):
    e = a - mu
    return np.sum(0.5 * LN_2PI + log_std + 0.5 * e * e * np.exp(-2.0 * log_std),
                  axis=-1)


def forward_kl_bc_loss(policy: StochasticPolicy, s, a):
    """Negative log-density of the data action under the policy Gaussian."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))):
        raise ValueError("non-finite inputs to forward_kl_bc_loss")
    return _policy_nll_rows(policy.mean(s), policy.log_std(s), a)


def forward_kl_bc_grads(policy: StochasticPolicy, s, a):
    """Batch loss plus upstreams for the mean and raw log-std nets.

    Returned gradients are already divided by the batch size, i.e. they
    differentiate the mean loss over rows.
    """
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    n = len(s)
    mu, cache_mu = policy.mean_net.forward_cached(s)
    raw, cache_ls = policy.logstd_net.forward_cached(s)
    t = np.clip(raw, policy.log_std_min, policy.log_std_max)
    inv2 = np.exp(-2.0 * t)
    e = a - mu
    loss = float(np.mean(_policy_nll_rows(mu, t, a)))
    d_mu = (mu - a) * inv2 / n
    clamp_open = (raw > policy.log_std_min) & (raw < policy.log_std_max)
    d_raw = (1.0 - e * e * inv2) / n * clamp_open
    return loss, (cache_mu, d_mu), (cache_ls, d_raw)


def _reverse_kl_rows(policy: StochasticPolicy, mu, raw,
                     behavior: GaussianBehaviorModel, s, eps):
    """Per-row MC means of the KL integrand for pre-drawn eps (K, n, act)."""
    t = np.clip(raw, policy.log_std_min, policy.log_std_max)
    sigma = np.exp(t)
    mu_b = np.atleast_2d(behavior.mean(s))
    beta_b = np.atleast_2d(behavior.log_var(s))
    inv_b = np.exp(-beta_b)
    a_tilde = mu[None] + sigma[None] * eps
    diff = a_tilde - mu_b[None]
    log_pi = np.sum(-0.5 * LN_2PI - t[None] - 0.5 * eps * eps, axis=-1)
    log_b = np.sum(-0.5 * LN_2PI - 0.5 * beta_b[None]
                   - 0.5 * diff * diff * inv_b[None], axis=-1)
    rows = np.mean(log_pi - log_b, axis=0)
    return rows, sigma, inv_b, diff


def reverse_kl_stochastic_loss(policy: StochasticPolicy,
                               behavior: GaussianBehaviorModel,
                               s, K: int, rng):
    """Unbiased reparameterized MC estimate of KL(policy(.|s) || behavior).

    Samples a_k = mu(s) + sigma(s) * eps_k keep the estimate differentiable
    in the policy parameters; the behavior model is treated as frozen.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    s_arr = np.asarray(s, dtype=np.float64)
    single = s_arr.ndim == 1
    n = 1 if single else len(s_arr)
    eps = rng.standard_normal((K, n, policy.act_dim))
    mu = np.atleast_2d(policy.mean(s_arr))
    raw = np.atleast_2d(policy.logstd_net.forward(s_arr))
    rows, _, _, _ = _reverse_kl_rows(policy, mu, raw, behavior, s_arr, eps)
    return float(rows[0]) if single else rows


def reverse_kl_stochastic_grads(policy: StochasticPolicy,
                                behavior: GaussianBehaviorModel, s, eps):
    """Batch loss plus cached upstreams for the mean and raw log-std nets.

    Gradients differentiate the mean over rows of the MC estimate; passing
    eps explicitly keeps the loss a deterministic function of the policy
    parameters, which the finite-difference suite relies on. Returns
    (loss, (mean_cache, d_mean), (logstd_cache, d_logstd)).
    """
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    n = len(s)
    mu, cache_mu = policy.mean_net.forward_cached(s)
    raw, cache_ls = policy.logstd_net.forward_cached(s)
    rows, sigma, inv_b, diff = _reverse_kl_rows(policy, mu, raw,
                                                behavior, s, eps)
    loss = float(np.mean(rows))
    mismatch = diff * inv_b[None]
    d_mu = np.mean(mismatch, axis=0) / n
    clamp_open = (raw > policy.log_std_min) & (raw < policy.log_std_max)
    d_raw = (-1.0 + np.mean(mismatch * eps, axis=0) * sigma) / n * clamp_open
    return loss, (cache_mu, d_mu), (cache_ls, d_raw)

"""TD3 machinery and the trainable agents sharing one loop skeleton.

One Td3Agent class covers both deterministic-policy agents: with the
contrastive regularizer plus per-state weights it is the adaptively
weighted reverse-KL algorithm; with the squared-error regularizer and a
global weight of 1 it is plain TD3+BC. Supervised behavior-cloning-only
training (deterministic or stochastic policies) lives here too.

Reproducibility contract: per training step the RNG is consumed in a
pinned order (batch indices, negative pairs if enabled, target smoothing
noise), and negative sampling is skipped entirely when alpha == 0 so the
reduced configuration replays TD3+BC bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .behavior import GaussianBehaviorModel, WeightConfig, compute_lambda
from .data import NormStats, OfflineDataset, normalize_state, sample_minibatch
from .nets import (AdamState, MlpNet, TrainingDiverged, adam_step, load_net,
                   make_rng, polyak_update, save_net)
from .regularizers import (RegularizerSpec, StochasticPolicy,
                           forward_kl_bc_grads, mse_bc_grad, mse_bc_loss,
                           reverse_kl_stochastic_grads, rkl_contrastive_grad,
                           rkl_contrastive_loss)


@dataclass
class Td3Hyperparams:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    smooth_std: float = 0.2
    noise_clip: float = 0.5
    batch_size: int = 256
    steps: int = 50_000
    q_norm_alpha: float = 2.5
    lr: float = 3e-4
    actor_lr: float | None = None
    hidden: tuple = (256, 256)
    eval_every: int = 1000
    eval_episodes: int = 10

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if self.smooth_std < 0 or self.noise_clip < 0:
            raise ValueError("noise parameters must be >= 0")
        if self.batch_size < 1 or self.steps < 1:
            raise ValueError("batch_size and steps must be >= 1")
        if self.actor_lr is None:
            self.actor_lr = self.lr
        self.hidden = tuple(int(h) for h in self.hidden)

    def to_dict(self):
        d = self.__dict__.copy()
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class TrainRecord:
    step: int
    critic_loss: float | None = None
    actor_loss: float | None = None
    mean_lambda: float | None = None
    mean_abs_q: float | None = None
    eval_return: float | None = None
    eval_return_std: float | None = None
    normalized_score: float | None = None


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def final_score(self):
        for rec in reversed(self.records):
            if rec.normalized_score is not None:
                return rec.normalized_score
        return None

    def final_return(self):
        for rec in reversed(self.records):
            if rec.eval_return is not None:
                return rec.eval_return
        return None


@dataclass
class DeterministicPolicy:
    """Bounded tanh actor plus the normalization stats it was trained with."""

    net: MlpNet
    stats: NormStats | None = None
    bound: float = 1.0

    def act(self, obs, rng=None):
        s = np.asarray(obs, dtype=np.float64)
        if self.stats is not None:
            s = normalize_state(self.stats, s)
        return self.net.forward(s)


def smoothed_target_action(actor_target: MlpNet, s_next, smooth_std: float,
                           noise_clip: float, bound: float, rng):
    """Target action with clipped Gaussian smoothing noise, kept in bounds."""
    s_next = np.atleast_2d(np.asarray(s_next, dtype=np.float64))
    a = actor_target.forward(s_next)
    eps = rng.normal(0.0, smooth_std, size=a.shape)
    eps = np.clip(eps, -noise_clip, noise_clip)
    return np.clip(a + eps, -bound, bound)


def critic_target(rewards, terminals, gamma: float, q1p, q2p):
    """Pessimistic bootstrap target: r + gamma * min(q1', q2') off-terminal."""
    rewards = np.asarray(rewards, dtype=np.float64)
    cont = 1.0 - np.asarray(terminals, dtype=np.float64)
    return rewards + gamma * np.minimum(q1p, q2p) * cont


class Td3Agent:
    """Twin-critic delayed-actor agent with a pluggable cloning regularizer.

    reg.kind must be "mse-bc" or "rkl-contrastive"; the contrastive kind
    requires a frozen behavior model and a weight config for the per-state
    lambda(s), the squared-error kind uses a global weight of 1.
    """

    def __init__(self, obs_dim: int, act_dim: int, stats: NormStats,
                 hp: Td3Hyperparams, reg: RegularizerSpec,
                 behavior: GaussianBehaviorModel | None = None,
                 weights: WeightConfig | None = None,
                 seed: int = 0, action_bound: float = 1.0):
        if reg.kind not in ("mse-bc", "rkl-contrastive"):
            raise ValueError(
                f"TD3 agents need a deterministic regularizer, got {reg.kind!r}"
            )
        if reg.kind == "rkl-contrastive":
            if behavior is None or weights is None:
                raise ValueError(
                    "rkl-contrastive agents need a behavior model and weights"
                )
        elif behavior is not None or weights is not None:
            raise ValueError("mse-bc agents take no behavior model or weights")
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.stats = stats
        self.hp = hp
        self.reg = reg
        self.behavior = behavior
        self.weights = weights
        self.seed = int(seed)
        self.action_bound = float(action_bound)
        h = list(hp.hidden)
        self.actor = MlpNet([obs_dim, *h, act_dim], head="tanh",
                            out_bound=action_bound, rng=make_rng(seed, 1))
        self.critic1 = MlpNet([obs_dim + act_dim, *h, 1], head="linear",
                              rng=make_rng(seed, 2))
        self.critic2 = MlpNet([obs_dim + act_dim, *h, 1], head="linear",
                              rng=make_rng(seed, 3))
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.adam_actor = AdamState(self.actor.params, lr=hp.actor_lr)
        self.adam_critic1 = AdamState(self.critic1.params, lr=hp.lr)
        self.adam_critic2 = AdamState(self.critic2.params, lr=hp.lr)
        self.step_count = 0
        self._rng = make_rng(seed, 4)

    @property
    def needs_negatives(self) -> bool:
        return self.reg.kind == "rkl-contrastive" and self.reg.alpha > 0.0

    def policy(self) -> DeterministicPolicy:
        return DeterministicPolicy(net=self.actor, stats=self.stats,
                                   bound=self.action_bound)

    def act(self, obs, rng=None):
        return self.policy().act(obs, rng)

    def critic_update(self, batch) -> float:
        """One Adam step on each critic toward shared pessimistic targets."""
        hp = self.hp
        s = normalize_state(self.stats, batch.states)
        sn = normalize_state(self.stats, batch.next_states)
        n = len(s)
        a_next = smoothed_target_action(self.actor_target, sn, hp.smooth_std,
                                        hp.noise_clip, self.action_bound,
                                        self._rng)
        xn = np.concatenate([sn, a_next], axis=1)
        q1p = self.critic1_target.forward(xn)[:, 0]
        q2p = self.critic2_target.forward(xn)[:, 0]
        y = critic_target(batch.rewards, batch.terminals, hp.gamma, q1p, q2p)
        x = np.concatenate([s, batch.actions], axis=1)
        total = 0.0
        for critic, adam in ((self.critic1, self.adam_critic1),
                             (self.critic2, self.adam_critic2)):
            q, cache = critic.forward_cached(x)
            err = q[:, 0] - y
            loss = float(np.mean(err * err))
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"critic loss non-finite at step {self.step_count + 1}"
                )
            grads, _ = critic.backward(cache, (2.0 * err / n)[:, None])
            adam_step(critic.params, grads, adam)
            total += loss
        self.step_count += 1
        return total

    def actor_update(self, batch):
        """One Adam step maximizing normalized Q minus the weighted regularizer.

        The Q-scale weight q_norm_alpha / mean|Q1(s, actor(s))| is treated
        as a constant during differentiation.
        """
        hp = self.hp
        s = normalize_state(self.stats, batch.states)
        n = len(s)
        a_pi, cache_a = self.actor.forward_cached(s)
        x = np.concatenate([s, a_pi], axis=1)
        q, cache_q = self.critic1.forward_cached(x)
        qcol = q[:, 0]
        mean_abs_q = float(np.mean(np.abs(qcol)))
        if mean_abs_q == 0.0:
            raise TrainingDiverged("mean |Q| is zero; cannot normalize RL signal")
        lam_q = hp.q_norm_alpha / mean_abs_q
        if self.reg.kind == "mse-bc" or self.reg.alpha == 0.0:
            reg_rows = mse_bc_loss(a_pi, batch.actions)
            d_reg = mse_bc_grad(a_pi, batch.actions)
        else:
            reg_rows = rkl_contrastive_loss(a_pi, batch.actions,
                                            batch.neg_action_1,
                                            batch.neg_action_2, self.reg.alpha)
            d_reg = rkl_contrastive_grad(a_pi, batch.actions,
                                         batch.neg_action_1,
                                         batch.neg_action_2, self.reg.alpha)
        if self.weights is not None:
            w = compute_lambda(self.weights, self.behavior.beta_hat(s))
        else:
            w = np.ones(n)
        loss = float(np.mean(w * reg_rows) - lam_q * np.mean(qcol))
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"actor loss non-finite at step {self.step_count}"
            )
        _, dx = self.critic1.backward(cache_q, np.full((n, 1), -lam_q / n),
                                      need_param_grads=False)
        d_api = dx[:, self.obs_dim:] + (w[:, None] * d_reg) / n
        grads, _ = self.actor.backward(cache_a, d_api)
        adam_step(self.actor.params, grads, self.adam_actor)
        return loss, float(np.mean(w)), mean_abs_q

    def update_targets(self) -> None:
        tau = self.hp.tau
        polyak_update(self.actor_target.params, self.actor.params, tau)
        polyak_update(self.critic1_target.params, self.critic1.params, tau)
        polyak_update(self.critic2_target.params, self.critic2.params, tau)

    def train_step(self, dataset: OfflineDataset) -> dict:
        """Sample a batch, update critics, and (every d-th step) the actor."""
        batch = sample_minibatch(dataset, self.hp.batch_size, self._rng,
                                 negatives=self.needs_negatives)
        out = {"critic_loss": self.critic_update(batch)}
        if self.step_count % self.hp.policy_delay == 0:
            aloss, mean_lambda, mean_abs_q = self.actor_update(batch)
            self.update_targets()
            out.update(actor_loss=aloss, mean_lambda=mean_lambda,
                       mean_abs_q=mean_abs_q)
        return out


def train(agent: Td3Agent, dataset: OfflineDataset, hp=None,
          eval_hook=None) -> TrainLog:
    """Run the offline loop for hp.steps critic updates.

    eval_hook, when given, is called with the agent's current deterministic
    policy every hp.eval_every steps (and at the final step) and must
    return an object with mean_return / std_return / normalized_score.
    """
    if hp is not None:
        agent.hp = hp
    hp = agent.hp
    log = TrainLog()
    sums = {"critic_loss": 0.0, "actor_loss": 0.0,
            "mean_lambda": 0.0, "mean_abs_q": 0.0}
    counts = {k: 0 for k in sums}
    for t in range(1, hp.steps + 1):
        try:
            info = agent.train_step(dataset)
        except TrainingDiverged as exc:
            raise TrainingDiverged(f"step {t}: {exc}") from exc
        for k, v in info.items():
            sums[k] += v
            counts[k] += 1
        if t % hp.eval_every == 0 or t == hp.steps:
            rec = TrainRecord(step=t)
            for k in sums:
                if counts[k]:
                    setattr(rec, k, sums[k] / counts[k])
                sums[k] = 0.0
                counts[k] = 0
            if eval_hook is not None:
                res = eval_hook(agent.policy())
                rec.eval_return = res.mean_return
                rec.eval_return_std = res.std_return
                rec.normalized_score = res.normalized_score
            log.records.append(rec)
    return log


def _check_bc_pair(policy, reg: RegularizerSpec, behavior):
    deterministic = reg.kind in ("mse-bc", "rkl-contrastive")
    if deterministic and not isinstance(policy, DeterministicPolicy):
        raise ValueError(f"{reg.kind} trains a DeterministicPolicy")
    if not deterministic and not isinstance(policy, StochasticPolicy):
        raise ValueError(f"{reg.kind} trains a StochasticPolicy")
    if reg.kind == "reverse-kl-stochastic" and behavior is None:
        raise ValueError("reverse-kl-stochastic needs a fitted behavior model")


def train_bc_only(policy, dataset: OfflineDataset, reg: RegularizerSpec,
                  epochs: int, rng=None, *, behavior=None,
                  batch_size: int = 256, lr: float = 3e-4,
                  eval_hook=None, eval_every_epochs: int = 1) -> TrainLog:
    """Supervised cloning with the chosen loss only; no critics, no RL term.

    Negative pairs for the contrastive loss are drawn globally per batch;
    with alpha == 0 the draws are skipped so the loss curve replays the
    squared-error run bit for bit under the same seed.
    """
    _check_bc_pair(policy, reg, behavior)
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if rng is None:
        rng = make_rng(0)
    n = len(dataset)
    s_all = normalize_state(dataset.stats, dataset.states)
    a_all = dataset.actions
    deterministic = isinstance(policy, DeterministicPolicy)
    if deterministic:
        adams = [(policy.net, AdamState(policy.net.params, lr=lr))]
    else:
        adams = [(policy.mean_net, AdamState(policy.mean_net.params, lr=lr)),
                 (policy.logstd_net, AdamState(policy.logstd_net.params, lr=lr))]
    draw_negatives = reg.kind == "rkl-contrastive" and reg.alpha > 0.0
    log = TrainLog()
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            s_b, a_b = s_all[rows], a_all[rows]
            nb = len(rows)
            if deterministic:
                mu, cache = policy.net.forward_cached(s_b)
                if draw_negatives:
                    n1 = a_all[rng.integers(0, n, size=nb)]
                    n2 = a_all[rng.integers(0, n, size=nb)]
                    loss = float(np.mean(rkl_contrastive_loss(
                        mu, a_b, n1, n2, reg.alpha)))
                    d_mu = rkl_contrastive_grad(mu, a_b, n1, n2, reg.alpha) / nb
                else:
                    loss = float(np.mean(mse_bc_loss(mu, a_b)))
                    d_mu = mse_bc_grad(mu, a_b) / nb
                grads, _ = policy.net.backward(cache, d_mu)
                adam_step(policy.net.params, grads, adams[0][1])
            elif reg.kind == "forward-kl":
                loss, (c_mu, d_mu), (c_ls, d_ls) = forward_kl_bc_grads(
                    policy, s_b, a_b)
                for (net, adam), (cache, ups) in zip(
                        adams, ((c_mu, d_mu), (c_ls, d_ls))):
                    grads, _ = net.backward(cache, ups)
                    adam_step(net.params, grads, adam)
            else:
                eps = rng.standard_normal((reg.mc_samples, nb, policy.act_dim))
                loss, (c_mu, d_mu), (c_ls, d_ls) = reverse_kl_stochastic_grads(
                    policy, behavior, s_b, eps)
                for (net, adam), (cache, ups) in zip(
                        adams, ((c_mu, d_mu), (c_ls, d_ls))):
                    grads, _ = net.backward(cache, ups)
                    adam_step(net.params, grads, adam)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"BC loss non-finite in epoch {epoch}"
                )
            epoch_loss += loss * nb
        rec = TrainRecord(step=epoch, actor_loss=epoch_loss / n)
        if eval_hook is not None and (
                epoch % eval_every_epochs == 0 or epoch == epochs):
            res = eval_hook(policy)
            rec.eval_return = res.mean_return
            rec.eval_return_std = res.std_return
            rec.normalized_score = res.normalized_score
        log.records.append(rec)
    return log


def save_agent(agent: Td3Agent, dir_path) -> None:
    """All six networks as ORLW files plus a JSON sidecar.

    The sidecar carries hyperparameters, the step counter, regularizer and
    weight settings, and the normalization stats; Adam accumulators are not
    persisted (checkpoints serve evaluation and inspection, not resuming).
    """
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    save_net(agent.actor, d / "actor.orlw")
    save_net(agent.critic1, d / "critic1.orlw")
    save_net(agent.critic2, d / "critic2.orlw")
    save_net(agent.actor_target, d / "actor_target.orlw")
    save_net(agent.critic1_target, d / "critic1_target.orlw")
    save_net(agent.critic2_target, d / "critic2_target.orlw")
    meta = {
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "action_bound": agent.action_bound,
        "seed": agent.seed,
        "step_count": agent.step_count,
        "hyperparams": agent.hp.to_dict(),
        "regularizer": agent.reg.to_dict(),
        "weights": (None if agent.weights is None
                    else {"zeta1": agent.weights.zeta1,
                          "zeta2": agent.weights.zeta2}),
        "norm_mean": agent.stats.mean.tolist(),
        "norm_std": agent.stats.std.tolist(),
    }
    with open(d / "agent.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_policy(dir_path) -> DeterministicPolicy:
    """Rebuild the deterministic evaluation policy from a checkpoint dir."""
    d = Path(dir_path)
    with open(d / "agent.json") as fh:
        meta = json.load(fh)
    stats = NormStats(mean=np.array(meta["norm_mean"], dtype=np.float64),
                      std=np.array(meta["norm_std"], dtype=np.float64))
    return DeterministicPolicy(net=load_net(d / "actor.orlw"), stats=stats,
                               bound=float(meta["action_bound"]))

"""Native desk-scale environments, scripted data policies, and scoring.

Two tiny control problems stand in for heavyweight physics benchmarks:
a horizon-1 bimodal-reward bandit (TwinPeaks1D) whose expert data has two
action modes with a reward valley between them, and a 2-d point mass with
velocity dynamics and a goal bonus (PointMass2D). Returns are normalized
against measured random/expert reference returns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Manifest, OfflineDataset, SourceInfo
from .nets import make_rng

REFERENCE_EPISODES = 100
REFERENCE_SEED = 7

_GOAL = np.array([1.0, 1.0])
_START = np.array([-1.0, -1.0, 0.0, 0.0])


@dataclass
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    horizon: int
    action_bound: float = 1.0
    j_rand: float | None = None
    j_exp: float | None = None


@dataclass
class EpisodeResult:
    total_return: float
    length: int
    terminated_early: bool


@dataclass
class EvalResult:
    mean_return: float
    std_return: float
    normalized_score: float
    episodes: int


def twinpeaks_reward(a):
    a = np.asarray(a, dtype=np.float64)
    return (np.exp(-((a - 0.7) ** 2) / 0.02)
            + np.exp(-((a + 0.7) ** 2) / 0.02))


def twinpeaks_step(s, a):
    """Horizon-1 bandit step: state is untouched, episode always ends."""
    r = float(twinpeaks_reward(np.asarray(a, dtype=np.float64)[0]))
    return np.asarray(s, dtype=np.float64).copy(), r, True


def pointmass_step(s, a):
    """Velocity-integrator step toward the goal with a capture bonus."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    v = np.clip(s[2:] + 0.1 * a, -1.0, 1.0)
    p = np.clip(s[:2] + 0.1 * v, -2.0, 2.0)
    dist = float(np.linalg.norm(p - _GOAL))
    reward = -dist
    terminal = dist < 0.05
    if terminal:
        reward += 10.0
    return np.concatenate([p, v]), reward, terminal


class TwinPeaks1D:
    name = "twinpeaks1d"

    def __init__(self):
        self.spec = EnvSpec(name=self.name, obs_dim=1, act_dim=1, horizon=1)

    def reset(self, rng):
        return rng.uniform(-1.0, 1.0, size=1)

    def step(self, s, a):
        return twinpeaks_step(s, a)


class PointMass2D:
    name = "pointmass2d"

    def __init__(self):
        self.spec = EnvSpec(name=self.name, obs_dim=4, act_dim=2, horizon=100)

    def reset(self, rng):
        return _START.copy()

    def step(self, s, a):
        return pointmass_step(s, a)


_ENVS = {TwinPeaks1D.name: TwinPeaks1D, PointMass2D.name: PointMass2D}


def make_env(name: str):
    if name not in _ENVS:
        raise ValueError(f"unknown env {name!r}; known: {sorted(_ENVS)}")
    return _ENVS[name]()


POLICY_KINDS = ("random", "medium", "expert")


class ScriptedPolicy:
    """Dataset-generating policy tiers for the native environments."""

    def __init__(self, kind: str, env_name: str):
        if kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {kind!r}")
        if env_name not in _ENVS:
            raise ValueError(f"unknown env {env_name!r}")
        self.kind = kind
        self.env_name = env_name

    def act(self, obs, rng):
        if self.env_name == TwinPeaks1D.name:
            return self._act_twinpeaks(rng)
        return self._act_pointmass(obs, rng)

    def _act_twinpeaks(self, rng):
        if self.kind == "random":
            return rng.uniform(-1.0, 1.0, size=1)
        std = 0.05 if self.kind == "expert" else 0.25
        mode = 0.7 if rng.random() < 0.5 else -0.7
        a = mode + std * rng.standard_normal(1)
        return np.clip(a, -1.0, 1.0)

    def _act_pointmass(self, obs, rng):
        if self.kind == "random":
            return rng.uniform(-1.0, 1.0, size=2)
        std = 0.1 if self.kind == "expert" else 0.5
        p, v = obs[:2], obs[2:]
        base = np.clip(2.0 * (_GOAL - p) - v, -1.0, 1.0)
        return np.clip(base + std * rng.standard_normal(2), -1.0, 1.0)


def scripted_policy(kind: str, env) -> ScriptedPolicy:
    return ScriptedPolicy(kind, env.name)


def rollout(env, policy, rng) -> EpisodeResult:
    s = env.reset(rng)
    total = 0.0
    done = False
    length = 0
    for _ in range(env.spec.horizon):
        a = policy.act(s, rng)
        s, r, done = env.step(s, a)
        total += r
        length += 1
        if done:
            break
    return EpisodeResult(total_return=total, length=length,
                         terminated_early=done and length < env.spec.horizon)


def collect_dataset(env, policy_kind: str, n_transitions: int,
                    seed: int) -> OfflineDataset:
    """Exactly n transitions from consecutive seeded rollouts."""
    if n_transitions < 1:
        raise ValueError("n_transitions must be >= 1")
    policy = scripted_policy(policy_kind, env)
    rng = make_rng(seed)
    states, actions, rewards, next_states, terminals = [], [], [], [], []
    while len(states) < n_transitions:
        s = env.reset(rng)
        for _ in range(env.spec.horizon):
            a = policy.act(s, rng)
            s2, r, done = env.step(s, a)
            states.append(s)
            actions.append(a)
            rewards.append(r)
            next_states.append(s2)
            terminals.append(done)
            s = s2
            if done or len(states) >= n_transitions:
                break
    manifest = Manifest(
        env=env.name,
        sources=[SourceInfo(policy=policy_kind, count=n_transitions, seed=seed)],
        seed=seed,
    )
    return OfflineDataset(
        states=np.array(states),
        actions=np.array(actions),
        rewards=np.array(rewards),
        next_states=np.array(next_states),
        terminals=np.array(terminals),
        manifest=manifest,
    )


def measure_reference_returns(env, episodes: int = REFERENCE_EPISODES,
                              seed: int = REFERENCE_SEED):
    """Mean returns of the scripted random and expert policies."""
    means = {}
    for kind in ("random", "expert"):
        rng = make_rng(seed)
        pol = scripted_policy(kind, env)
        rets = [rollout(env, pol, rng).total_return for _ in range(episodes)]
        means[kind] = float(np.mean(rets))
    return means["random"], means["expert"]


def ensure_reference_returns(env, registry_path=None) -> EnvSpec:
    """Fill the env spec's reference returns, via the registry if given."""
    if env.spec.j_rand is not None and env.spec.j_exp is not None:
        return env.spec
    registry = {}
    if registry_path is not None and Path(registry_path).exists():
        with open(registry_path) as fh:
            registry = json.load(fh)
    entry = registry.get(env.name)
    if entry is None:
        j_rand, j_exp = measure_reference_returns(env)
        entry = {"j_rand": j_rand, "j_exp": j_exp,
                 "episodes": REFERENCE_EPISODES, "seed": REFERENCE_SEED}
        if registry_path is not None:
            registry[env.name] = entry
            Path(registry_path).parent.mkdir(parents=True, exist_ok=True)
            with open(registry_path, "w") as fh:
                json.dump(registry, fh, indent=2, sort_keys=True)
                fh.write("\n")
    env.spec.j_rand = float(entry["j_rand"])
    env.spec.j_exp = float(entry["j_exp"])
    if env.spec.j_exp <= env.spec.j_rand:
        raise ValueError(
            f"{env.name}: reference returns violate J_exp > J_rand"
        )
    return env.spec


def normalized_score(spec: EnvSpec, mean_return: float) -> float:
    if spec.j_rand is None or spec.j_exp is None:
        raise ValueError("env spec has no reference returns")
    return 100.0 * (mean_return - spec.j_rand) / (spec.j_exp - spec.j_rand)


def evaluate_policy(env, policy, episodes: int, seed: int,
                    registry_path=None) -> EvalResult:
    """Seeded evaluation episodes plus the normalized score."""
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    ensure_reference_returns(env, registry_path)
    rng = make_rng(seed)
    rets = np.array(
        [rollout(env, policy, rng).total_return for _ in range(episodes)]
    )
    mean = float(rets.mean())
    return EvalResult(
        mean_return=mean,
        std_return=float(rets.std()),
        normalized_score=normalized_score(env.spec, mean),
        episodes=episodes,
    )

"""Offline dataset container, on-disk format, normalization, mixing, sampling.

Datasets are immutable column stores of transitions plus a provenance
manifest and state-normalization statistics. The sampler also draws the
global negative action pairs the contrastive regularizer consumes.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EPS_NORM = 1e-3

_MAGIC = b"ORLD"
_VERSION = 1
_HEADER = "<4sHIIQ"


class DatasetFormatError(Exception):
    """The file is not a parseable dataset (bad magic / corrupt header)."""


class DatasetVersionError(DatasetFormatError):
    """The dataset format version is not supported."""


class DatasetTruncatedError(DatasetFormatError):
    """The dataset payload ends before the declared transition count."""


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass
class NormStats:
    """Per-dimension state mean/std; std is floored at EPS_NORM."""

    mean: np.ndarray
    std: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, NormStats):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.std, other.std
        )


@dataclass
class SourceInfo:
    policy: str
    count: int
    seed: int | None = None

    def to_dict(self):
        return {"policy": self.policy, "count": self.count, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(policy=d["policy"], count=int(d["count"]), seed=d.get("seed"))


@dataclass
class Manifest:
    env: str
    sources: list = field(default_factory=list)
    seed: int | None = None

    def to_dict(self):
        return {
            "env": self.env,
            "sources": [s.to_dict() for s in self.sources],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            env=d["env"],
            sources=[SourceInfo.from_dict(s) for s in d["sources"]],
            seed=d.get("seed"),
        )


class OfflineDataset:
    """Fixed collection of transitions with manifest and norm stats."""

    def __init__(self, states, actions, rewards, next_states, terminals,
                 manifest: Manifest):
        self.states = np.ascontiguousarray(states, dtype=np.float64)
        self.actions = np.ascontiguousarray(actions, dtype=np.float64)
        self.rewards = np.ascontiguousarray(rewards, dtype=np.float64).reshape(-1)
        self.next_states = np.ascontiguousarray(next_states, dtype=np.float64)
        self.terminals = np.ascontiguousarray(terminals, dtype=bool).reshape(-1)
        self.manifest = manifest
        n = len(self.states)
        if n == 0:
            raise ValueError("dataset must contain at least one transition")
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise ValueError("states and actions must be 2-d arrays")
        if not (len(self.actions) == len(self.rewards)
                == len(self.next_states) == len(self.terminals) == n):
            raise ValueError("column lengths disagree")
        if self.next_states.shape[1] != self.obs_dim:
            raise ValueError("next_state dimension mismatch")
        for name, col in (("states", self.states), ("actions", self.actions),
                          ("rewards", self.rewards),
                          ("next_states", self.next_states)):
            if not np.all(np.isfinite(col)):
                raise ValueError(f"non-finite values in {name}")
        if np.any(np.abs(self.actions) > 1.0):
            raise ValueError("actions must lie within [-1, 1]")
        declared = sum(s.count for s in manifest.sources)
        if declared != n:
            raise ValueError(
                f"manifest counts sum to {declared}, dataset holds {n}"
            )
        self.stats = compute_norm_stats(self)

    @property
    def obs_dim(self) -> int:
        return self.states.shape[1]

    @property
    def act_dim(self) -> int:
        return self.actions.shape[1]

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> Transition:
        return Transition(
            state=self.states[i].copy(),
            action=self.actions[i].copy(),
            reward=float(self.rewards[i]),
            next_state=self.next_states[i].copy(),
            terminal=bool(self.terminals[i]),
        )

    def __eq__(self, other):
        if not isinstance(other, OfflineDataset):
            return NotImplemented
        return (
            np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.next_states, other.next_states)
            and np.array_equal(self.terminals, other.terminals)
            and self.manifest == other.manifest
        )

    def source_slices(self):
        """(SourceInfo, row slice) pairs; rows are stored in source order."""
        out = []
        start = 0
        for src in self.manifest.sources:
            out.append((src, slice(start, start + src.count)))
            start += src.count
        return out


def compute_norm_stats(dataset: OfflineDataset) -> NormStats:
    """Population mean/std over all states and next_states, std floored."""
    if len(dataset) == 0:
        raise ValueError("cannot compute statistics of an empty dataset")
    pool = np.concatenate([dataset.states, dataset.next_states], axis=0)
    mean = pool.mean(axis=0)
    std = pool.std(axis=0)
    return NormStats(mean=mean, std=np.maximum(std, EPS_NORM))


def normalize_state(stats: NormStats, s):
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != stats.mean.shape[0]:
        raise ValueError(
            f"state dim {s.shape[-1]} != stats dim {stats.mean.shape[0]}"
        )
    return (s - stats.mean) / stats.std


def denormalize_state(stats: NormStats, s):
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != stats.mean.shape[0]:
        raise ValueError(
            f"state dim {s.shape[-1]} != stats dim {stats.mean.shape[0]}"
        )
    return s * stats.std + stats.mean


def mix_datasets(a: OfflineDataset, b: OfflineDataset) -> OfflineDataset:
    """Concatenate two datasets; manifests merge, stats are recomputed."""
    if a.manifest.env != b.manifest.env:
        raise ValueError(
            f"env mismatch: {a.manifest.env!r} vs {b.manifest.env!r}"
        )
    if a.obs_dim != b.obs_dim or a.act_dim != b.act_dim:
        raise ValueError("observation/action dimensions disagree")
    manifest = Manifest(
        env=a.manifest.env,
        sources=[SourceInfo(s.policy, s.count, s.seed)
                 for s in a.manifest.sources + b.manifest.sources],
        seed=None,
    )
    return OfflineDataset(
        states=np.concatenate([a.states, b.states]),
        actions=np.concatenate([a.actions, b.actions]),
        rewards=np.concatenate([a.rewards, b.rewards]),
        next_states=np.concatenate([a.next_states, b.next_states]),
        terminals=np.concatenate([a.terminals, b.terminals]),
        manifest=manifest,
    )


def subset_dataset(dataset: OfflineDataset, indices, policy: str,
                   seed: int | None = None) -> OfflineDataset:
    """New single-source dataset from the given rows (test/report plumbing)."""
    idx = np.asarray(indices, dtype=np.intp)
    manifest = Manifest(
        env=dataset.manifest.env,
        sources=[SourceInfo(policy=policy, count=len(idx), seed=seed)],
        seed=seed,
    )
    return OfflineDataset(
        states=dataset.states[idx],
        actions=dataset.actions[idx],
        rewards=dataset.rewards[idx],
        next_states=dataset.next_states[idx],
        terminals=dataset.terminals[idx],
        manifest=manifest,
    )


@dataclass
class Minibatch:
    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    neg_action_1: np.ndarray | None = None
    neg_action_2: np.ndarray | None = None


def sample_minibatch(dataset: OfflineDataset, n: int, rng,
                     negatives: bool = True) -> Minibatch:
    """n uniform-with-replacement rows, plus 2n global negative actions.

    The negative actions are drawn uniformly over the whole action column,
    irrespective of state. Draw order is pinned (indices, then the two
    negative index vectors) so that seeded runs are reproducible.
    """
    if n <= 0:
        raise ValueError("minibatch size must be positive")
    size = len(dataset)
    idx = rng.integers(0, size, size=n)
    neg1 = neg2 = None
    if negatives:
        i1 = rng.integers(0, size, size=n)
        i2 = rng.integers(0, size, size=n)
        neg1 = dataset.actions[i1]
        neg2 = dataset.actions[i2]
    return Minibatch(
        indices=idx,
        states=dataset.states[idx],
        actions=dataset.actions[idx],
        rewards=dataset.rewards[idx],
        next_states=dataset.next_states[idx],
        terminals=dataset.terminals[idx],
        neg_action_1=neg1,
        neg_action_2=neg2,
    )


def _row_dtype(obs_dim: int, act_dim: int) -> np.dtype:
    return np.dtype([
        ("s", "<f8", (obs_dim,)),
        ("a", "<f8", (act_dim,)),
        ("r", "<f8"),
        ("ns", "<f8", (obs_dim,)),
        ("d", "u1"),
    ])


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def save_dataset(dataset: OfflineDataset, path) -> None:
    """Write the "ORLD" binary plus the JSON manifest sidecar."""
    n = len(dataset)
    rows = np.empty(n, dtype=_row_dtype(dataset.obs_dim, dataset.act_dim))
    rows["s"] = dataset.states
    rows["a"] = dataset.actions
    rows["r"] = dataset.rewards
    rows["ns"] = dataset.next_states
    rows["d"] = dataset.terminals.astype(np.uint8)
    header = struct.pack(_HEADER, _MAGIC, _VERSION,
                         dataset.obs_dim, dataset.act_dim, n)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes())
    with open(manifest_path(path), "w") as fh:
        json.dump(dataset.manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> OfflineDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    hsize = struct.calcsize(_HEADER)
    if len(blob) < hsize or blob[:4] != _MAGIC:
        raise DatasetFormatError(f"{path}: bad magic, not an ORLD dataset")
    _, version, obs_dim, act_dim, count = struct.unpack_from(_HEADER, blob)
    if version != _VERSION:
        raise DatasetVersionError(
            f"{path}: format version {version}, expected {_VERSION}"
        )
    dtype = _row_dtype(obs_dim, act_dim)
    expected = hsize + count * dtype.itemsize
    if len(blob) < expected:
        raise DatasetTruncatedError(
            f"{path}: payload holds {len(blob) - hsize} bytes, "
            f"expected {count * dtype.itemsize}"
        )
    rows = np.frombuffer(blob, dtype=dtype, count=count, offset=hsize)
    mpath = manifest_path(path)
    if not mpath.exists():
        raise DatasetFormatError(f"{path}: missing manifest sidecar {mpath}")
    with open(mpath) as fh:
        manifest = Manifest.from_dict(json.load(fh))
    return OfflineDataset(
        states=rows["s"].copy(),
        actions=rows["a"].copy(),
        rewards=rows["r"].copy(),
        next_states=rows["ns"].copy(),
        terminals=rows["d"].astype(bool),
        manifest=manifest,
    )


def csv_header(obs_dim: int, act_dim: int) -> list:
    cols = [f"s{i}" for i in range(obs_dim)]
    cols += [f"a{i}" for i in range(act_dim)]
    cols.append("r")
    cols += [f"ns{i}" for i in range(obs_dim)]
    cols.append("done")
    return cols


def export_csv(dataset: OfflineDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(dataset.obs_dim, dataset.act_dim))
        for i in range(len(dataset)):
            row = ([repr(float(v)) for v in dataset.states[i]]
                   + [repr(float(v)) for v in dataset.actions[i]]
                   + [repr(float(dataset.rewards[i]))]
                   + [repr(float(v)) for v in dataset.next_states[i]]
                   + [str(int(dataset.terminals[i]))])
            writer.writerow(row)


def import_csv(path, env: str, policy: str = "csv",
               seed: int | None = None) -> OfflineDataset:
    """Read `s0..,a0..,r,ns0..,done` rows into a single-source dataset."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetFormatError(f"{path}: empty CSV")
        obs_dim = sum(1 for c in header if c.startswith("s") and c[1:].isdigit())
        act_dim = sum(1 for c in header if c.startswith("a") and c[1:].isdigit())
        expected = csv_header(obs_dim, act_dim)
        if header != expected:
            raise DatasetFormatError(
                f"{path}: header {header} does not match {expected}"
            )
        states, actions, rewards, next_states, terminals = [], [], [], [], []
        for row in reader:
            if not row:
                continue
            vals = [float(v) for v in row[:-1]]
            states.append(vals[:obs_dim])
            actions.append(vals[obs_dim:obs_dim + act_dim])
            rewards.append(vals[obs_dim + act_dim])
            next_states.append(vals[obs_dim + act_dim + 1:])
            terminals.append(row[-1].strip().lower() in ("1", "true"))
    manifest = Manifest(env=env,
                        sources=[SourceInfo(policy, len(states), seed)],
                        seed=seed)
    return OfflineDataset(
        states=np.array(states),
        actions=np.array(actions),
        rewards=np.array(rewards),
        next_states=np.array(next_states),
        terminals=np.array(terminals),
        manifest=manifest,
    )

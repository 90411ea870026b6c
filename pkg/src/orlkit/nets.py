"""Minimal dense network engine: float64 MLPs with exact analytic gradients.

Everything here runs at 64-bit precision on plain numpy arrays so that
central-difference gradient checks are meaningful. No autodiff graph: the
backward pass is hand-derived for the fixed architecture (relu hidden
layers, linear or bound-scaled tanh head), which is all the rest of the
toolkit needs.
"""

from __future__ import annotations

import struct

import numpy as np

HEADS = ("linear", "tanh")

_CKPT_MAGIC = b"ORLW"
_CKPT_VERSION = 1


class CheckpointError(Exception):
    """A parameter checkpoint file cannot be parsed."""


class TrainingDiverged(RuntimeError):
    """A non-finite loss or gradient aborted an optimization run."""


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Seeded generator; identical (seed, stream) pairs give identical bits."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


class MlpNet:
    """Fully connected net with relu hidden layers.

    head="linear" leaves the last pre-activation untouched (critic / mean
    outputs); head="tanh" squashes it to (-out_bound, out_bound) (actor
    outputs). Weights are uniform in +-1/sqrt(fan_in), biases zero.
    """

    def __init__(self, sizes, head: str = "linear", out_bound: float = 1.0, rng=None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        if out_bound <= 0:
            raise ValueError("out_bound must be positive")
        if rng is None:
            rng = make_rng(0)
        self.sizes = sizes
        self.head = head
        self.out_bound = float(out_bound)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @property
    def params(self) -> list:
        """Live parameter arrays, interleaved [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_params(self, params) -> None:
        expect = self.params
        if len(params) != len(expect):
            raise ValueError("parameter list length mismatch")
        for dst, src in zip(expect, params):
            if dst.shape != np.shape(src):
                raise ValueError("parameter shape mismatch")
            dst[...] = src

    def copy(self) -> "MlpNet":
        dup = MlpNet.__new__(MlpNet)
        dup.sizes = list(self.sizes)
        dup.head = self.head
        dup.out_bound = self.out_bound
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def _promote(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"input has shape {x.shape}, expected (*, {self.in_dim})"
            )
        return x, single

    def forward(self, x):
        x2, single = self._promote(x)
        h = x2
        for k in range(len(self.weights) - 1):
            h = np.maximum(h @ self.weights[k].T + self.biases[k], 0.0)
        z = h @ self.weights[-1].T + self.biases[-1]
        y = z if self.head == "linear" else self.out_bound * np.tanh(z)
        return y[0] if single else y

    def forward_cached(self, x):
        """Forward pass on a (n, in) batch keeping what backward() needs."""
        x2, _ = self._promote(np.atleast_2d(x))
        inputs = [x2]
        preacts = []
        h = x2
        for k in range(len(self.weights) - 1):
            z = h @ self.weights[k].T + self.biases[k]
            preacts.append(z)
            h = np.maximum(z, 0.0)
            inputs.append(h)
        z = h @ self.weights[-1].T + self.biases[-1]
        preacts.append(z)
        y = z if self.head == "linear" else self.out_bound * np.tanh(z)
        return y, (inputs, preacts, y)

    def backward(self, cache, upstream, need_param_grads: bool = True):
        """Gradient of sum_i <upstream_i, forward(x_i)> from a cached pass.

        Returns (grads, dx) where grads mirrors .params (or None when
        need_param_grads=False) and dx is the gradient w.r.t. the input.
        """
        inputs, preacts, y = cache
        u = np.asarray(upstream, dtype=np.float64)
        if u.ndim == 1:
            u = u[None, :]
        if u.shape != y.shape:
            raise ValueError(f"upstream shape {u.shape} != output shape {y.shape}")
        if self.head == "tanh":
            dz = u * (self.out_bound - y * y / self.out_bound)
        else:
            dz = u
        grads = [None] * (2 * len(self.weights)) if need_param_grads else None
        for k in range(len(self.weights) - 1, -1, -1):
            if need_param_grads:
                grads[2 * k] = dz.T @ inputs[k]
                grads[2 * k + 1] = dz.sum(axis=0)
            dx = dz @ self.weights[k]
            if k > 0:
                dz = dx * (preacts[k - 1] > 0.0)
        return grads, dx


def mlp_forward(net: MlpNet, x):
    """Validated forward pass (contract entry point; see MlpNet.forward)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite network input")
    return net.forward(x)


def mlp_backward(net: MlpNet, x, upstream):
    """Gradients of <upstream, forward(x)> w.r.t. every parameter and x."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if not np.all(np.isfinite(upstream)):
        raise ValueError("non-finite upstream gradient")
    single = x.ndim == 1
    _, cache = net.forward_cached(x)
    grads, dx = net.backward(cache, upstream)
    return grads, (dx[0] if single else dx)


class AdamState:
    """Bias-corrected Adam accumulators for a parameter list."""

    def __init__(self, params, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("lr must be positive")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("decay rates must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0


def adam_step(params, grads, state: AdamState) -> None:
    """One in-place Adam update of params along grads."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(
                f"non-finite gradient entering Adam step {state.step_count + 1}"
            )
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def polyak_update(target_params, online_params, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise, in place.

    Computed as target += tau * (online - target) so that equal parameter
    sets are an exact fixed point; tau == 1 copies online exactly.
    """
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if len(target_params) != len(online_params):
        raise ValueError("parameter list length mismatch")
    for t, o in zip(target_params, online_params):
        if t.shape != o.shape:
            raise ValueError("parameter shape mismatch")
        if tau == 1.0:
            t[...] = o
        else:
            t += tau * (o - t)


def grad_check(loss_and_grad, params, h: float = 1e-6,
               sample_cap: int = 10_000, rng=None) -> float:
    """Worst central-difference error of an analytic gradient.

    loss_and_grad() must evaluate the loss at the current parameter values
    and return (loss, grads) with grads mirroring params. Every coordinate
    is probed unless the total exceeds sample_cap, in which case a seeded
    random subsample is used. Returns max |analytic - numeric| scaled by
    max(1, |analytic|, |numeric|).
    """
    _, grads = loss_and_grad()
    coords = []
    for i, p in enumerate(params):
        for j in range(p.size):
            coords.append((i, j))
    if len(coords) > sample_cap:
        if rng is None:
            rng = make_rng(0)
        pick = rng.choice(len(coords), size=sample_cap, replace=False)
        coords = [coords[int(k)] for k in pick]
    worst = 0.0
    for i, j in coords:
        flat = params[i].reshape(-1)
        old = flat[j]
        flat[j] = old + h
        lo_plus = loss_and_grad()[0]
        flat[j] = old - h
        lo_minus = loss_and_grad()[0]
        flat[j] = old
        numeric = (lo_plus - lo_minus) / (2.0 * h)
        analytic = grads[i].reshape(-1)[j]
        err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, err)
    return worst


def save_net(net: MlpNet, path) -> None:
    """Write a versioned "ORLW" checkpoint (header + row-major f64 LE)."""
    head_tag = HEADS.index(net.head)
    parts = [
        _CKPT_MAGIC,
        struct.pack("<HBd", _CKPT_VERSION, head_tag, net.out_bound),
        struct.pack("<H", len(net.weights)),
    ]
    for w in net.weights:
        parts.append(struct.pack("<II", w.shape[1], w.shape[0]))
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_net(path) -> MlpNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not an ORLW checkpoint")
    off = 4
    try:
        version, head_tag, out_bound = struct.unpack_from("<HBd", blob, off)
        off += struct.calcsize("<HBd")
        if version != _CKPT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (n_layers,) = struct.unpack_from("<H", blob, off)
        off += 2
        dims = []
        for _ in range(n_layers):
            fan_in, fan_out = struct.unpack_from("<II", blob, off)
            off += 8
            dims.append((fan_in, fan_out))
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header") from exc
    sizes = [dims[0][0]] + [d[1] for d in dims]
    net = MlpNet(sizes, head=HEADS[head_tag], out_bound=out_bound)
    for k, (fan_in, fan_out) in enumerate(dims):
        nw = fan_in * fan_out * 8
        if off + nw + fan_out * 8 > len(blob):
            raise CheckpointError(f"{path}: truncated payload at layer {k}")
        net.weights[k] = np.frombuffer(
            blob, dtype="<f8", count=fan_in * fan_out, offset=off
        ).reshape(fan_out, fan_in).copy()
        off += nw
        net.biases[k] = np.frombuffer(
            blob, dtype="<f8", count=fan_out, offset=off
        ).copy()
        off += fan_out * 8
    if off != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after payload")
    return net

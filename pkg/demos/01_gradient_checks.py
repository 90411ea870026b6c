"""Verify every loss in the toolkit against central finite differences.

The engine ships hand-derived gradients; this walks each loss family
(critic regression, the two deterministic cloning terms, Gaussian NLL,
forward KL, Monte-Carlo reverse KL) and prints the worst relative error
observed over a handful of random instances. Everything should land
comfortably under 1e-5 at 64-bit precision.
"""

import numpy as np

from orlkit import MlpNet, grad_check, make_rng
from orlkit.behavior import GaussianBehaviorModel
from orlkit.regularizers import (StochasticPolicy, forward_kl_bc_grads,
                                 mse_bc_grad, mse_bc_loss,
                                 reverse_kl_stochastic_grads,
                                 rkl_contrastive_grad, rkl_contrastive_loss)


def critic_mse(seed):
    rng = make_rng(seed)
    net = MlpNet([4, 12, 12, 1], rng=rng)
    x, y = rng.normal(size=(6, 4)), rng.normal(size=6)

    def fn():
        q, cache = net.forward_cached(x)
        err = q[:, 0] - y
        g, _ = net.backward(cache, (2 * err / len(x))[:, None])
        return float(np.mean(err * err)), g

    return fn, net.params


def cloning_term(seed, alpha):
    rng = make_rng(seed)
    net = MlpNet([3, 12, 2], head="tanh", rng=rng)
    x = rng.normal(size=(6, 3))
    a, n1, n2 = (rng.uniform(-1, 1, size=(6, 2)) for _ in range(3))

    def fn():
        mu, cache = net.forward_cached(x)
        if alpha is None:
            rows, d = mse_bc_loss(mu, a), mse_bc_grad(mu, a)
        else:
            rows = rkl_contrastive_loss(mu, a, n1, n2, alpha)
            d = rkl_contrastive_grad(mu, a, n1, n2, alpha)
        g, _ = net.backward(cache, d / len(x))
        return float(np.mean(rows)), g

    return fn, net.params


def stochastic_losses(seed, kind):
    rng = make_rng(seed)
    pol = StochasticPolicy(MlpNet([3, 12, 2], rng=rng),
                           MlpNet([3, 12, 2], rng=rng))
    beh = GaussianBehaviorModel(MlpNet([3, 12, 2], rng=rng),
                                MlpNet([3, 12, 2], rng=rng))
    s = rng.normal(size=(5, 3))
    a = rng.uniform(-1, 1, size=(5, 2))
    eps = rng.standard_normal((8, 5, 2))
    params = pol.mean_net.params + pol.logstd_net.params

    def fn():
        if kind == "forward-kl":
            loss, (cm, dm), (cl, dl) = forward_kl_bc_grads(pol, s, a)
        else:
            loss, (cm, dm), (cl, dl) = reverse_kl_stochastic_grads(
                pol, beh, s, eps)
        g1, _ = pol.mean_net.backward(cm, dm)
        g2, _ = pol.logstd_net.backward(cl, dl)
        return loss, g1 + g2

    return fn, params


def main():
    suites = {
        "critic mse": [critic_mse(s) for s in range(5)],
        "mse-bc": [cloning_term(s, None) for s in range(5)],
        "rkl-contrastive a=0.5": [cloning_term(s, 0.5) for s in range(5)],
        "rkl-contrastive a=1.0": [cloning_term(s, 1.0) for s in range(5)],
        "gaussian forward-kl": [stochastic_losses(s, "forward-kl")
                                for s in range(5)],
        "reverse-kl monte-carlo": [stochastic_losses(s, "rkl") for s in
                                   range(5)],
    }
    print("worst central-difference error per loss family (target < 1e-5):")
    for name, instances in suites.items():
        worst = max(grad_check(fn, params) for fn, params in instances)
        print(f"  {name:26s} {worst:.3e}")


if __name__ == "__main__":
    main()

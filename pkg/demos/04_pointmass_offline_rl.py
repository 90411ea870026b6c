"""Offline training on the point-mass task: full agent vs cloning only.

Collects an expert dataset, then compares a TD3 agent with the
contrastive regularizer against plain supervised cloning, reporting
normalized scores (0 = random reference, 100 = expert reference).
"""

from orlkit import (DeterministicPolicy, MlpNet, RegularizerSpec, Td3Agent,
                    Td3Hyperparams, WeightConfig, collect_dataset,
                    ensure_reference_returns, evaluate_policy, fit_behavior,
                    make_env, make_rng, train, train_bc_only)


def main():
    env = make_env("pointmass2d")
    spec = ensure_reference_returns(env)
    print(f"reference returns: random {spec.j_rand:.1f}, "
          f"expert {spec.j_exp:.1f}")
    print("collecting 50k expert transitions...")
    ds = collect_dataset(env, "expert", 50_000, seed=21)

    def hook(policy):
        return evaluate_policy(env, policy, 10, seed=999)

    print("supervised cloning (squared error)...")
    policy = DeterministicPolicy(
        MlpNet([4, 64, 64, 2], head="tanh", rng=make_rng(1)), stats=ds.stats)
    log = train_bc_only(policy, ds, RegularizerSpec("mse-bc"), epochs=8,
                        rng=make_rng(2), eval_hook=hook, eval_every_epochs=8)
    print(f"  normalized score: {log.records[-1].normalized_score:.1f}")

    print("TD3 with the weighted contrastive regularizer (8k steps)...")
    behavior = fit_behavior(ds, epochs=8, rng=make_rng(3), hidden=(64, 64))
    agent = Td3Agent(4, 2, ds.stats,
                     Td3Hyperparams(steps=8000, hidden=(64, 64),
                                    eval_every=2000, eval_episodes=10),
                     RegularizerSpec("rkl-contrastive", alpha=0.25),
                     behavior=behavior, weights=WeightConfig(), seed=0)
    log = train(agent, ds, eval_hook=hook)
    for rec in log.records:
        print(f"  step {rec.step:>5d}: score {rec.normalized_score:.1f}")


if __name__ == "__main__":
    main()
